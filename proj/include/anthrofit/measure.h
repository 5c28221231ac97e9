#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/types.h"

#include <json.hpp>

#include <string>
#include <vector>

namespace anthrofit {

/// Named anthropometric measurements in millimeters, in the asset's
/// measurement order (the 36 standard ones for full body assets).
struct AnthroVector {
  std::vector<std::string> names;
  Eigen::VectorXd values;

  double at(const std::string& name) const;
};

/// Mean position of the landmark vertices in `ref`.
Vector3d landmarkPoint(const BodyModel& model, const Pointsd& vertices, const LandmarkRef& ref);

/// Euclidean or up-axis distance between two landmark points, in mm.
double measureLength(const BodyModel& model, const Pointsd& vertices, const MeasurementSpec& spec);

/// Perimeter of the convex hull of the plane section of the measurement's submesh, in mm.
double measureCircumference(const BodyModel& model, const Pointsd& vertices, const MeasurementSpec& spec);

/// Measures T-pose meshes of one model. Caches the per-circumference face
/// selection so repeated measurement only pays for the geometry.
class Measurer {
 public:
  explicit Measurer(const BodyModel& model);

  AnthroVector measureMesh(const Pointsd& vertices) const;

  /// Shaped template for `beta`, then every measurement in order.
  AnthroVector b2a(const Eigen::Ref<const Eigen::VectorXd>& beta) const;

  const BodyModel& model() const {
    return *model_;
  }
  const std::vector<std::string>& names() const {
    return names_;
  }

 private:
  double circumference(const Pointsd& vertices, size_t specIndex) const;

  const BodyModel* model_;
  std::vector<std::string> names_;
  std::vector<std::vector<bool>> faceMasks_; // per measurement, empty for lengths
};

/// Deterministic measurement of the T-pose mesh of `shape`.
AnthroVector b2a(const BodyModel& model, const ShapeParams& shape);

nlohmann::ordered_json toJson(const AnthroVector& a);
AnthroVector anthroFromJson(const nlohmann::json& j, const std::vector<std::string>& names);
std::string csvHeader(const AnthroVector& a);
std::string csvRow(const AnthroVector& a);

} // namespace anthrofit
