#pragma once

#include "anthrofit/measurement_spec.h"
#include "anthrofit/types.h"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace anthrofit {

using LandmarkTable = std::map<std::string, int>;

/// A named K x V keypoint regressor with optional per-row names.
struct KeypointRegressor {
  Eigen::MatrixXd matrix;
  std::vector<std::string> names;
};

/// Parametric body mesh asset. Immutable after loading.
///
/// Shape and pose blendshapes are stored flattened: row 3*v + c of
/// `shape_dirs` holds the displacement of coordinate c of vertex v per unit
/// coefficient.
struct BodyModel {
  Gender gender = Gender::kNeutral;
  int beta_dim = 0;
  Pointsd v_template; // V x 3, meters
  Faces faces; // F x 3
  Eigen::MatrixXd shape_dirs; // 3V x B
  std::optional<Eigen::MatrixXd> pose_dirs; // 3V x 9(J-1)
  Eigen::MatrixXd joint_regressor; // J x V
  std::vector<int> parents; // parents[0] == -1
  Eigen::MatrixXd skin_weights; // V x J
  LandmarkTable landmarks;
  Vector3d up_axis = Vector3d::UnitY();
  std::vector<std::string> joint_names;
  std::map<std::string, KeypointRegressor> keypoint_regressors; // "kpr_*"
  std::vector<MeasurementSpec> measurements;

  int numVertices() const {
    return static_cast<int>(v_template.rows());
  }
  int numJoints() const {
    return static_cast<int>(parents.size());
  }

  /// Throws InvariantViolation describing the first broken invariant.
  void validate() const;

  /// Index of the joint with the largest skin weight per vertex (lowest joint
  /// index wins ties).
  std::vector<int> dominantJoints() const;

  /// Looks up a regressor by name. "joint_regressor" names the model's own.
  const Eigen::MatrixXd& regressor(const std::string& name) const;
  std::vector<std::string> keypointNames(const std::string& regressorName) const;
};

BodyModel loadModel(const std::filesystem::path& path);
BodyModel parseModel(const std::vector<char>& bytes);

std::vector<char> serializeModel(const BodyModel& model);
void saveModel(const std::filesystem::path& path, const BodyModel& model);

} // namespace anthrofit
