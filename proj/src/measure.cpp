#include "anthrofit/measure.h"

#include "anthrofit/error.h"
#include "anthrofit/io.h"
#include "anthrofit/geometry.h"
#include "anthrofit/model_core.h"

#include <algorithm>
#include <sstream>

namespace anthrofit {

namespace {

Vector3d planeNormal(const BodyModel& model, const Pointsd& vertices, const MeasurementSpec& spec) {
  Vector3d n = spec.normal.up
      ? model.up_axis
      : Vector3d(landmarkPoint(model, vertices, spec.normal.to) - landmarkPoint(model, vertices, spec.normal.from));
  const double len = n.norm();
  ANTHROFIT_THROW_IF(
      !(len > 1e-12), ErrorCode::kDegeneratePlane, "measurement '" + spec.name + "' has a zero plane normal");
  return n / len;
}

std::vector<bool> selectFaces(const BodyModel& model, const std::vector<int>& dominant, const SubmeshSelector& sel) {
  std::vector<bool> inSet(model.numJoints(), false);
  for (const int j : sel.joints) {
    inSet[j] = true;
  }
  std::vector<bool> mask(model.faces.rows(), false);
  for (Eigen::Index f = 0; f < model.faces.rows(); ++f) {
    mask[f] = inSet[dominant[model.faces(f, 0)]] && inSet[dominant[model.faces(f, 1)]] &&
        inSet[dominant[model.faces(f, 2)]];
  }
  return mask;
}

void applySlab(
    const BodyModel& model,
    const Pointsd& vertices,
    const MeasurementSpec& spec,
    const Vector3d& normal,
    std::vector<bool>& mask) {
  if (!spec.submesh.slab) {
    return;
  }
  double lo = landmarkPoint(model, vertices, spec.submesh.slab->first).dot(normal);
  double hi = landmarkPoint(model, vertices, spec.submesh.slab->second).dot(normal);
  if (lo > hi) {
    std::swap(lo, hi);
  }
  for (Eigen::Index f = 0; f < model.faces.rows(); ++f) {
    if (!mask[f]) {
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const double h = vertices.row(model.faces(f, k)).dot(normal);
      if (h < lo || h > hi) {
        mask[f] = false;
        break;
      }
    }
  }
}

double hullPerimeterMm(
    const BodyModel& model,
    const Pointsd& vertices,
    const MeasurementSpec& spec,
    std::vector<bool> mask) {
  const Vector3d normal = planeNormal(model, vertices, spec);
  const Vector3d origin = landmarkPoint(model, vertices, spec.plane_position);
  applySlab(model, vertices, spec, normal, mask);
  const auto section = planeSection<double>(vertices, model.faces, mask, origin, normal);
  ANTHROFIT_THROW_IF(
      section.empty(), ErrorCode::kEmptyIntersection, "plane of '" + spec.name + "' misses its submesh");
  return 1000.0 * sectionHullPerimeter<double>(section, origin, normal);
}

} // namespace

double AnthroVector::at(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  ANTHROFIT_THROW_IF(it == names.end(), ErrorCode::kIndexOutOfRange, "no measurement '" + name + "'");
  return values(it - names.begin());
}

Vector3d landmarkPoint(const BodyModel& model, const Pointsd& vertices, const LandmarkRef& ref) {
  ANTHROFIT_THROW_IF(ref.empty(), ErrorCode::kUnknownLandmark, "empty landmark reference");
  Vector3d sum = Vector3d::Zero();
  for (const auto& name : ref) {
    const auto it = model.landmarks.find(name);
    ANTHROFIT_THROW_IF(it == model.landmarks.end(), ErrorCode::kUnknownLandmark, "no landmark '" + name + "'");
    ANTHROFIT_THROW_IF(
        it->second < 0 || it->second >= vertices.rows(),
        ErrorCode::kUnknownLandmark,
        "landmark '" + name + "' outside the mesh");
    sum += vertices.row(it->second).transpose();
  }
  return sum / static_cast<double>(ref.size());
}

double measureLength(const BodyModel& model, const Pointsd& vertices, const MeasurementSpec& spec) {
  ANTHROFIT_THROW_IF(!spec.isLength(), ErrorCode::kInvalidConfig, "'" + spec.name + "' is not a length");
  const Vector3d delta = landmarkPoint(model, vertices, spec.from) - landmarkPoint(model, vertices, spec.to);
  const double meters =
      spec.kind == MeasurementKind::kLengthVertical ? std::abs(delta.dot(model.up_axis)) : delta.norm();
  return 1000.0 * meters;
}

double measureCircumference(const BodyModel& model, const Pointsd& vertices, const MeasurementSpec& spec) {
  ANTHROFIT_THROW_IF(spec.isLength(), ErrorCode::kInvalidConfig, "'" + spec.name + "' is not a circumference");
  return hullPerimeterMm(model, vertices, spec, selectFaces(model, model.dominantJoints(), spec.submesh));
}

Measurer::Measurer(const BodyModel& model) : model_(&model) {
  const auto dominant = model.dominantJoints();
  names_.reserve(model.measurements.size());
  faceMasks_.reserve(model.measurements.size());
  for (const auto& spec : model.measurements) {
    names_.push_back(spec.name);
    faceMasks_.push_back(spec.isLength() ? std::vector<bool>{} : selectFaces(model, dominant, spec.submesh));
  }
}

double Measurer::circumference(const Pointsd& vertices, size_t specIndex) const {
  return hullPerimeterMm(*model_, vertices, model_->measurements[specIndex], faceMasks_[specIndex]);
}

AnthroVector Measurer::measureMesh(const Pointsd& vertices) const {
  ANTHROFIT_THROW_IF(
      vertices.rows() != model_->numVertices(), ErrorCode::kDimensionMismatch, "mesh vertex count differs from model");
  AnthroVector a;
  a.names = names_;
  a.values.resize(static_cast<Eigen::Index>(names_.size()));
  for (size_t i = 0; i < model_->measurements.size(); ++i) {
    const auto& spec = model_->measurements[i];
    a.values(static_cast<Eigen::Index>(i)) =
        spec.isLength() ? measureLength(*model_, vertices, spec) : circumference(vertices, i);
  }
  return a;
}

AnthroVector Measurer::b2a(const Eigen::Ref<const Eigen::VectorXd>& beta) const {
  return measureMesh(shapedTemplate<double>(*model_, beta).vertices);
}

AnthroVector b2a(const BodyModel& model, const ShapeParams& shape) {
  return Measurer(model).b2a(shape.beta);
}

nlohmann::ordered_json toJson(const AnthroVector& a) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (size_t i = 0; i < a.names.size(); ++i) {
    j[a.names[i]] = a.values(static_cast<Eigen::Index>(i));
  }
  return j;
}

AnthroVector anthroFromJson(const nlohmann::json& j, const std::vector<std::string>& names) {
  AnthroVector a;
  a.names = names;
  a.values.resize(static_cast<Eigen::Index>(names.size()));
  for (size_t i = 0; i < names.size(); ++i) {
    ANTHROFIT_THROW_IF(!j.contains(names[i]), ErrorCode::kParseError, "missing measurement '" + names[i] + "'");
    a.values(static_cast<Eigen::Index>(i)) = j[names[i]].get<double>();
  }
  return a;
}

std::string csvHeader(const AnthroVector& a) {
  std::ostringstream os;
  for (size_t i = 0; i < a.names.size(); ++i) {
    os << (i ? "," : "") << a.names[i];
  }
  return os.str();
}

std::string csvRow(const AnthroVector& a) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < a.values.size(); ++i) {
    os << (i ? "," : "") << formatNumber(a.values(i));
  }
  return os.str();
}

} // namespace anthrofit
