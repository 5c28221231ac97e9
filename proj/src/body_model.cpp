#include "anthrofit/body_model.h"

#include "anthrofit/container.h"
#include "anthrofit/error.h"

#include <cmath>

namespace anthrofit {

namespace {

constexpr std::string_view kMagic = "BMF1";
constexpr int kVersion = 1;

const Tensor& require(const Container& c, const std::string& name) {
  const Tensor* t = c.find(name);
  ANTHROFIT_THROW_IF(t == nullptr, ErrorCode::kTensorShapeMismatch, "missing tensor '" + name + "'");
  return *t;
}

void expectShape(const Tensor& t, const std::string& name, const std::vector<int64_t>& shape) {
  ANTHROFIT_THROW_IF(
      t.shape != shape,
      ErrorCode::kTensorShapeMismatch,
      "tensor '" + name + "' has unexpected shape");
}

void expectReal(const Tensor& t, const std::string& name) {
  ANTHROFIT_THROW_IF(t.dtype == DType::kI32, ErrorCode::kTensorShapeMismatch, "tensor '" + name + "' must be real");
}

} // namespace

std::string_view toString(Gender gender) {
  switch (gender) {
    case Gender::kMale:
      return "male";
    case Gender::kFemale:
      return "female";
    case Gender::kNeutral:
      return "neutral";
  }
  return "neutral";
}

Gender parseGender(std::string_view name) {
  if (name == "male" || name == "m") {
    return Gender::kMale;
  }
  if (name == "female" || name == "f") {
    return Gender::kFemale;
  }
  if (name == "neutral" || name == "n") {
    return Gender::kNeutral;
  }
  throw Error(ErrorCode::kParseError, "unknown gender '" + std::string(name) + "'");
}

void BodyModel::validate() const {
  const int V = numVertices();
  const int J = numJoints();
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvariantViolation, what); };

  if (V == 0 || J == 0) {
    fail("model has no vertices or joints");
  }
  if (beta_dim < 1 || shape_dirs.rows() != 3 * V || shape_dirs.cols() != beta_dim) {
    fail("shape_dirs must be 3V x beta_dim");
  }
  if (joint_regressor.rows() != J || joint_regressor.cols() != V) {
    fail("joint_regressor must be J x V");
  }
  if (skin_weights.rows() != V || skin_weights.cols() != J) {
    fail("skin_weights must be V x J");
  }
  if (pose_dirs && (pose_dirs->rows() != 3 * V || pose_dirs->cols() != 9 * (J - 1))) {
    fail("pose_dirs must be 3V x 9(J-1)");
  }
  if (parents[0] != -1) {
    fail("joint 0 must be the root");
  }
  for (int j = 1; j < J; ++j) {
    if (parents[j] < 0 || parents[j] >= j) {
      fail("parent of joint " + std::to_string(j) + " must precede it");
    }
  }
  if (!v_template.allFinite() || !shape_dirs.allFinite()) {
    fail("template or shape_dirs contain non-finite values");
  }
  for (int v = 0; v < V; ++v) {
    const double sum = skin_weights.row(v).sum();
    if (std::abs(sum - 1.0) > 1e-6 || (skin_weights.row(v).array() < 0.0).any()) {
      fail("skin-weight row " + std::to_string(v) + " is not convex (sum " + std::to_string(sum) + ")");
    }
  }
  for (int j = 0; j < J; ++j) {
    if (std::abs(joint_regressor.row(j).sum() - 1.0) > 1e-4) {
      fail("joint_regressor row " + std::to_string(j) + " does not sum to 1");
    }
  }
  if (faces.size() > 0 && (faces.minCoeff() < 0 || faces.maxCoeff() >= V)) {
    fail("face index out of range");
  }
  for (const auto& [name, index] : landmarks) {
    if (index < 0 || index >= V) {
      fail("landmark '" + name + "' index out of range");
    }
  }
  if (std::abs(up_axis.norm() - 1.0) > 1e-6) {
    fail("up_axis must be a unit vector");
  }
  if (!joint_names.empty() && static_cast<int>(joint_names.size()) != J) {
    fail("joint_names must have J entries");
  }
  for (const auto& [name, kpr] : keypoint_regressors) {
    if (kpr.matrix.cols() != V) {
      fail("regressor '" + name + "' column count must be V");
    }
    if (!kpr.names.empty() && static_cast<Eigen::Index>(kpr.names.size()) != kpr.matrix.rows()) {
      fail("regressor '" + name + "' names do not match its rows");
    }
  }
  for (const auto& spec : measurements) {
    auto checkRef = [&](const LandmarkRef& ref) {
      for (const auto& lm : ref) {
        if (!landmarks.contains(lm)) {
          fail("measurement '" + spec.name + "' references missing landmark '" + lm + "'");
        }
      }
    };
    checkRef(spec.from);
    checkRef(spec.to);
    checkRef(spec.plane_position);
    checkRef(spec.normal.from);
    checkRef(spec.normal.to);
    for (const int j : spec.submesh.joints) {
      if (j < 0 || j >= J) {
        fail("measurement '" + spec.name + "' selects an unknown joint");
      }
    }
  }
}

std::vector<int> BodyModel::dominantJoints() const {
  std::vector<int> result(numVertices());
  for (int v = 0; v < numVertices(); ++v) {
    Eigen::Index best = 0;
    skin_weights.row(v).maxCoeff(&best);
    result[v] = static_cast<int>(best);
  }
  return result;
}

const Eigen::MatrixXd& BodyModel::regressor(const std::string& name) const {
  if (name == "joint_regressor") {
    return joint_regressor;
  }
  const auto it = keypoint_regressors.find(name);
  ANTHROFIT_THROW_IF(it == keypoint_regressors.end(), ErrorCode::kUnknownRegressor, "no regressor '" + name + "'");
  return it->second.matrix;
}

std::vector<std::string> BodyModel::keypointNames(const std::string& regressorName) const {
  if (regressorName == "joint_regressor") {
    return joint_names;
  }
  const auto it = keypoint_regressors.find(regressorName);
  ANTHROFIT_THROW_IF(
      it == keypoint_regressors.end(), ErrorCode::kUnknownRegressor, "no regressor '" + regressorName + "'");
  return it->second.names;
}

BodyModel parseModel(const std::vector<char>& bytes) {
  const Container c = parseContainer(bytes, kMagic);
  const auto& h = c.header;

  BodyModel m;
  try {
    const int version = h.at("version").get<int>();
    ANTHROFIT_THROW_IF(
        version != kVersion, ErrorCode::kVersionUnsupported, "BMF version " + std::to_string(version));
    m.gender = parseGender(h.at("gender").get<std::string>());
    m.beta_dim = h.at("beta_dim").get<int>();
    const auto up = h.at("up_axis").get<std::vector<double>>();
    ANTHROFIT_THROW_IF(up.size() != 3, ErrorCode::kTensorShapeMismatch, "up_axis must have 3 entries");
    m.up_axis = Vector3d(up[0], up[1], up[2]);
    if (h.contains("landmarks")) {
      m.landmarks = h["landmarks"].get<LandmarkTable>();
    }
    if (h.contains("joint_names")) {
      m.joint_names = h["joint_names"].get<std::vector<std::string>>();
    }
    if (h.contains("measurements")) {
      for (const auto& spec : h["measurements"]) {
        m.measurements.push_back(measurementSpecFromJson(spec));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTensorShapeMismatch, std::string("malformed header field: ") + e.what());
  }

  const Tensor& vt = require(c, "v_template");
  ANTHROFIT_THROW_IF(
      vt.shape.size() != 2 || vt.shape[1] != 3, ErrorCode::kTensorShapeMismatch, "v_template must be V x 3");
  expectReal(vt, "v_template");
  const int64_t V = vt.shape[0];
  m.v_template = tensorMatrix(vt, V, 3);

  const Tensor& faces = require(c, "faces");
  ANTHROFIT_THROW_IF(
      faces.dtype != DType::kI32 || faces.shape.size() != 2 || faces.shape[1] != 3,
      ErrorCode::kTensorShapeMismatch,
      "faces must be i32 F x 3");
  m.faces.resize(faces.shape[0], 3);
  for (int64_t f = 0; f < faces.shape[0]; ++f) {
    for (int k = 0; k < 3; ++k) {
      m.faces(f, k) = faces.integer[f * 3 + k];
    }
  }

  const Tensor& sd = require(c, "shape_dirs");
  expectReal(sd, "shape_dirs");
  expectShape(sd, "shape_dirs", {V, 3, m.beta_dim});
  m.shape_dirs = tensorMatrix(sd, 3 * V, m.beta_dim);

  const Tensor& parents = require(c, "parents");
  ANTHROFIT_THROW_IF(
      parents.dtype != DType::kI32 || parents.shape.size() != 1,
      ErrorCode::kTensorShapeMismatch,
      "parents must be a 1-D i32 tensor");
  m.parents.assign(parents.integer.begin(), parents.integer.end());
  const int64_t J = parents.shape[0];
  ANTHROFIT_THROW_IF(J < 1, ErrorCode::kTensorShapeMismatch, "model needs at least one joint");

  const Tensor& jr = require(c, "joint_regressor");
  expectReal(jr, "joint_regressor");
  expectShape(jr, "joint_regressor", {J, V});
  m.joint_regressor = tensorMatrix(jr, J, V);

  const Tensor& sw = require(c, "skin_weights");
  expectReal(sw, "skin_weights");
  expectShape(sw, "skin_weights", {V, J});
  m.skin_weights = tensorMatrix(sw, V, J);

  if (const Tensor* pd = c.find("pose_dirs")) {
    expectReal(*pd, "pose_dirs");
    expectShape(*pd, "pose_dirs", {V, 3, 9 * (J - 1)});
    m.pose_dirs = tensorMatrix(*pd, 3 * V, 9 * (J - 1));
  }

  for (const auto& [name, tensor] : c.tensors) {
    if (!name.starts_with("kpr_")) {
      continue;
    }
    expectReal(tensor, name);
    ANTHROFIT_THROW_IF(
        tensor.shape.size() != 2 || tensor.shape[1] != V,
        ErrorCode::kTensorShapeMismatch,
        "regressor '" + name + "' must be K x V");
    KeypointRegressor kpr;
    kpr.matrix = tensorMatrix(tensor, tensor.shape[0], V);
    if (h.contains("keypoints") && h["keypoints"].contains(name)) {
      kpr.names = h["keypoints"][name].get<std::vector<std::string>>();
    }
    m.keypoint_regressors.emplace(name, std::move(kpr));
  }

  m.validate();
  // Stored weights are f32; renormalize so rows sum to 1 in double precision.
  for (int v = 0; v < m.numVertices(); ++v) {
    m.skin_weights.row(v) /= m.skin_weights.row(v).sum();
  }
  return m;
}

BodyModel loadModel(const std::filesystem::path& path) {
  return parseModel(readBytes(path));
}

std::vector<char> serializeModel(const BodyModel& model) {
  const int64_t V = model.numVertices();
  const int64_t J = model.numJoints();
  const int64_t B = model.beta_dim;

  Container c;
  c.header["version"] = kVersion;
  c.header["gender"] = toString(model.gender);
  c.header["beta_dim"] = model.beta_dim;
  c.header["up_axis"] = {model.up_axis.x(), model.up_axis.y(), model.up_axis.z()};
  c.header["landmarks"] = model.landmarks;
  if (!model.joint_names.empty()) {
    c.header["joint_names"] = model.joint_names;
  }
  if (!model.measurements.empty()) {
    c.header["measurements"] = nlohmann::json::array();
    for (const auto& spec : model.measurements) {
      c.header["measurements"].push_back(toJson(spec));
    }
  }

  c.add("v_template", realTensor(model.v_template, DType::kF32, {V, 3}));
  Tensor faces;
  faces.dtype = DType::kI32;
  faces.shape = {model.faces.rows(), 3};
  faces.integer.assign(model.faces.data(), model.faces.data() + model.faces.size());
  c.add("faces", std::move(faces));
  c.add("shape_dirs", realTensor(model.shape_dirs, DType::kF32, {V, 3, B}));
  c.add("joint_regressor", realTensor(model.joint_regressor, DType::kF32, {J, V}));
  Tensor parents;
  parents.dtype = DType::kI32;
  parents.shape = {J};
  parents.integer.assign(model.parents.begin(), model.parents.end());
  c.add("parents", std::move(parents));
  c.add("skin_weights", realTensor(model.skin_weights, DType::kF32, {V, J}));
  if (model.pose_dirs) {
    c.add("pose_dirs", realTensor(*model.pose_dirs, DType::kF32, {V, 3, 9 * (J - 1)}));
  }
  nlohmann::json keypoints = nlohmann::json::object();
  for (const auto& [name, kpr] : model.keypoint_regressors) {
    c.add(name, realTensor(kpr.matrix, DType::kF32, {kpr.matrix.rows(), V}));
    if (!kpr.names.empty()) {
      keypoints[name] = kpr.names;
    }
  }
  if (!keypoints.empty()) {
    c.header["keypoints"] = keypoints;
  }
  return serializeContainer(c, kMagic);
}

void saveModel(const std::filesystem::path& path, const BodyModel& model) {
  writeBytes(path, serializeModel(model));
}

} // namespace anthrofit
