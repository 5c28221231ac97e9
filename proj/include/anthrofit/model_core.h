#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/error.h"
#include "anthrofit/types.h"

#include <cmath>
#include <vector>

namespace anthrofit {

/// Skew-symmetric cross-product matrix [v]x.
template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> k;
  k << Scalar(0), -v.z(), v.y(), v.z(), Scalar(0), -v.x(), -v.y(), v.x(), Scalar(0);
  return k;
}

/// Rotation matrix of an axis-angle vector (Rodrigues). Falls back to the
/// second-order series below 1e-8 rad.
template <typename Scalar>
Matrix3<Scalar> rodrigues(const Vector3<Scalar>& aa) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar theta2 = aa.squaredNorm();
  const Matrix3<Scalar> k = skew<Scalar>(aa);
  if (theta2 < Scalar(1e-16)) {
    return Matrix3<Scalar>::Identity() + k + Scalar(0.5) * k * k;
  }
  const Scalar theta = sqrt(theta2);
  const Scalar a = sin(theta) / theta;
  const Scalar b = (Scalar(1) - cos(theta)) / theta2;
  return Matrix3<Scalar>::Identity() + a * k + b * k * k;
}

/// Axis-angle vector of a rotation matrix, angle in [0, pi].
Vector3d rotationToAxisAngle(const Matrix3d& rotation);

/// Maps an axis-angle to the equivalent one with norm below pi (2 pi
/// periodicity of the angle).
Vector3d canonicalizeAxisAngle(const Vector3d& aa);

/// Intermediate quantities of the forward pass, kept for differentiation.
template <typename Scalar>
struct ForwardState {
  Points<Scalar> shaped; // V x 3, shaped template
  Points<Scalar> posed_rest; // V x 3, shaped + pose correctives
  Points<Scalar> rest_joints; // J x 3
  std::vector<Matrix3<Scalar>> local_rot; // J
  std::vector<Matrix3<Scalar>> global_rot; // J
  std::vector<Vector3<Scalar>> global_trans; // J, posed joint positions before translation
  std::vector<Vector3<Scalar>> skin_trans; // J, global_trans - global_rot * rest_joint
  Points<Scalar> vertices; // V x 3, final
  Points<Scalar> joints; // J x 3, final
};

namespace detail {

template <typename Scalar>
void checkShape(const BodyModel& model, const Eigen::Ref<const VectorX<Scalar>>& beta) {
  ANTHROFIT_THROW_IF(
      beta.size() != model.beta_dim,
      ErrorCode::kDimensionMismatch,
      "beta has " + std::to_string(beta.size()) + " entries, model expects " + std::to_string(model.beta_dim));
  ANTHROFIT_THROW_IF(!beta.allFinite(), ErrorCode::kNonFiniteInput, "beta contains non-finite values");
}

template <typename Scalar>
Points<Scalar> shapedVertices(const BodyModel& model, const Eigen::Ref<const VectorX<Scalar>>& beta) {
  const VectorX<Scalar> offsets = model.shape_dirs.template cast<Scalar>() * beta;
  Points<Scalar> v = model.v_template.template cast<Scalar>();
  v += Eigen::Map<const Points<Scalar>>(offsets.data(), model.numVertices(), 3);
  return v;
}

} // namespace detail

/// T-pose mesh for the given shape: template plus shape blendshapes, joints
/// regressed from the shaped vertices. No pose correctives.
template <typename Scalar>
PosedMeshT<Scalar> shapedTemplate(const BodyModel& model, const Eigen::Ref<const VectorX<Scalar>>& beta) {
  detail::checkShape<Scalar>(model, beta);
  PosedMeshT<Scalar> mesh;
  mesh.vertices = detail::shapedVertices<Scalar>(model, beta);
  mesh.joints = model.joint_regressor.template cast<Scalar>() * mesh.vertices;
  return mesh;
}

inline PosedMesh shapedTemplate(const BodyModel& model, const ShapeParams& shape) {
  return shapedTemplate<double>(model, shape.beta);
}

/// Full forward pass; fills every intermediate of `state`.
///
/// Order: shape blendshapes, pose correctives (when the asset has them), rest
/// joints from the shaped template, forward kinematics, linear blend
/// skinning, translation.
template <typename Scalar>
void forwardState(
    const BodyModel& model,
    const Eigen::Ref<const VectorX<Scalar>>& beta,
    const PoseParamsT<Scalar>& pose,
    ForwardState<Scalar>& state) {
  const int V = model.numVertices();
  const int J = model.numJoints();
  detail::checkShape<Scalar>(model, beta);
  ANTHROFIT_THROW_IF(
      pose.body_pose.rows() != J - 1,
      ErrorCode::kDimensionMismatch,
      "body_pose has " + std::to_string(pose.body_pose.rows()) + " rows, model has " + std::to_string(J - 1) +
          " non-root joints");
  ANTHROFIT_THROW_IF(
      !pose.global_orient.allFinite() || !pose.body_pose.allFinite() || !pose.translation.allFinite(),
      ErrorCode::kNonFiniteInput,
      "pose contains non-finite values");

  state.shaped = detail::shapedVertices<Scalar>(model, beta);

  state.local_rot.resize(J);
  state.local_rot[0] = rodrigues<Scalar>(pose.global_orient);
  for (int j = 1; j < J; ++j) {
    state.local_rot[j] = rodrigues<Scalar>(pose.body_pose.row(j - 1).transpose());
  }

  state.posed_rest = state.shaped;
  if (model.pose_dirs) {
    VectorX<Scalar> features(9 * (J - 1));
    for (int j = 1; j < J; ++j) {
      const Matrix3<Scalar> d = state.local_rot[j] - Matrix3<Scalar>::Identity();
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          features(9 * (j - 1) + 3 * r + c) = d(r, c);
        }
      }
    }
    const VectorX<Scalar> offsets = model.pose_dirs->template cast<Scalar>() * features;
    state.posed_rest += Eigen::Map<const Points<Scalar>>(offsets.data(), V, 3);
  }

  state.rest_joints = model.joint_regressor.template cast<Scalar>() * state.shaped;

  state.global_rot.resize(J);
  state.global_trans.resize(J);
  state.skin_trans.resize(J);
  state.global_rot[0] = state.local_rot[0];
  state.global_trans[0] = state.rest_joints.row(0).transpose();
  for (int j = 1; j < J; ++j) {
    const int p = model.parents[j];
    const Vector3<Scalar> offset = (state.rest_joints.row(j) - state.rest_joints.row(p)).transpose();
    state.global_rot[j] = state.global_rot[p] * state.local_rot[j];
    state.global_trans[j] = state.global_rot[p] * offset + state.global_trans[p];
  }
  for (int j = 0; j < J; ++j) {
    state.skin_trans[j] = state.global_trans[j] - state.global_rot[j] * state.rest_joints.row(j).transpose();
  }

  const Eigen::MatrixX<Scalar> weights = model.skin_weights.template cast<Scalar>();
  state.vertices.resize(V, 3);
  for (int v = 0; v < V; ++v) {
    Matrix3<Scalar> rot = Matrix3<Scalar>::Zero();
    Vector3<Scalar> trans = Vector3<Scalar>::Zero();
    for (int j = 0; j < J; ++j) {
      const Scalar w = weights(v, j);
      if (w != Scalar(0)) {
        rot += w * state.global_rot[j];
        trans += w * state.skin_trans[j];
      }
    }
    state.vertices.row(v) = (rot * state.posed_rest.row(v).transpose() + trans + pose.translation).transpose();
  }

  state.joints.resize(J, 3);
  for (int j = 0; j < J; ++j) {
    state.joints.row(j) = (state.global_trans[j] + pose.translation).transpose();
  }
}

template <typename Scalar>
PosedMeshT<Scalar> forward(
    const BodyModel& model,
    const Eigen::Ref<const VectorX<Scalar>>& beta,
    const PoseParamsT<Scalar>& pose) {
  ForwardState<Scalar> state;
  forwardState<Scalar>(model, beta, pose, state);
  return {std::move(state.vertices), std::move(state.joints)};
}

inline PosedMesh forward(const BodyModel& model, const ShapeParams& shape, const PoseParams& pose) {
  return forward<double>(model, shape.beta, pose);
}

/// Plain product of a K x V regressor with V x 3 vertices.
template <typename Scalar>
Points<Scalar> regressPoints(const Eigen::MatrixXd& regressor, const Points<Scalar>& vertices) {
  ANTHROFIT_THROW_IF(
      regressor.cols() != vertices.rows(),
      ErrorCode::kDimensionMismatch,
      "regressor has " + std::to_string(regressor.cols()) + " columns for " + std::to_string(vertices.rows()) +
          " vertices");
  return regressor.template cast<Scalar>() * vertices;
}

} // namespace anthrofit
