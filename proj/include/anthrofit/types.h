#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>

namespace anthrofit {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// N x 3 point set, one point per row.
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

using Vector3d = Vector3<double>;
using Matrix3d = Matrix3<double>;
using Pointsd = Points<double>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

enum class Gender { kMale, kFemale, kNeutral };

std::string_view toString(Gender gender);
Gender parseGender(std::string_view name);

/// Shape coefficients (PCA weights of the body shape space).
struct ShapeParams {
  Eigen::VectorXd beta;
};

/// Axis-angle pose of every joint plus a root translation. Row j of
/// `body_pose` is the rotation of joint j+1 relative to its parent.
template <typename Scalar>
struct PoseParamsT {
  Vector3<Scalar> global_orient = Vector3<Scalar>::Zero();
  Points<Scalar> body_pose;
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  static PoseParamsT zero(int numJoints) {
    PoseParamsT p;
    p.body_pose = Points<Scalar>::Zero(numJoints - 1, 3);
    return p;
  }
};
using PoseParams = PoseParamsT<double>;

template <typename Scalar>
struct PosedMeshT {
  Points<Scalar> vertices;
  Points<Scalar> joints;
};
using PosedMesh = PosedMeshT<double>;

} // namespace anthrofit
