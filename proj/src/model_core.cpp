#include "anthrofit/model_core.h"

#include <Eigen/Geometry>

#include <numbers>

namespace anthrofit {

Vector3d rotationToAxisAngle(const Matrix3d& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

Vector3d canonicalizeAxisAngle(const Vector3d& aa) {
  const double angle = aa.norm();
  if (angle <= std::numbers::pi) {
    return aa;
  }
  const Vector3d axis = aa / angle;
  double wrapped = std::fmod(angle, 2.0 * std::numbers::pi);
  if (wrapped > std::numbers::pi) {
    wrapped -= 2.0 * std::numbers::pi;
  }
  return wrapped * axis;
}

} // namespace anthrofit
