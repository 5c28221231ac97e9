#pragma once

#include "anthrofit/types.h"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <vector>

namespace anthrofit {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Monotone-chain convex hull. Returns the hull in counter-clockwise order
/// starting at the lexicographically smallest point; collinear points are
/// dropped.
template <typename Scalar>
std::vector<Point2<Scalar>> convexHull2d(std::vector<Point2<Scalar>> points) {
  auto lexLess = [](const Point2<Scalar>& a, const Point2<Scalar>& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  };
  std::sort(points.begin(), points.end(), lexLess);
  points.erase(
      std::unique(
          points.begin(), points.end(), [](const auto& a, const auto& b) { return a.x() == b.x() && a.y() == b.y(); }),
      points.end());
  if (points.size() < 3) {
    return points;
  }
  auto cross = [](const Point2<Scalar>& o, const Point2<Scalar>& a, const Point2<Scalar>& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Point2<Scalar>> hull(2 * points.size());
  size_t k = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= Scalar(0)) {
      --k;
    }
    hull[k++] = points[i];
  }
  for (size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= Scalar(0)) {
      --k;
    }
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Perimeter of a closed polygon.
template <typename Scalar>
Scalar polygonPerimeter(const std::vector<Point2<Scalar>>& polygon) {
  if (polygon.size() < 2) {
    return Scalar(0);
  }
  Scalar total(0);
  for (size_t i = 0; i < polygon.size(); ++i) {
    total += (polygon[(i + 1) % polygon.size()] - polygon[i]).norm();
  }
  return total;
}

/// Orthonormal (u, v) spanning the plane with the given unit normal.
template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> planeBasis(const Vector3<Scalar>& normal) {
  Eigen::Index minAxis = 0;
  normal.cwiseAbs().minCoeff(&minAxis);
  const Vector3<Scalar> seed = Vector3<Scalar>::Unit(minAxis);
  const Vector3<Scalar> u = normal.cross(seed).normalized();
  const Vector3<Scalar> v = normal.cross(u);
  return {u, v};
}

/// Points where the plane cuts the selected triangles: edge crossings plus
/// vertices lying on the plane.
template <typename Scalar>
std::vector<Vector3<Scalar>> planeSection(
    const Points<Scalar>& vertices,
    const Faces& faces,
    const std::vector<bool>& faceMask,
    const Vector3<Scalar>& origin,
    const Vector3<Scalar>& normal) {
  std::vector<Vector3<Scalar>> out;
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    if (!faceMask.empty() && !faceMask[f]) {
      continue;
    }
    Vector3<Scalar> p[3];
    Scalar d[3];
    for (int k = 0; k < 3; ++k) {
      p[k] = vertices.row(faces(f, k)).transpose();
      d[k] = (p[k] - origin).dot(normal);
    }
    for (int k = 0; k < 3; ++k) {
      const int n = (k + 1) % 3;
      if (d[k] == Scalar(0)) {
        out.push_back(p[k]);
      } else if ((d[k] < Scalar(0) && d[n] > Scalar(0)) || (d[k] > Scalar(0) && d[n] < Scalar(0))) {
        const Scalar t = d[k] / (d[k] - d[n]);
        out.push_back(p[k] + t * (p[n] - p[k]));
      }
    }
  }
  return out;
}

/// Perimeter of the convex hull of planar points, computed in the plane frame.
template <typename Scalar>
Scalar sectionHullPerimeter(
    const std::vector<Vector3<Scalar>>& section,
    const Vector3<Scalar>& origin,
    const Vector3<Scalar>& normal) {
  const auto [u, v] = planeBasis<Scalar>(normal);
  std::vector<Point2<Scalar>> flat;
  flat.reserve(section.size());
  for (const auto& p : section) {
    const Vector3<Scalar> rel = p - origin;
    flat.emplace_back(rel.dot(u), rel.dot(v));
  }
  return polygonPerimeter<Scalar>(convexHull2d<Scalar>(std::move(flat)));
}

} // namespace anthrofit
