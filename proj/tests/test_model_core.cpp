#include "fixtures.h"

#include "anthrofit/body_model.h"
#include "anthrofit/container.h"
#include "anthrofit/error.h"
#include "anthrofit/io.h"
#include "anthrofit/model_core.h"
#include "anthrofit/toy_assets.h"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <cstring>
#include <numbers>

using namespace anthrofit;
using anthrofit::testing::randomBeta;
using anthrofit::testing::randomPose;
using anthrofit::testing::scratchDir;

namespace {

ErrorCode codeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an anthrofit::Error");
  return ErrorCode::kIoError;
}

} // namespace

TEST_CASE("cylinder asset loads with its published dimensions") {
  const auto dir = scratchDir("model_cyl");
  saveModel(dir / "cylinder16.bmf", toy::cylinder());
  const BodyModel m = loadModel(dir / "cylinder16.bmf");
  CHECK(m.numVertices() == 34);
  CHECK(m.numJoints() == 2);
  CHECK(m.beta_dim == 2);
  CHECK(m.faces.rows() == 64);
}

TEST_CASE("save and load round-trip is byte-identical") {
  for (const BodyModel& m : {toy::cylinder(), toy::arm(), toy::human({Gender::kFemale, true})}) {
    const auto bytes = serializeModel(m);
    CHECK(serializeModel(parseModel(bytes)) == bytes);
  }
}

TEST_CASE("malformed containers are rejected") {
  auto bytes = serializeModel(toy::cylinder());

  SUBCASE("wrong magic") {
    bytes[0] = 'X';
    CHECK(codeOf([&] { parseModel(bytes); }) == ErrorCode::kMagicMismatch);
  }
  SUBCASE("header length past the end") {
    const uint32_t huge = 0x7fffffff;
    std::memcpy(bytes.data() + 4, &huge, 4);
    CHECK(codeOf([&] { parseModel(bytes); }) == ErrorCode::kTensorShapeMismatch);
  }
  SUBCASE("truncated payload") {
    bytes.resize(bytes.size() - 16);
    CHECK(codeOf([&] { parseModel(bytes); }) == ErrorCode::kTensorShapeMismatch);
  }
  SUBCASE("unsupported version") {
    Container c = parseContainer(bytes, "BMF1");
    c.header["version"] = 99;
    const auto edited = serializeContainer(c, "BMF1");
    CHECK(codeOf([&] { parseModel(edited); }) == ErrorCode::kVersionUnsupported);
  }
}

TEST_CASE("invariant violations are errors") {
  SUBCASE("skin weights summing to 0.8") {
    BodyModel m = toy::cylinder();
    m.skin_weights.row(3) *= 0.8;
    CHECK(codeOf([&] { m.validate(); }) == ErrorCode::kInvariantViolation);
    CHECK(codeOf([&] { parseModel(serializeModel(m)); }) == ErrorCode::kInvariantViolation);
  }
  SUBCASE("negative skin weight") {
    BodyModel m = toy::arm();
    m.skin_weights(0, 0) = 1.5;
    m.skin_weights(0, 1) = -0.5;
    CHECK(codeOf([&] { m.validate(); }) == ErrorCode::kInvariantViolation);
  }
  SUBCASE("parent cycle") {
    BodyModel m = toy::cylinder();
    m.parents = {-1, 1};
    CHECK(codeOf([&] { m.validate(); }) == ErrorCode::kInvariantViolation);
  }
  SUBCASE("face index out of range") {
    BodyModel m = toy::cylinder();
    m.faces(0, 0) = m.numVertices();
    CHECK(codeOf([&] { m.validate(); }) == ErrorCode::kInvariantViolation);
  }
  SUBCASE("landmark out of range") {
    BodyModel m = toy::cylinder();
    m.landmarks["top"] = 1000;
    CHECK(codeOf([&] { m.validate(); }) == ErrorCode::kInvariantViolation);
  }
}

TEST_CASE("shaped template") {
  const BodyModel m = toy::cylinder();

  SUBCASE("zero coefficients reproduce the template exactly") {
    const auto mesh = shapedTemplate<double>(m, Eigen::VectorXd::Zero(2));
    CHECK(mesh.vertices == m.v_template);
  }
  SUBCASE("radial coefficient moves every ring vertex 0.1 m outward") {
    const auto mesh = shapedTemplate<double>(m, Eigen::Vector2d(0.1, 0.0));
    for (int v = 0; v < 32; ++v) {
      const Vector3d before = m.v_template.row(v).transpose();
      const Vector3d after = mesh.vertices.row(v).transpose();
      const Vector3d radial = Vector3d(before.x(), 0, before.z()).normalized();
      CHECK((after - before - 0.1 * radial).norm() < 1e-12);
    }
  }
  SUBCASE("wrong coefficient count") {
    CHECK(codeOf([&] { shapedTemplate<double>(m, Eigen::VectorXd::Zero(3)); }) == ErrorCode::kDimensionMismatch);
  }
  SUBCASE("non-finite coefficient") {
    CHECK(
        codeOf([&] { shapedTemplate<double>(m, Eigen::Vector2d(std::nan(""), 0)); }) ==
        ErrorCode::kNonFiniteInput);
  }
}

TEST_CASE("forward pass") {
  SUBCASE("identity pose equals the shaped template") {
    const BodyModel m = toy::human({Gender::kMale, true});
    Rng rng(4);
    const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
    const auto posed = forward<double>(m, beta, PoseParams::zero(m.numJoints()));
    const auto rest = shapedTemplate<double>(m, beta);
    CHECK((posed.vertices - rest.vertices).cwiseAbs().maxCoeff() <= 1e-12 * rest.vertices.cwiseAbs().maxCoeff());
    CHECK((posed.joints - rest.joints).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("arm elbow rotation by pi/2 is a rigid rotation about the rest joint") {
    const BodyModel m = toy::arm();
    PoseParams pose = PoseParams::zero(2);
    pose.body_pose.row(0) = Vector3d(0, 0, std::numbers::pi / 2).transpose();
    const auto posed = forward<double>(m, Eigen::VectorXd::Zero(1), pose);
    const Vector3d elbow(1, 0, 0);
    int distal = 0;
    for (int v = 0; v < m.numVertices(); ++v) {
      const Vector3d p = m.v_template.row(v).transpose();
      if (p.x() <= 1.0 + 1e-9) {
        continue;
      }
      // Hand-computed quarter turn about +z through the elbow: (x, y) -> (-y, x).
      const Vector3d rel = p - elbow;
      const Vector3d expected = elbow + Vector3d(-rel.y(), rel.x(), rel.z());
      CHECK((posed.vertices.row(v).transpose() - expected).norm() < 1e-6);
      ++distal;
    }
    CHECK(distal == 16);
  }

  SUBCASE("translation offsets every vertex exactly") {
    const BodyModel m = toy::cylinder();
    PoseParams pose = PoseParams::zero(2);
    pose.translation = Vector3d(1, 2, 3);
    const auto posed = forward<double>(m, Eigen::VectorXd::Zero(2), pose);
    for (int v = 0; v < m.numVertices(); ++v) {
      CHECK(posed.vertices.row(v) == m.v_template.row(v) + Eigen::RowVector3d(1, 2, 3));
    }
  }

  SUBCASE("vertex and joint counts match the model") {
    const BodyModel m = toy::human();
    Rng rng(2);
    const auto posed = forward<double>(m, randomBeta(m.beta_dim, rng), randomPose(m.numJoints(), rng));
    CHECK(posed.vertices.rows() == m.numVertices());
    CHECK(posed.joints.rows() == m.numJoints());
  }
}

TEST_CASE("keypoint regression") {
  Pointsd v(8, 3);
  for (int i = 0; i < 8; ++i) {
    v.row(i) = Eigen::RowVector3d(i, 2 * i, -i);
  }
  Eigen::MatrixXd selector = Eigen::MatrixXd::Zero(1, 8);
  selector(0, 7) = 1.0;
  CHECK(regressPoints<double>(selector, v).row(0) == Eigen::RowVector3d(7, 14, -7));

  Pointsd two(2, 3);
  two << 0, 0, 0, 2, 0, 0;
  Eigen::MatrixXd mid(1, 2);
  mid << 0.5, 0.5;
  CHECK(regressPoints<double>(mid, two).row(0) == Eigen::RowVector3d(1, 0, 0));

  CHECK(codeOf([&] { regressPoints<double>(mid, v); }) == ErrorCode::kDimensionMismatch);

  const BodyModel m = toy::human();
  CHECK(codeOf([&] { m.regressor("kpr_missing"); }) == ErrorCode::kUnknownRegressor);
}

TEST_CASE("property: translation equivariance") {
  const BodyModel m = toy::human({Gender::kMale, true});
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
    PoseParams pose = randomPose(m.numJoints(), rng);
    pose.translation.setZero();
    const auto base = forward<double>(m, beta, pose);
    pose.translation = Vector3d(rng.normal(), rng.normal(), rng.normal());
    const auto moved = forward<double>(m, beta, pose);
    const Pointsd expected = base.vertices.rowwise() + pose.translation.transpose();
    CHECK((moved.vertices - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("property: global rotation equivariance about the root joint") {
  const BodyModel m = toy::human({Gender::kFemale, true});
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
    PoseParams pose = randomPose(m.numJoints(), rng);
    pose.translation.setZero();
    pose.global_orient.setZero();
    const auto base = forward<double>(m, beta, pose);
    const Vector3d aa(rng.normal(), rng.normal(), rng.normal());
    pose.global_orient = aa;
    const auto turned = forward<double>(m, beta, pose);
    const Matrix3d R = Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
    const Vector3d root = shapedTemplate<double>(m, beta).joints.row(0).transpose();
    for (int v = 0; v < m.numVertices(); ++v) {
      const Vector3d expected = R * (base.vertices.row(v).transpose() - root) + root;
      CHECK((turned.vertices.row(v).transpose() - expected).norm() <= 1e-9);
    }
  }
}

TEST_CASE("property: linear blend skinning stays in the hull of the joint transforms") {
  const BodyModel m = toy::human();
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
    const PoseParams pose = randomPose(m.numJoints(), rng, 0.5);
    ForwardState<double> st;
    forwardState<double>(m, beta, pose, st);
    for (int v = 0; v < m.numVertices(); ++v) {
      const Vector3d rest = st.posed_rest.row(v).transpose();
      Vector3d blended = Vector3d::Zero();
      double total = 0.0;
      for (int j = 0; j < m.numJoints(); ++j) {
        const double w = m.skin_weights(v, j);
        CHECK(w >= 0.0);
        const Vector3d rigid = st.global_rot[j] * (rest - st.rest_joints.row(j).transpose()) + st.global_trans[j];
        blended += w * rigid;
        total += w;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
      CHECK((blended + pose.translation - st.vertices.row(v).transpose()).norm() < 1e-9);
    }
  }
}

TEST_CASE("property: Rodrigues rotations are orthonormal") {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = trial % 4 == 0 ? 1e-10 : 3.0;
    const Vector3d aa(rng.normal(0, scale), rng.normal(0, scale), rng.normal(0, scale));
    const Matrix3d R = rodrigues<double>(aa);
    CHECK((R * R.transpose() - Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(R.determinant() - 1.0) < 1e-9);
    if (scale > 1.0) {
      const Matrix3d ref = Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
      CHECK((R - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("property: axis-angle canonicalization keeps the rotation") {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector3d aa(rng.normal(0, 5), rng.normal(0, 5), rng.normal(0, 5));
    const Vector3d c = canonicalizeAxisAngle(aa);
    CHECK(c.norm() <= std::numbers::pi + 1e-12);
    CHECK((rodrigues<double>(c) - rodrigues<double>(aa)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((rodrigues<double>(rotationToAxisAngle(rodrigues<double>(aa))) - rodrigues<double>(aa)).cwiseAbs().maxCoeff() <
        1e-9);
  }
}

TEST_CASE("toy human is bilaterally symmetric with the published coefficient counts") {
  CHECK(toy::human({Gender::kMale}).beta_dim == 8);
  CHECK(toy::human({Gender::kFemale}).beta_dim == 7);
  const BodyModel m = toy::human();
  CHECK(m.numJoints() == 16);
  CHECK(m.regressor("kpr_body").rows() == 22);
  CHECK(m.measurements.size() == 36);
  CHECK(isStandardMeasurementSet(m.measurements));
  CHECK(!m.pose_dirs.has_value());
  CHECK(toy::human({Gender::kMale, true}).pose_dirs.has_value());
}
