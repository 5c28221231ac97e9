#include "fixtures.h"
#include "oracles.h"

#include "anthrofit/error.h"
#include "anthrofit/geometry.h"
#include "anthrofit/io.h"
#include "anthrofit/measure.h"
#include "anthrofit/model_core.h"
#include "anthrofit/toy_assets.h"

#include <doctest.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace anthrofit;
using anthrofit::testing::dataPath;
using anthrofit::testing::randomBeta;

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

/// Two landmark vertices and nothing else.
BodyModel twoPointModel() {
  BodyModel m;
  m.landmarks = {{"a", 0}, {"b", 1}};
  m.up_axis = Vector3d::UnitY();
  return m;
}

MeasurementSpec lengthSpec(MeasurementKind kind) {
  MeasurementSpec s;
  s.name = "probe";
  s.kind = kind;
  s.from = {"a"};
  s.to = {"b"};
  return s;
}

/// Square prism of side `side` from y=0 to y=1, one joint.
BodyModel prism(double side) {
  BodyModel m;
  m.v_template.resize(8, 3);
  const double h = side / 2;
  const double corners[4][2] = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
  for (int ring = 0; ring < 2; ++ring) {
    for (int k = 0; k < 4; ++k) {
      m.v_template.row(4 * ring + k) = Eigen::RowVector3d(corners[k][0], ring, corners[k][1]);
    }
  }
  m.faces.resize(8, 3);
  for (int k = 0; k < 4; ++k) {
    const int n = (k + 1) % 4;
    m.faces.row(2 * k) << k, n, 4 + k;
    m.faces.row(2 * k + 1) << n, 4 + n, 4 + k;
  }
  m.skin_weights = Eigen::MatrixXd::Ones(8, 1);
  m.parents = {-1};
  m.landmarks = {{"low", 0}, {"high", 4}};
  m.up_axis = Vector3d::UnitY();
  return m;
}

MeasurementSpec midCircumference() {
  MeasurementSpec s;
  s.name = "mid";
  s.kind = MeasurementKind::kCircumference;
  s.plane_position = {"low", "high"};
  s.submesh.joints = {0};
  return s;
}

using P2 = Point2<double>;

} // namespace

TEST_CASE("length measurements") {
  const BodyModel m = twoPointModel();
  Pointsd v(2, 3);

  v << 0, 0, 0, 0, 1.7, 0;
  CHECK(measureLength(m, v, lengthSpec(MeasurementKind::kLengthVertical)) == doctest::Approx(1700.0).epsilon(1e-12));

  v << 0, 0, 0, 0.3, 0.4, 0;
  CHECK(measureLength(m, v, lengthSpec(MeasurementKind::kLengthEuclidean)) == doctest::Approx(500.0).epsilon(1e-12));
  CHECK(measureLength(m, v, lengthSpec(MeasurementKind::kLengthVertical)) == doctest::Approx(400.0).epsilon(1e-12));

  MeasurementSpec bad = lengthSpec(MeasurementKind::kLengthEuclidean);
  bad.to = {"nowhere"};
  CHECK(codeOf([&] { measureLength(m, v, bad); }) == ErrorCode::kUnknownLandmark);
}

TEST_CASE("cylinder waist equals the regular 16-gon perimeter") {
  const double expected = 16 * 2 * 0.1 * std::sin(std::numbers::pi / 16) * 1000;
  const AnthroVector a = b2a(toy::cylinder(), ShapeParams{Eigen::VectorXd::Zero(2)});
  CHECK(std::abs(a.at("waist_circumference") - expected) / expected < 1e-6);
  CHECK(a.at("height") == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("a plane above the cylinder is an empty intersection") {
  BodyModel m = toy::cylinder();
  Pointsd v(m.numVertices() + 1, 3);
  v.topRows(m.numVertices()) = m.v_template;
  v.row(m.numVertices()) = Eigen::RowVector3d(0, 2, 0);
  m.skin_weights.conservativeResize(m.numVertices() + 1, Eigen::NoChange);
  m.skin_weights.row(m.numVertices()) = Eigen::RowVector2d(1, 0);
  m.landmarks["above"] = m.numVertices();
  MeasurementSpec spec = m.measurements[0];
  spec.plane_position = {"above"};
  CHECK(codeOf([&] { measureCircumference(m, v, spec); }) == ErrorCode::kEmptyIntersection);
}

TEST_CASE("square prism section is the square itself") {
  for (const double side : {1.0, 0.5, 0.25}) {
    const BodyModel m = prism(side);
    CHECK(measureCircumference(m, m.v_template, midCircumference()) == doctest::Approx(4000.0 * side).epsilon(1e-12));

    const Vector3d origin(0, 0.5, 0);
    const auto section = planeSection<double>(m.v_template, m.faces, {}, origin, Vector3d::UnitY());
    const auto [u, v] = planeBasis<double>(Vector3d::UnitY());
    std::vector<P2> flat;
    for (const auto& p : section) {
      flat.emplace_back((p - origin).dot(u), (p - origin).dot(v));
    }
    const auto hull = convexHull2d<double>(flat);
    CHECK(hull.size() == 4);
    for (const auto& h : hull) {
      CHECK(std::abs(std::abs(h.x()) - side / 2) < 1e-12);
      CHECK(std::abs(std::abs(h.y()) - side / 2) < 1e-12);
    }
  }
}

TEST_CASE("golden measurement files from the independent oracle") {
  struct Case {
    BodyModel body;
    Eigen::VectorXd beta;
    std::string file;
  };
  Eigen::VectorXd male(8);
  male << 1, -0.5, 0.3, 0, 0.2, -1, 0.4, 0.1;
  // The goldens were computed from the f32 asset files, so compare against a
  // round-tripped body.
  auto stored = [](const BodyModel& b) { return parseModel(serializeModel(b)); };
  const std::vector<Case> cases = {
      {stored(toy::cylinder()), Eigen::Vector2d(0, 0), "cylinder_b2a_golden.json"},
      {stored(toy::cylinder()), Eigen::Vector2d(0.1, 0), "cylinder_b2a_beta01_golden.json"},
      {stored(toy::human({Gender::kMale})), Eigen::VectorXd::Zero(8), "human_male_b2a_golden.json"},
      {stored(toy::human({Gender::kFemale})), Eigen::VectorXd::Zero(7), "human_female_b2a_golden.json"},
      {stored(toy::human({Gender::kMale})), male, "human_male_b2a_beta_golden.json"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.file);
    const nlohmann::json golden = readJson(dataPath(c.file));
    const AnthroVector a = b2a(c.body, ShapeParams{c.beta});
    REQUIRE(a.names.size() == golden.size());
    for (size_t i = 0; i < a.names.size(); ++i) {
      CAPTURE(a.names[i]);
      CHECK(std::abs(a.values(static_cast<Eigen::Index>(i)) - golden.at(a.names[i]).get<double>()) < 1e-9);
    }
  }
}

TEST_CASE("measurement is deterministic and rejects bad shapes") {
  const BodyModel m = toy::human();
  Rng rng(3);
  const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
  const AnthroVector a = b2a(m, ShapeParams{beta});
  const AnthroVector b = Measurer(m).b2a(beta);
  CHECK(a.values == b.values);
  CHECK((a.values.array() > 0).all());

  Eigen::VectorXd nan = beta;
  nan(2) = std::nan("");
  CHECK(codeOf([&] { b2a(m, ShapeParams{nan}); }) == ErrorCode::kNonFiniteInput);
  CHECK(codeOf([&] { b2a(m, ShapeParams{Eigen::VectorXd::Zero(3)}); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("measurement JSON and CSV") {
  const AnthroVector a = b2a(toy::cylinder(), ShapeParams{Eigen::VectorXd::Zero(2)});
  CHECK(csvHeader(a) == "waist_circumference,height,rim_width");
  const AnthroVector back = anthroFromJson(nlohmann::json::parse(toJson(a).dump()), a.names);
  CHECK(back.values == a.values);
  CHECK(parseNumber(csvRow(a).substr(0, csvRow(a).find(','))) == a.values(0));
  CHECK(codeOf([&] { anthroFromJson(nlohmann::json::object(), a.names); }) == ErrorCode::kParseError);
}

TEST_CASE("property: scaling template and blendshapes by 2 doubles every measurement") {
  const BodyModel m = toy::human();
  BodyModel big = m;
  big.v_template *= 2.0;
  big.shape_dirs *= 2.0;
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
    const AnthroVector a = b2a(m, ShapeParams{beta});
    const AnthroVector b = b2a(big, ShapeParams{beta});
    for (Eigen::Index i = 0; i < a.values.size(); ++i) {
      CHECK(std::abs(b.values(i) - 2.0 * a.values(i)) <= 1e-9 * b.values(i));
    }
  }
}

TEST_CASE("property: translating the template leaves measurements unchanged") {
  const BodyModel m = toy::human({Gender::kFemale});
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    BodyModel moved = m;
    moved.v_template.rowwise() += Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
    const Eigen::VectorXd beta = randomBeta(m.beta_dim, rng);
    const AnthroVector a = b2a(m, ShapeParams{beta});
    const AnthroVector b = b2a(moved, ShapeParams{beta});
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("property: left and right measurements agree on the symmetric body") {
  const BodyModel m = toy::human();
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const AnthroVector a = b2a(m, ShapeParams{randomBeta(m.beta_dim, rng)});
    int pairs = 0;
    for (size_t i = 0; i < a.names.size(); ++i) {
      const std::string& n = a.names[i];
      if (!n.ends_with("_left")) {
        continue;
      }
      const std::string right = n.substr(0, n.size() - 5) + "_right";
      CHECK(std::abs(a.at(n) - a.at(right)) <= 1e-6);
      ++pairs;
    }
    CHECK(pairs == 12);
  }
}

TEST_CASE("property: cylinder circumference grows with the radial coefficient") {
  const BodyModel m = toy::cylinder();
  double previous = 0.0;
  for (double r = -0.05; r <= 0.3; r += 0.01) {
    const double c = b2a(m, ShapeParams{Eigen::Vector2d(r, 0.3)}).at("waist_circumference");
    CHECK(c > previous);
    previous = c;
  }
}

TEST_CASE("property: hull perimeter matches a brute-force hull on 1000 sections") {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    // Random convex ring plus interior points, embedded in a random plane.
    const int ringSize = 3 + static_cast<int>(rng.below(40));
    const int inner = static_cast<int>(rng.below(60));
    const double a = rng.uniform(0.05, 0.5);
    const double b = rng.uniform(0.05, 0.5);
    std::vector<P2> flat;
    std::vector<double> angles;
    for (int k = 0; k < ringSize; ++k) {
      angles.push_back(rng.uniform(0.0, 2 * std::numbers::pi));
    }
    for (const double t : angles) {
      flat.emplace_back(a * std::cos(t), b * std::sin(t));
    }
    for (int k = 0; k < inner; ++k) {
      const double t = rng.uniform(0.0, 2 * std::numbers::pi);
      const double s = 0.95 * std::sqrt(rng.uniform());
      flat.emplace_back(s * a * std::cos(t), s * b * std::sin(t));
    }

    const auto fast = convexHull2d<double>(flat);
    const auto slow = anthrofit::testing::bruteForceHull(flat);
    auto key = [](const std::vector<P2>& h) {
      std::set<std::pair<double, double>> s;
      for (const auto& p : h) {
        s.emplace(p.x(), p.y());
      }
      return s;
    };
    CHECK(key(fast) == key(slow));
    CHECK(std::abs(polygonPerimeter<double>(fast) - polygonPerimeter<double>(slow)) <= 1e-12);

    Vector3d normal(rng.normal(), rng.normal(), rng.normal());
    normal.normalize();
    const Vector3d origin(rng.normal(), rng.normal(), rng.normal());
    const auto [u, v] = planeBasis<double>(normal);
    std::vector<Vector3d> section;
    for (const auto& p : flat) {
      section.push_back(origin + p.x() * u + p.y() * v);
    }
    CHECK(
        std::abs(sectionHullPerimeter<double>(section, origin, normal) - polygonPerimeter<double>(slow)) <= 1e-12);
  }
}

TEST_CASE("hull drops collinear and duplicate points") {
  std::vector<P2> pts = {{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {2, 2}, {0, 1}};
  const auto hull = convexHull2d<double>(pts);
  CHECK(hull.size() == 4);
  CHECK(polygonPerimeter<double>(hull) == 8.0);
}
