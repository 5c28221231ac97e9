#include "fixtures.h"

#include "anthrofit/audit.h"
#include "anthrofit/error.h"
#include "anthrofit/ik.h"
#include "anthrofit/measure.h"
#include "anthrofit/toy_assets.h"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace anthrofit;

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

PersonSeries series(const std::string& id, std::initializer_list<std::initializer_list<double>> rows) {
  PersonSeries p;
  p.person_id = id;
  p.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (const double v : row) {
      p.samples(r, c++) = v;
    }
    ++r;
  }
  return p;
}

const DispersionRow& row(const StatsReport& report, const std::string& name) {
  const auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const auto& r) { return r.name == name; });
  REQUIRE(it != report.rows.end());
  return *it;
}

} // namespace

TEST_CASE("two samples of one person") {
  AuditOptions mm;
  mm.to_report_unit = 1.0;
  const StatsReport r = consistencyStats({"waist"}, {series("p", {{90}, {110}})}, mm);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].sigma == doctest::Approx(std::sqrt(200.0)).epsilon(1e-14));
  CHECK(r.rows[0].rel_sigma_percent == doctest::Approx(100.0 * std::sqrt(200.0) / 100.0).epsilon(1e-14));
  CHECK(r.rows[0].rel_range_percent == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(r.persons_covered == 1);
  CHECK(r.frames_covered == 2);

  // Default report unit is cm.
  const StatsReport cm = consistencyStats({"waist"}, {series("p", {{90}, {110}})});
  CHECK(cm.unit == "cm");
  CHECK(cm.rows[0].sigma == doctest::Approx(std::sqrt(200.0) / 10.0).epsilon(1e-14));
  CHECK(cm.rows[0].rel_sigma_percent == doctest::Approx(r.rows[0].rel_sigma_percent).epsilon(1e-14));
}

TEST_CASE("identical samples give zero dispersion") {
  const StatsReport r = consistencyStats({"a", "b"}, {series("p", {{5, 7}, {5, 7}, {5, 7}}), series("q", {{1, 2}, {1, 2}})});
  for (const auto& d : r.rows) {
    CHECK(d.sigma == 0.0);
    CHECK(d.rel_sigma_percent == 0.0);
    CHECK(d.rel_range_percent == 0.0);
  }
  CHECK(r.persons_covered == 2);
  CHECK(r.frames_covered == 5);
}

TEST_CASE("per-person statistics are averaged afterwards") {
  AuditOptions mm;
  mm.to_report_unit = 1.0;
  // Person p: sigma sqrt(200), q: sigma sqrt(2)*5 over {20, 30}.
  const StatsReport r = consistencyStats({"w"}, {series("p", {{90}, {110}}), series("q", {{20}, {30}})}, mm);
  CHECK(r.rows[0].sigma == doctest::Approx(0.5 * (std::sqrt(200.0) + std::sqrt(50.0))).epsilon(1e-14));
  CHECK(r.rows[0].rel_range_percent == doctest::Approx(0.5 * (20.0 + 40.0)).epsilon(1e-14));
}

TEST_CASE("left and right rows are merged") {
  AuditOptions mm;
  mm.to_report_unit = 1.0;
  const std::vector<std::string> names = {"forearm_length_left", "forearm_length_right", "height"};
  const auto people = std::vector<PersonSeries>{series("p", {{90, 20, 1}, {110, 30, 1}})};
  const StatsReport merged = consistencyStats(names, people, mm);
  REQUIRE(merged.rows.size() == 2);
  CHECK(row(merged, "forearm_length").sigma == doctest::Approx(0.5 * (std::sqrt(200.0) + std::sqrt(50.0))));
  mm.merge_sides = false;
  CHECK(consistencyStats(names, people, mm).rows.size() == 3);

  CHECK(sideless("forearm_length_left") == "forearm_length");
  CHECK(sideless("calf_r") == "calf");
  CHECK(sideless("right_knee") == "knee");
  CHECK(sideless("height") == "height");
}

TEST_CASE("a person with one frame is rejected") {
  CHECK(codeOf([] { consistencyStats({"a"}, {series("p", {{1}})}); }) == ErrorCode::kTooFewSamples);
}

TEST_CASE("beta dispersion is the mean over coefficients") {
  const double s = betaSigmaMean({series("p", {{0, 1}, {2, 1}}), series("q", {{0, 0}, {0, 4}})});
  // p: sqrt2, 0; q: 0, 2*sqrt2. Person average per coefficient, then mean.
  CHECK(s == doctest::Approx(0.5 * (0.5 * std::sqrt(2.0) + 0.5 * 2 * std::sqrt(2.0))).epsilon(1e-14));
}

TEST_CASE("property: permutation and scale invariance") {
  Rng rng(3);
  std::vector<PersonSeries> people;
  for (int p = 0; p < 3; ++p) {
    PersonSeries s;
    s.person_id = "p" + std::to_string(p);
    s.samples.resize(6, 4);
    for (Eigen::Index i = 0; i < s.samples.size(); ++i) {
      s.samples.data()[i] = rng.uniform(50.0, 150.0);
    }
    people.push_back(s);
  }
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  const StatsReport base = consistencyStats(names, people);

  std::vector<PersonSeries> shuffled(people.rbegin(), people.rend());
  for (auto& s : shuffled) {
    s.samples = s.samples.colwise().reverse().eval();
  }
  const StatsReport perm = consistencyStats(names, shuffled);
  std::vector<PersonSeries> scaled = people;
  for (auto& s : scaled) {
    s.samples *= 3.7;
  }
  const StatsReport sc = consistencyStats(names, scaled);
  for (size_t k = 0; k < base.rows.size(); ++k) {
    CHECK(perm.rows[k].sigma == doctest::Approx(base.rows[k].sigma).epsilon(1e-12));
    CHECK(std::abs(sc.rows[k].rel_sigma_percent - base.rows[k].rel_sigma_percent) < 1e-12);
    CHECK(std::abs(sc.rows[k].rel_range_percent - base.rows[k].rel_range_percent) < 1e-12);
    CHECK(base.rows[k].rel_range_percent >= 0.0);
  }
}

TEST_CASE("bone lengths") {
  Pointsd kp(3, 3);
  kp << 0, 0, 0, 0, 0.4, 0, 0, 0.4, 0;
  const auto bones = boneLengths(kp, {{"upper", 0, 1}, {"zero", 1, 2}});
  CHECK(bones[0].length_cm == doctest::Approx(40.0).epsilon(1e-14));
  CHECK_FALSE(bones[0].degenerate);
  CHECK(bones[1].length_cm == 0.0);
  CHECK(bones[1].degenerate);
  CHECK(codeOf([&] { boneLengths(kp, {{"bad", 0, 3}}); }) == ErrorCode::kIndexOutOfRange);

  std::vector<std::string> flags;
  const PersonSeries s = boneLengthSeries("p", {kp, kp}, {{"upper", 0, 1}, {"zero", 1, 2}}, &flags);
  CHECK(s.samples.rows() == 2);
  CHECK_FALSE(flags.empty());
}

TEST_CASE("seventeen-joint skeleton with hand-placed joints") {
  // Right-angled limbs with 3-4-5 and axis-aligned segments, in meters.
  Pointsd kp(17, 3);
  kp << 0.00, 1.00, 0.00,  // 0 pelvis
      -0.10, 1.00, 0.00,   // 1 right hip
      -0.10, 0.55, 0.00,   // 2 right knee
      -0.10, 0.15, 0.00,   // 3 right ankle
      0.10, 1.00, 0.00,    // 4 left hip
      0.10, 0.55, 0.00,    // 5 left knee
      0.10, 0.15, 0.00,    // 6 left ankle
      0.00, 1.25, 0.00,    // 7 spine
      0.00, 1.50, 0.00,    // 8 thorax
      0.00, 1.60, 0.00,    // 9 neck
      0.00, 1.75, 0.00,    // 10 head
      0.18, 1.50, 0.00,    // 11 left shoulder
      0.18, 1.20, 0.00,    // 12 left elbow
      0.18, 1.20, 0.25,    // 13 left wrist
      -0.18, 1.50, 0.00,   // 14 right shoulder
      -0.36, 1.26, 0.00,   // 15 right elbow
      -0.36, 1.26, 0.25;   // 16 right wrist
  const std::vector<Bone> skeleton = {
      {"hip_r", 0, 1},       {"thigh_r", 1, 2},     {"calf_r", 2, 3},      {"hip_l", 0, 4},
      {"thigh_l", 4, 5},     {"calf_l", 5, 6},      {"spine", 0, 7},       {"thorax", 7, 8},
      {"neck", 8, 9},        {"head", 9, 10},       {"shoulder_l", 8, 11}, {"upper_arm_l", 11, 12},
      {"forearm_l", 12, 13}, {"shoulder_r", 8, 14}, {"upper_arm_r", 14, 15}, {"forearm_r", 15, 16}};
  const std::vector<double> expected = {10, 45, 40, 10, 45, 40, 25, 25, 10, 15, 18, 30, 25, 18, 30, 25};
  const auto lengths = boneLengths(kp, skeleton);
  REQUIRE(lengths.size() == expected.size());
  for (size_t i = 0; i < expected.size(); ++i) {
    CAPTURE(skeleton[i].name);
    CHECK(lengths[i].length_cm == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("skeleton from the kinematic tree") {
  const BodyModel body = toy::human();
  const auto skeleton = skeletonFromParents(body);
  CHECK(skeleton.size() == 15);
  CHECK(skeleton[0].name == "spine");
  CHECK(skeleton[0].a == 0);
  CHECK(skeleton[0].b == 1);
}

TEST_CASE("CSV input") {
  const std::string csv =
      "person_id,frame_id,waist,beta_0\n"
      "a,0,900,0.1\n"
      "a,1,1100,0.3\n"
      "b,0,500,1\n"
      "b,1,500,1\n";
  const AuditData data = auditDataFromCsv(csv, "person_id", "all");
  CHECK(data.names == std::vector<std::string>{"waist"});
  REQUIRE(data.measurements.size() == 2);
  CHECK(data.betas.size() == 2);
  const StatsReport r = audit(data);
  CHECK(r.rows[0].sigma == doctest::Approx(0.5 * std::sqrt(20000.0) / 10.0).epsilon(1e-14));
  REQUIRE(r.beta_sigma_mean.has_value());
  CHECK(*r.beta_sigma_mean == doctest::Approx(0.5 * std::sqrt(0.02)).epsilon(1e-12));

  const AuditData single = auditDataFromCsv("waist\n1\n3\n", "person_id", "all");
  REQUIRE(single.measurements.size() == 1);
  CHECK(single.measurements[0].person_id == "all");
}

TEST_CASE("fixed-shape refits audit to zero spread") {
  const BodyModel body = toy::human();
  const auto seq = anthrofit::testing::makeSequence(body, 4, 5, 3.0);
  const auto results = refitWithFixedShape(body, seq.frames, ShapeParams{seq.beta}, IKConfig{});
  std::vector<nlohmann::json> lines;
  for (const auto& r : results) {
    nlohmann::json j = nlohmann::json::parse(toJson(r).dump());
    j["person_id"] = "s1";
    lines.push_back(j);
  }
  const StatsReport r = audit(auditDataFromJsonLines(lines, "person_id", "all", &body));
  CHECK(r.rows.size() == 24);
  for (const auto& d : r.rows) {
    CHECK(d.sigma == 0.0);
    CHECK(d.rel_range_percent == 0.0);
  }
  REQUIRE(r.beta_sigma_mean.has_value());
  CHECK(*r.beta_sigma_mean == 0.0);
}

TEST_CASE("report layout") {
  AuditOptions mm;
  mm.to_report_unit = 1.0;
  StatsReport r = consistencyStats({"waist", "height"}, {series("p", {{90, 1700}, {110, 1700}})}, mm);
  r.beta_sigma_mean = 0.64;
  const std::string table = formatTable(r);
  MESSAGE(table);
  CHECK(table.find("Measure") != std::string::npos);
  CHECK(table.find("r. sigma") != std::string::npos);
  CHECK(table.find("r. range") != std::string::npos);
  CHECK(table.find("waist") < table.find("height"));
  CHECK(table.find("0.64") != std::string::npos);
  const auto j = toJson(r);
  CHECK(j["rows"].size() == 2);
  CHECK(j["rows"][0]["name"] == "waist");
  CHECK(j["beta_sigma_mean"] == 0.64);
}
