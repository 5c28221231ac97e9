#include "anthrofit/measurement_spec.h"

#include "anthrofit/error.h"

#include <set>

namespace anthrofit {

namespace {

MeasurementSpec length(int index, std::string name, MeasurementKind kind, LandmarkRef from, LandmarkRef to) {
  MeasurementSpec s;
  s.index = index;
  s.name = std::move(name);
  s.kind = kind;
  s.from = std::move(from);
  s.to = std::move(to);
  return s;
}

MeasurementSpec circumference(
    int index,
    std::string name,
    LandmarkRef position,
    PlaneNormalSpec normal,
    std::vector<int> joints) {
  MeasurementSpec s;
  s.index = index;
  s.name = std::move(name);
  s.kind = MeasurementKind::kCircumference;
  s.plane_position = std::move(position);
  s.normal = std::move(normal);
  s.submesh.joints = std::move(joints);
  return s;
}

PlaneNormalSpec up() {
  return {};
}

PlaneNormalSpec along(std::string from, std::string to) {
  return {false, {std::move(from)}, {std::move(to)}};
}

std::string_view kindName(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::kLengthEuclidean:
      return "length_euclidean";
    case MeasurementKind::kLengthVertical:
      return "length_vertical";
    case MeasurementKind::kCircumference:
      return "circumference";
  }
  return "";
}

MeasurementKind parseKind(const std::string& name) {
  if (name == "length_euclidean") {
    return MeasurementKind::kLengthEuclidean;
  }
  if (name == "length_vertical") {
    return MeasurementKind::kLengthVertical;
  }
  if (name == "circumference") {
    return MeasurementKind::kCircumference;
  }
  throw Error(ErrorCode::kParseError, "unknown measurement kind '" + name + "'");
}

} // namespace

const std::vector<std::string>& standardMeasurementNames() {
  static const std::vector<std::string> names = {
      "shoulder_width",
      "back_torso_height",
      "front_torso_height",
      "head_length",
      "midline_neck_length",
      "lateral_neck_length",
      "height",
      "hand_length_right",
      "hand_length_left",
      "arm_length_right",
      "arm_length_left",
      "forearm_length_right",
      "forearm_length_left",
      "thigh_length_right",
      "thigh_length_left",
      "calf_length_right",
      "calf_length_left",
      "foot_width_right",
      "foot_width_left",
      "heel_to_ball_right",
      "heel_to_ball_left",
      "heel_to_toe_right",
      "heel_to_toe_left",
      "waist_circumference",
      "chest_circumference",
      "hip_circumference",
      "head_circumference",
      "neck_circumference",
      "upper_arm_circumference_right",
      "upper_arm_circumference_left",
      "forearm_circumference_right",
      "forearm_circumference_left",
      "thigh_circumference_right",
      "thigh_circumference_left",
      "calf_circumference_right",
      "calf_circumference_left",
  };
  return names;
}

const std::vector<std::string>& standardLandmarkNames() {
  static const std::vector<std::string> names = {
      "acromion_l",       "acromion_r",     "cervicale",        "suprasternale",    "chin",
      "head_top",         "ear_center_l",   "ear_center_r",     "belly_button",     "back_belly_button",
      "pubic_bone",       "trochanterion_l", "trochanterion_r", "knee_cap_l",       "knee_cap_r",
      "ankle_l",          "ankle_r",        "heel_l",           "heel_r",           "ball_l",
      "ball_r",           "big_toe_l",      "big_toe_r",        "small_toe_l",      "small_toe_r",
      "elbow_l",          "elbow_r",        "wrist_l",          "wrist_r",          "stylion_l",
      "stylion_r",        "finger_valley_l", "finger_valley_r", "nipple",           "head_temple",
      "adams_apple",      "bicep_center_l", "bicep_center_r",   "forearm_widest_l", "forearm_widest_r",
      "thigh_center_l",   "thigh_center_r", "calf_widest_l",    "calf_widest_r",
  };
  return names;
}

std::vector<MeasurementSpec> standardMeasurementSpecs(const BodyPartJoints& parts) {
  using K = MeasurementKind;
  const auto E = K::kLengthEuclidean;
  const auto V = K::kLengthVertical;
  const auto& n = standardMeasurementNames();

  std::vector<MeasurementSpec> specs;
  specs.push_back(length(1, n[0], E, {"acromion_l"}, {"acromion_r"}));
  specs.push_back(length(2, n[1], V, {"cervicale"}, {"back_belly_button"}));
  specs.push_back(length(3, n[2], V, {"suprasternale"}, {"belly_button"}));
  specs.push_back(length(4, n[3], E, {"head_top"}, {"cervicale"}));
  specs.push_back(length(5, n[4], E, {"chin"}, {"suprasternale"}));
  specs.push_back(length(6, n[5], E, {"ear_center_l", "ear_center_r"}, {"cervicale"}));
  specs.push_back(length(7, n[6], V, {"head_top"}, {"heel_l", "heel_r"}));
  // Paired lengths: right first, then left.
  const std::pair<const char*, const char*> sides[] = {{"_r", "right"}, {"_l", "left"}};
  int index = 8;
  auto pairOf = [&](const std::string& a, const std::string& b) {
    for (const auto& [suffix, _] : sides) {
      specs.push_back(length(index, n[index - 1], E, {a + suffix}, {b + suffix}));
      ++index;
    }
  };
  pairOf("finger_valley", "stylion");
  pairOf("acromion", "wrist");
  pairOf("elbow", "stylion");
  pairOf("trochanterion", "knee_cap");
  pairOf("knee_cap", "ankle");
  pairOf("small_toe", "big_toe");
  pairOf("heel", "ball");
  pairOf("heel", "big_toe");

  specs.push_back(circumference(24, n[23], {"belly_button"}, up(), parts.torso_lower));
  specs.push_back(circumference(25, n[24], {"nipple"}, up(), parts.torso_upper));
  specs.push_back(circumference(26, n[25], {"pubic_bone"}, up(), parts.torso_lower));
  specs.push_back(circumference(27, n[26], {"head_temple"}, up(), parts.head));
  specs.push_back(circumference(28, n[27], {"adams_apple"}, along("cervicale", "head_top"), parts.neck));
  specs.push_back(circumference(29, n[28], {"bicep_center_r"}, along("acromion_r", "elbow_r"), parts.upper_arm_r));
  specs.push_back(circumference(30, n[29], {"bicep_center_l"}, along("acromion_l", "elbow_l"), parts.upper_arm_l));
  specs.push_back(circumference(31, n[30], {"forearm_widest_r"}, along("elbow_r", "wrist_r"), parts.forearm_r));
  specs.push_back(circumference(32, n[31], {"forearm_widest_l"}, along("elbow_l", "wrist_l"), parts.forearm_l));
  specs.push_back(circumference(33, n[32], {"thigh_center_r"}, up(), parts.thigh_r));
  specs.push_back(circumference(34, n[33], {"thigh_center_l"}, up(), parts.thigh_l));
  specs.push_back(circumference(35, n[34], {"calf_widest_r"}, up(), parts.calf_r));
  specs.push_back(circumference(36, n[35], {"calf_widest_l"}, up(), parts.calf_l));
  return specs;
}

bool isStandardMeasurementSet(const std::vector<MeasurementSpec>& specs) {
  const auto& names = standardMeasurementNames();
  if (specs.size() != names.size()) {
    return false;
  }
  int lengths = 0;
  for (size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name != names[i] || specs[i].index != static_cast<int>(i) + 1) {
      return false;
    }
    lengths += specs[i].isLength() ? 1 : 0;
  }
  return lengths == kNumStandardLengths;
}

nlohmann::json toJson(const MeasurementSpec& spec) {
  nlohmann::json j = {{"index", spec.index}, {"name", spec.name}, {"kind", kindName(spec.kind)}};
  if (spec.isLength()) {
    j["from"] = spec.from;
    j["to"] = spec.to;
    return j;
  }
  nlohmann::json plane = {{"position", spec.plane_position}};
  if (spec.normal.up) {
    plane["normal"] = "up";
  } else {
    plane["normal"] = {{"from", spec.normal.from}, {"to", spec.normal.to}};
  }
  j["plane"] = plane;
  nlohmann::json submesh = {{"joints", spec.submesh.joints}};
  if (spec.submesh.slab) {
    submesh["slab"] = {{"from", spec.submesh.slab->first}, {"to", spec.submesh.slab->second}};
  }
  j["submesh"] = submesh;
  return j;
}

MeasurementSpec measurementSpecFromJson(const nlohmann::json& j) {
  try {
    MeasurementSpec s;
    s.index = j.at("index").get<int>();
    s.name = j.at("name").get<std::string>();
    s.kind = parseKind(j.at("kind").get<std::string>());
    if (s.isLength()) {
      s.from = j.at("from").get<LandmarkRef>();
      s.to = j.at("to").get<LandmarkRef>();
      return s;
    }
    const auto& plane = j.at("plane");
    s.plane_position = plane.at("position").get<LandmarkRef>();
    const auto& normal = plane.at("normal");
    if (normal.is_string()) {
      ANTHROFIT_THROW_IF(normal.get<std::string>() != "up", ErrorCode::kParseError, "plane normal must be 'up'");
      s.normal.up = true;
    } else {
      s.normal.up = false;
      s.normal.from = normal.at("from").get<LandmarkRef>();
      s.normal.to = normal.at("to").get<LandmarkRef>();
    }
    const auto& submesh = j.at("submesh");
    s.submesh.joints = submesh.at("joints").get<std::vector<int>>();
    if (submesh.contains("slab")) {
      s.submesh.slab = std::make_pair(
          submesh["slab"].at("from").get<LandmarkRef>(), submesh["slab"].at("to").get<LandmarkRef>());
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("measurement spec: ") + e.what());
  }
}

} // namespace anthrofit
