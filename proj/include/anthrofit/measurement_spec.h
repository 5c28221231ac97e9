#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace anthrofit {

enum class MeasurementKind { kLengthEuclidean, kLengthVertical, kCircumference };

/// A point on the mesh given as the mean of one or more landmark vertices.
/// "Center between the heels" is {"heel_l", "heel_r"}.
using LandmarkRef = std::vector<std::string>;

struct PlaneNormalSpec {
  /// True: the asset's up axis. False: direction from `from` to `to`.
  bool up = true;
  LandmarkRef from;
  LandmarkRef to;
};

/// Faces whose three vertices all have their dominant skin weight on one of
/// `joints`, optionally restricted to the slab between two landmarks measured
/// along the plane normal.
struct SubmeshSelector {
  std::vector<int> joints;
  std::optional<std::pair<LandmarkRef, LandmarkRef>> slab;
};

struct MeasurementSpec {
  int index = 0;
  std::string name;
  MeasurementKind kind = MeasurementKind::kLengthEuclidean;
  // lengths
  LandmarkRef from;
  LandmarkRef to;
  // circumferences
  LandmarkRef plane_position;
  PlaneNormalSpec normal;
  SubmeshSelector submesh;

  bool isLength() const {
    return kind != MeasurementKind::kCircumference;
  }
};

inline constexpr int kNumStandardLengths = 23;
inline constexpr int kNumStandardCircumferences = 13;
inline constexpr int kNumStandardMeasurements = kNumStandardLengths + kNumStandardCircumferences;

/// Canonical names of the 36 measurements, in index order (lengths first).
const std::vector<std::string>& standardMeasurementNames();

/// Landmark names every standard measurement set refers to.
const std::vector<std::string>& standardLandmarkNames();

/// Joint sets used to restrict the mesh for each circumference.
struct BodyPartJoints {
  std::vector<int> torso_lower; // waist, hip
  std::vector<int> torso_upper; // chest
  std::vector<int> head;
  std::vector<int> neck;
  std::vector<int> upper_arm_l, upper_arm_r;
  std::vector<int> forearm_l, forearm_r;
  std::vector<int> thigh_l, thigh_r;
  std::vector<int> calf_l, calf_r;
};

/// The 23 length and 13 circumference definitions over the standard
/// landmark names. Only the submesh joint sets depend on the asset.
std::vector<MeasurementSpec> standardMeasurementSpecs(const BodyPartJoints& parts);

bool isStandardMeasurementSet(const std::vector<MeasurementSpec>& specs);

nlohmann::json toJson(const MeasurementSpec& spec);
MeasurementSpec measurementSpecFromJson(const nlohmann::json& j);

} // namespace anthrofit
