#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/types.h"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace anthrofit {

/// Frames x dims samples of one person.
struct PersonSeries {
  std::string person_id;
  Eigen::MatrixXd samples;
};

struct DispersionRow {
  std::string name;
  double sigma = 0.0; // report unit (cm for measurements)
  double rel_sigma_percent = 0.0;
  double rel_range_percent = 0.0;
};

struct StatsReport {
  std::string unit = "cm";
  std::vector<DispersionRow> rows;
  std::optional<double> beta_sigma_mean;
  int persons_covered = 0;
  int frames_covered = 0;
  /// Notes about suspicious input, e.g. zero-length bones.
  std::vector<std::string> flags;
};

struct AuditOptions {
  /// Factor from the sample unit to the report unit (mm -> cm by default).
  double to_report_unit = 0.1;
  /// Average left/right pairs into one row.
  bool merge_sides = true;
};

/// Per person and dimension: sigma (n-1), sigma/avg and (max-min)/avg. The
/// per-person values are averaged over persons; paired sides are averaged
/// afterwards. Throws TooFewSamples for a person with fewer than 2 frames.
StatsReport consistencyStats(
    const std::vector<std::string>& names,
    const std::vector<PersonSeries>& persons,
    const AuditOptions& options = {});

/// Mean over coefficients of the person-averaged sample deviation.
double betaSigmaMean(const std::vector<PersonSeries>& betas);

/// Row name with its side marker removed, or the name itself when it has none.
/// Recognizes "_left"/"_right", "_l"/"_r" suffixes and "left_"/"right_" prefixes.
std::string sideless(const std::string& name);

struct Bone {
  std::string name;
  int a = 0;
  int b = 0;
};

struct BoneLength {
  std::string name;
  double length_cm = 0.0;
  bool degenerate = false; // coincident end points
};

/// Euclidean bone lengths in cm from keypoints in meters. Throws
/// IndexOutOfRange for bones referring past the keypoint count.
std::vector<BoneLength> boneLengths(const Pointsd& keypoints, const std::vector<Bone>& skeleton);

/// One bone per non-root joint, named after the child joint.
std::vector<Bone> skeletonFromParents(const BodyModel& model);

/// Bone length samples (cm) of one person over frames; degenerate bones are
/// appended to `flags`.
PersonSeries boneLengthSeries(
    const std::string& personId,
    const std::vector<Pointsd>& frames,
    const std::vector<Bone>& skeleton,
    std::vector<std::string>* flags = nullptr);

/// Per-frame measurement or shape rows grouped by person.
struct AuditData {
  std::vector<std::string> names; // measurement columns
  std::vector<PersonSeries> measurements;
  std::vector<PersonSeries> betas;
};

/// CSV with a person column; columns named beta_<i> are shape coefficients,
/// every other column except frame_id is a measurement in mm. Without the
/// person column all rows belong to `defaultPerson`.
AuditData auditDataFromCsv(const std::string& text, const std::string& personColumn, const std::string& defaultPerson);

/// JSON lines with an optional person id and either "measurements" (name ->
/// mm) or "beta". Lines with a beta are measured on `body` when given.
/// Frames marked "present": false are skipped.
AuditData auditDataFromJsonLines(
    const std::vector<nlohmann::json>& lines,
    const std::string& personColumn,
    const std::string& defaultPerson,
    const BodyModel* body);

/// Measurement dispersion plus the beta summary when shapes are available.
StatsReport audit(const AuditData& data, const AuditOptions& options = {});

nlohmann::ordered_json toJson(const StatsReport& report);

/// Aligned text table: Measure, sigma, r. sigma, r. range; the beta summary
/// as a last row.
std::string formatTable(const StatsReport& report);

} // namespace anthrofit
