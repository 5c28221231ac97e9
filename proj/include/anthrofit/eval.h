#pragma once

#include "anthrofit/a2b.h"
#include "anthrofit/body_model.h"
#include "anthrofit/ik.h"
#include "anthrofit/measure.h"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace anthrofit {

/// Per-frame body estimate, in the same JSON-lines format the IK writes.
using FrameEstimate = IKResult;

/// Points of one frame in meters. `root` is the alignment point for vertex
/// sets; keypoint sets align at a keypoint index instead.
struct FramePoints {
  std::string frame_id;
  bool present = true;
  Pointsd points;
  std::optional<Vector3d> root;
};

struct ErrorMetric {
  double mean_mm = 0.0; // NaN when no frame is present
  double no_result_percent = 0.0;
  int present_frames = 0;
  int total_frames = 0;
  int samples = 0; // point errors averaged
};

/// Mean joint position error over present frames after aligning both sides
/// at keypoint `rootIndex`. The root itself is left out of the mean, and
/// ground-truth keypoints with NaN coordinates are skipped.
/// Throws FrameIdMismatch or KeypointCountMismatch.
ErrorMetric mpjpe(const std::vector<FramePoints>& pred, const std::vector<FramePoints>& gt, int rootIndex = 0);

/// Mean vertex error over present frames after aligning each mesh at its
/// `root`. Throws TopologyMismatch when vertex counts differ.
ErrorMetric mve(const std::vector<FramePoints>& pred, const std::vector<FramePoints>& gt);

/// Regressed keypoints of every estimate (absent frames stay absent).
std::vector<FramePoints> estimateKeypoints(
    const BodyModel& body,
    const std::vector<FrameEstimate>& estimates,
    const std::string& regressor);

/// Posed vertices rooted at the pelvis joint.
std::vector<FramePoints> estimateVertices(const BodyModel& body, const std::vector<FrameEstimate>& estimates);

/// Keeps the listed keypoint rows.
std::vector<FramePoints> selectKeypoints(const std::vector<FramePoints>& frames, const std::vector<int>& indices);

/// Middle value; the mean of the two middle values for an even count.
double median(std::vector<double> values);

enum class ConsolidationStrategy { kMedianBeta, kMedianMeasurementsA2B };

std::string_view toString(ConsolidationStrategy s);
ConsolidationStrategy parseConsolidationStrategy(std::string_view name);

/// Coordinate-wise median of the measurements of every present frame.
AnthroVector medianMeasurements(const BodyModel& body, const std::vector<FrameEstimate>& estimates);

/// One shape for a whole sequence. Throws NoPresentFrames; the A2B strategy
/// needs `a2b`.
ShapeParams consolidateShape(
    const std::vector<FrameEstimate>& estimates,
    ConsolidationStrategy strategy,
    const BodyModel& body,
    const A2BModel* a2b = nullptr);

/// Sample deviation (n-1) of the body height over present frames, in cm.
/// NaN with fewer than two present frames.
double bodyHeightSigmaCm(const BodyModel& body, const std::vector<FrameEstimate>& estimates);

struct SequenceMetrics {
  std::string name;
  ErrorMetric mpjpe;
  std::optional<ErrorMetric> mve;
  double body_height_sigma_cm = 0.0;
};

struct MetricReport {
  std::string label;
  double mpjpe_mm = 0.0;
  std::optional<double> mve_mm;
  double no_result_percent = 0.0;
  double body_height_sigma_cm = 0.0; // mean over sequences
  std::vector<SequenceMetrics> sequences;
};

struct ExperimentSequence {
  std::string name;
  Gender gender = Gender::kNeutral; // subject gender for the gendered columns
  std::vector<FrameEstimate> estimates; // pose source, on the neutral body
  std::vector<FramePoints> gt_keypoints;
  std::vector<FramePoints> gt_vertices; // empty: no MVE
  std::optional<AnthroVector> pseudo_gt;
  std::optional<ShapeParams> fixed_shape;
  std::vector<FrameTargets> refit_targets; // refit mode only
};

enum class MeasurementSource { kPseudoGt, kModelMedian };

std::string_view toString(MeasurementSource s);
MeasurementSource parseMeasurementSource(std::string_view name);

struct ExperimentModels {
  const BodyModel* neutral = nullptr;
  std::map<Gender, const BodyModel*> gendered;
  std::vector<const A2BModel*> a2b; // looked up by (kind, gender)
};

struct ReplacementConfig {
  /// Shape columns: orig, median, fixed, nn_g, svr_g, nn_n, svr_n.
  std::vector<std::string> columns = {"orig", "median"};
  MeasurementSource source = MeasurementSource::kPseudoGt;
  RefitMode mode = RefitMode::kSwapOnly;
  IKConfig ik;
  std::string regressor = "joint_regressor";
  int root_index = 0;
  std::vector<int> selection; // empty: all keypoints
};

/// Replaces the per-frame shapes of every sequence by each column's shape
/// and reports MPJPE, MVE, no-result rate and body-height deviation.
std::vector<MetricReport> runReplacementExperiment(
    const std::vector<ExperimentSequence>& sequences,
    const ExperimentModels& models,
    const ReplacementConfig& cfg);

nlohmann::ordered_json toJson(const ErrorMetric& m);
nlohmann::ordered_json toJson(const std::vector<MetricReport>& table);
std::string formatTable(const std::vector<MetricReport>& table);

/// {frame_id, keypoints, present?, vertices?} lines.
std::vector<FramePoints> keypointFramesFromJson(const std::vector<nlohmann::json>& lines);
std::vector<FramePoints> vertexFramesFromJson(const std::vector<nlohmann::json>& lines);

} // namespace anthrofit
