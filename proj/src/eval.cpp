#include "anthrofit/eval.h"

#include "anthrofit/error.h"
#include "anthrofit/model_core.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace anthrofit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void checkFrameIds(const std::vector<FramePoints>& pred, const std::vector<FramePoints>& gt) {
  ANTHROFIT_THROW_IF(
      pred.size() != gt.size(),
      ErrorCode::kFrameIdMismatch,
      std::to_string(pred.size()) + " predicted frames but " + std::to_string(gt.size()) + " ground-truth frames");
  for (size_t f = 0; f < pred.size(); ++f) {
    ANTHROFIT_THROW_IF(
        pred[f].frame_id != gt[f].frame_id,
        ErrorCode::kFrameIdMismatch,
        "frame " + std::to_string(f) + ": '" + pred[f].frame_id + "' vs '" + gt[f].frame_id + "'");
  }
}

/// Accumulates point errors and frame counts.
class ErrorFold {
 public:
  void absent() {
    ++total_;
  }
  void present() {
    ++total_;
    ++present_;
  }
  void add(double mm) {
    sum_ += mm;
    ++samples_;
  }
  ErrorMetric result() const {
    ErrorMetric m;
    m.total_frames = total_;
    m.present_frames = present_;
    m.samples = samples_;
    m.mean_mm = samples_ > 0 ? sum_ / samples_ : kNaN;
    m.no_result_percent = total_ > 0 ? 100.0 * (total_ - present_) / total_ : 0.0;
    return m;
  }

 private:
  double sum_ = 0.0;
  int samples_ = 0;
  int present_ = 0;
  int total_ = 0;
};

} // namespace

ErrorMetric mpjpe(const std::vector<FramePoints>& pred, const std::vector<FramePoints>& gt, int rootIndex) {
  checkFrameIds(pred, gt);
  ErrorFold fold;
  for (size_t f = 0; f < pred.size(); ++f) {
    if (!gt[f].present) {
      continue;
    }
    if (!pred[f].present) {
      fold.absent();
      continue;
    }
    const Pointsd& p = pred[f].points;
    const Pointsd& g = gt[f].points;
    ANTHROFIT_THROW_IF(
        p.rows() != g.rows(),
        ErrorCode::kKeypointCountMismatch,
        "frame '" + pred[f].frame_id + "': " + std::to_string(p.rows()) + " predicted vs " +
            std::to_string(g.rows()) + " ground-truth keypoints");
    ANTHROFIT_THROW_IF(
        rootIndex < 0 || rootIndex >= p.rows(), ErrorCode::kIndexOutOfRange, "root keypoint index out of range");
    ANTHROFIT_THROW_IF(
        !g.row(rootIndex).allFinite() || !p.row(rootIndex).allFinite(),
        ErrorCode::kNonFiniteInput,
        "frame '" + pred[f].frame_id + "' has no finite root keypoint");
    fold.present();
    const Eigen::RowVector3d pr = p.row(rootIndex);
    const Eigen::RowVector3d gr = g.row(rootIndex);
    for (Eigen::Index k = 0; k < p.rows(); ++k) {
      if (k == rootIndex || !g.row(k).allFinite()) {
        continue;
      }
      fold.add(1000.0 * ((p.row(k) - pr) - (g.row(k) - gr)).norm());
    }
  }
  return fold.result();
}

ErrorMetric mve(const std::vector<FramePoints>& pred, const std::vector<FramePoints>& gt) {
  checkFrameIds(pred, gt);
  ErrorFold fold;
  for (size_t f = 0; f < pred.size(); ++f) {
    if (!gt[f].present) {
      continue;
    }
    if (!pred[f].present) {
      fold.absent();
      continue;
    }
    const Pointsd& p = pred[f].points;
    const Pointsd& g = gt[f].points;
    ANTHROFIT_THROW_IF(
        p.rows() != g.rows(),
        ErrorCode::kTopologyMismatch,
        "frame '" + pred[f].frame_id + "': " + std::to_string(p.rows()) + " predicted vs " +
            std::to_string(g.rows()) + " ground-truth vertices");
    ANTHROFIT_THROW_IF(
        !pred[f].root || !gt[f].root,
        ErrorCode::kInvalidConfig,
        "frame '" + pred[f].frame_id + "' has vertices without a root point");
    fold.present();
    const Eigen::RowVector3d pr = pred[f].root->transpose();
    const Eigen::RowVector3d gr = gt[f].root->transpose();
    for (Eigen::Index v = 0; v < p.rows(); ++v) {
      fold.add(1000.0 * ((p.row(v) - pr) - (g.row(v) - gr)).norm());
    }
  }
  return fold.result();
}

std::vector<FramePoints> estimateKeypoints(
    const BodyModel& body,
    const std::vector<FrameEstimate>& estimates,
    const std::string& regressor) {
  const Eigen::MatrixXd& reg = body.regressor(regressor);
  std::vector<FramePoints> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) {
    FramePoints fp{e.frame_id, e.present, {}, std::nullopt};
    if (e.present) {
      fp.points = reg * forward(body, e.shape, e.pose).vertices;
    }
    out.push_back(std::move(fp));
  }
  return out;
}

std::vector<FramePoints> estimateVertices(const BodyModel& body, const std::vector<FrameEstimate>& estimates) {
  std::vector<FramePoints> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) {
    FramePoints fp{e.frame_id, e.present, {}, std::nullopt};
    if (e.present) {
      PosedMesh mesh = forward(body, e.shape, e.pose);
      fp.root = mesh.joints.row(0).transpose();
      fp.points = std::move(mesh.vertices);
    }
    out.push_back(std::move(fp));
  }
  return out;
}

std::vector<FramePoints> selectKeypoints(const std::vector<FramePoints>& frames, const std::vector<int>& indices) {
  std::vector<FramePoints> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    FramePoints s{f.frame_id, f.present, {}, f.root};
    if (f.present) {
      s.points.resize(static_cast<Eigen::Index>(indices.size()), 3);
      for (size_t i = 0; i < indices.size(); ++i) {
        ANTHROFIT_THROW_IF(
            indices[i] < 0 || indices[i] >= f.points.rows(),
            ErrorCode::kIndexOutOfRange,
            "keypoint selection index " + std::to_string(indices[i]) + " out of range");
        s.points.row(static_cast<Eigen::Index>(i)) = f.points.row(indices[i]);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

double median(std::vector<double> values) {
  ANTHROFIT_THROW_IF(values.empty(), ErrorCode::kNoPresentFrames, "median of no values");
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower == upper ? upper : 0.5 * (lower + upper);
}

std::string_view toString(ConsolidationStrategy s) {
  return s == ConsolidationStrategy::kMedianBeta ? "median_beta" : "median_measurements_a2b";
}

ConsolidationStrategy parseConsolidationStrategy(std::string_view name) {
  if (name == "median_beta") {
    return ConsolidationStrategy::kMedianBeta;
  }
  if (name == "median_measurements_a2b") {
    return ConsolidationStrategy::kMedianMeasurementsA2B;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown consolidation strategy '" + std::string(name) + "'");
}

namespace {

std::vector<const FrameEstimate*> presentFrames(const std::vector<FrameEstimate>& estimates) {
  std::vector<const FrameEstimate*> out;
  for (const auto& e : estimates) {
    if (e.present) {
      out.push_back(&e);
    }
  }
  ANTHROFIT_THROW_IF(out.empty(), ErrorCode::kNoPresentFrames, "no frame has an estimate");
  return out;
}

Eigen::VectorXd columnMedian(const std::vector<Eigen::VectorXd>& rows) {
  Eigen::VectorXd out(rows.front().size());
  for (Eigen::Index d = 0; d < out.size(); ++d) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) {
      ANTHROFIT_THROW_IF(r.size() != out.size(), ErrorCode::kDimensionMismatch, "frames differ in length");
      col.push_back(r(d));
    }
    out(d) = median(std::move(col));
  }
  return out;
}

} // namespace

AnthroVector medianMeasurements(const BodyModel& body, const std::vector<FrameEstimate>& estimates) {
  const auto frames = presentFrames(estimates);
  const Measurer measurer(body);
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(frames.size());
  for (const FrameEstimate* e : frames) {
    rows.push_back(measurer.b2a(e->shape.beta).values);
  }
  return AnthroVector{measurer.names(), columnMedian(rows)};
}

ShapeParams consolidateShape(
    const std::vector<FrameEstimate>& estimates,
    ConsolidationStrategy strategy,
    const BodyModel& body,
    const A2BModel* a2b) {
  if (strategy == ConsolidationStrategy::kMedianBeta) {
    std::vector<Eigen::VectorXd> rows;
    for (const FrameEstimate* e : presentFrames(estimates)) {
      rows.push_back(e->shape.beta);
    }
    return ShapeParams{columnMedian(rows)};
  }
  ANTHROFIT_THROW_IF(!a2b, ErrorCode::kInvalidConfig, "the median_measurements_a2b strategy needs an A2B model");
  return a2b->predict(medianMeasurements(body, estimates));
}

double bodyHeightSigmaCm(const BodyModel& body, const std::vector<FrameEstimate>& estimates) {
  const Measurer measurer(body);
  const auto& names = measurer.names();
  const auto it = std::find(names.begin(), names.end(), "height");
  ANTHROFIT_THROW_IF(it == names.end(), ErrorCode::kInvalidConfig, "the body model has no height measurement");
  const auto h = static_cast<Eigen::Index>(it - names.begin());
  std::vector<double> heights;
  const Eigen::VectorXd* last = nullptr;
  for (const auto& e : estimates) {
    if (!e.present) {
      continue;
    }
    if (last && last->size() == e.shape.beta.size() && *last == e.shape.beta) {
      heights.push_back(heights.back());
    } else {
      heights.push_back(measurer.b2a(e.shape.beta).values(h));
    }
    last = &e.shape.beta;
  }
  if (heights.size() < 2) {
    return kNaN;
  }
  const Eigen::Map<const Eigen::VectorXd> x(heights.data(), static_cast<Eigen::Index>(heights.size()));
  if (x.maxCoeff() == x.minCoeff()) {
    return 0.0;
  }
  const double avg = x.mean();
  return 0.1 * std::sqrt((x.array() - avg).square().sum() / static_cast<double>(x.size() - 1));
}

std::string_view toString(MeasurementSource s) {
  return s == MeasurementSource::kPseudoGt ? "pseudo_gt" : "model_median";
}

MeasurementSource parseMeasurementSource(std::string_view name) {
  if (name == "pseudo_gt") {
    return MeasurementSource::kPseudoGt;
  }
  if (name == "model_median" || name == "model") {
    return MeasurementSource::kModelMedian;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown measurement source '" + std::string(name) + "'");
}

namespace {

struct Column {
  std::string label;
  enum { kOrig, kMedian, kFixed, kA2B } kind = kOrig;
  A2BKind a2b = A2BKind::kNn;
  bool gendered = false;
};

Column parseColumn(const std::string& label) {
  Column c;
  c.label = label;
  if (label == "orig") {
    c.kind = Column::kOrig;
  } else if (label == "median") {
    c.kind = Column::kMedian;
  } else if (label == "fixed") {
    c.kind = Column::kFixed;
  } else {
    const auto us = label.find('_');
    const std::string suffix = us == std::string::npos ? "" : label.substr(us + 1);
    ANTHROFIT_THROW_IF(
        us == std::string::npos || (suffix != "g" && suffix != "n"),
        ErrorCode::kInvalidConfig,
        "unknown shape column '" + label + "'");
    c.kind = Column::kA2B;
    c.a2b = parseA2BKind(label.substr(0, us));
    c.gendered = suffix == "g";
  }
  return c;
}

const A2BModel& findA2B(const ExperimentModels& models, A2BKind kind, Gender gender) {
  for (const A2BModel* m : models.a2b) {
    if (m && m->kind == kind && m->gender == gender) {
      return *m;
    }
  }
  throw Error(
      ErrorCode::kInvalidConfig,
      "no " + std::string(toString(kind)) + " A2B model for gender " + std::string(toString(gender)));
}

const BodyModel& bodyFor(const ExperimentModels& models, Gender gender) {
  if (gender == Gender::kNeutral) {
    return *models.neutral;
  }
  const auto it = models.gendered.find(gender);
  ANTHROFIT_THROW_IF(
      it == models.gendered.end() || !it->second,
      ErrorCode::kInvalidConfig,
      "no body model for gender " + std::string(toString(gender)));
  return *it->second;
}

std::vector<FrameEstimate> withShape(const std::vector<FrameEstimate>& estimates, const ShapeParams& shape) {
  std::vector<FrameEstimate> out = estimates;
  for (auto& e : out) {
    if (e.present) {
      e.shape = shape;
    }
  }
  return out;
}

double meanDefined(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (const double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n > 0 ? sum / n : kNaN;
}

} // namespace

std::vector<MetricReport> runReplacementExperiment(
    const std::vector<ExperimentSequence>& sequences,
    const ExperimentModels& models,
    const ReplacementConfig& cfg) {
  ANTHROFIT_THROW_IF(!models.neutral, ErrorCode::kInvalidConfig, "the experiment needs the estimates' body model");
  ANTHROFIT_THROW_IF(sequences.empty(), ErrorCode::kInvalidConfig, "the experiment has no sequences");
  std::vector<Column> columns;
  for (const auto& label : cfg.columns) {
    columns.push_back(parseColumn(label));
  }
  // Validate the whole matrix before computing anything.
  for (const auto& col : columns) {
    for (const auto& seq : sequences) {
      ANTHROFIT_THROW_IF(
          col.kind == Column::kFixed && !seq.fixed_shape,
          ErrorCode::kInvalidConfig,
          "sequence '" + seq.name + "' has no fixed shape");
      if (col.kind == Column::kA2B) {
        const Gender g = col.gendered ? seq.gender : Gender::kNeutral;
        ANTHROFIT_THROW_IF(
            col.gendered && g == Gender::kNeutral,
            ErrorCode::kInvalidConfig,
            "sequence '" + seq.name + "' has no subject gender for column '" + col.label + "'");
        findA2B(models, col.a2b, g);
        bodyFor(models, g);
        ANTHROFIT_THROW_IF(
            cfg.source == MeasurementSource::kPseudoGt && !seq.pseudo_gt,
            ErrorCode::kInvalidConfig,
            "sequence '" + seq.name + "' has no pseudo ground-truth measurements");
      }
      ANTHROFIT_THROW_IF(
          cfg.mode == RefitMode::kRefit && col.kind != Column::kOrig &&
              seq.refit_targets.size() != seq.estimates.size(),
          ErrorCode::kInvalidConfig,
          "sequence '" + seq.name + "' needs one refit target frame per estimate");
    }
  }

  std::vector<MetricReport> table;
  for (const auto& col : columns) {
    MetricReport report;
    report.label = col.label;
    double sum = 0.0;
    int samples = 0;
    double mveSum = 0.0;
    int mveSamples = 0;
    int present = 0;
    int total = 0;
    std::vector<double> heightSigmas;
    for (const auto& seq : sequences) {
      const BodyModel* body = models.neutral;
      std::vector<FrameEstimate> est;
      if (col.kind == Column::kOrig) {
        est = seq.estimates;
      } else {
        ShapeParams shape;
        if (col.kind == Column::kMedian) {
          shape = consolidateShape(seq.estimates, ConsolidationStrategy::kMedianBeta, *models.neutral);
        } else if (col.kind == Column::kFixed) {
          shape = *seq.fixed_shape;
        } else {
          const Gender g = col.gendered ? seq.gender : Gender::kNeutral;
          body = &bodyFor(models, g);
          const A2BModel& a2b = findA2B(models, col.a2b, g);
          const AnthroVector a = cfg.source == MeasurementSource::kPseudoGt
              ? *seq.pseudo_gt
              : medianMeasurements(*models.neutral, seq.estimates);
          shape = a2b.predict(a);
        }
        if (cfg.mode == RefitMode::kRefit) {
          IKConfig ik = cfg.ik;
          ik.refit_mode = RefitMode::kRefit;
          est = refitWithFixedShape(*body, seq.refit_targets, shape, ik, seq.estimates);
        } else {
          est = withShape(seq.estimates, shape);
        }
      }

      SequenceMetrics sm;
      sm.name = seq.name;
      auto kp = estimateKeypoints(*body, est, cfg.regressor);
      auto gt = seq.gt_keypoints;
      if (!cfg.selection.empty()) {
        kp = selectKeypoints(kp, cfg.selection);
        gt = selectKeypoints(gt, cfg.selection);
      }
      sm.mpjpe = mpjpe(kp, gt, cfg.root_index);
      if (!seq.gt_vertices.empty()) {
        sm.mve = mve(estimateVertices(*body, est), seq.gt_vertices);
        if (sm.mve->samples > 0) {
          mveSum += sm.mve->mean_mm * sm.mve->samples;
          mveSamples += sm.mve->samples;
        }
      }
      sm.body_height_sigma_cm = bodyHeightSigmaCm(*body, est);
      if (sm.mpjpe.samples > 0) {
        sum += sm.mpjpe.mean_mm * sm.mpjpe.samples;
        samples += sm.mpjpe.samples;
      }
      present += sm.mpjpe.present_frames;
      total += sm.mpjpe.total_frames;
      heightSigmas.push_back(sm.body_height_sigma_cm);
      report.sequences.push_back(std::move(sm));
    }
    report.mpjpe_mm = samples > 0 ? sum / samples : kNaN;
    if (mveSamples > 0) {
      report.mve_mm = mveSum / mveSamples;
    }
    report.no_result_percent = total > 0 ? 100.0 * (total - present) / total : 0.0;
    report.body_height_sigma_cm = meanDefined(heightSigmas);
    table.push_back(std::move(report));
  }
  return table;
}

nlohmann::ordered_json toJson(const ErrorMetric& m) {
  nlohmann::ordered_json j;
  j["mean_mm"] = m.mean_mm;
  j["no_result_percent"] = m.no_result_percent;
  j["present_frames"] = m.present_frames;
  j["total_frames"] = m.total_frames;
  return j;
}

nlohmann::ordered_json toJson(const std::vector<MetricReport>& table) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : table) {
    nlohmann::ordered_json row;
    row["label"] = r.label;
    row["mpjpe_mm"] = r.mpjpe_mm;
    row["mve_mm"] = r.mve_mm ? nlohmann::ordered_json(*r.mve_mm) : nullptr;
    row["no_result_percent"] = r.no_result_percent;
    row["body_height_sigma_cm"] = r.body_height_sigma_cm;
    auto seqs = nlohmann::ordered_json::array();
    for (const auto& s : r.sequences) {
      nlohmann::ordered_json sj;
      sj["name"] = s.name;
      sj["mpjpe_mm"] = s.mpjpe.mean_mm;
      sj["mve_mm"] = s.mve ? nlohmann::ordered_json(s.mve->mean_mm) : nullptr;
      sj["no_result_percent"] = s.mpjpe.no_result_percent;
      sj["present_frames"] = s.mpjpe.present_frames;
      sj["total_frames"] = s.mpjpe.total_frames;
      sj["body_height_sigma_cm"] = s.body_height_sigma_cm;
      seqs.push_back(std::move(sj));
    }
    row["sequences"] = std::move(seqs);
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["rows"] = std::move(rows);
  return j;
}

namespace {

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) {
    return "-";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

} // namespace

std::string formatTable(const std::vector<MetricReport>& table) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"shape", "MPJPE", "MVE", "height sigma", "no r."});
  for (const auto& r : table) {
    cells.push_back(
        {r.label,
         fixed(r.mpjpe_mm, 1),
         r.mve_mm ? fixed(*r.mve_mm, 1) : "-",
         fixed(r.body_height_sigma_cm, 1),
         fixed(r.no_result_percent, 2) + "%"});
  }
  std::array<size_t, 5> width{};
  for (const auto& row : cells) {
    for (size_t c = 0; c < 5; ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line = row[0] + std::string(width[0] - row[0].size(), ' ');
    for (size_t c = 1; c < 5; ++c) {
      line += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
    }
    out += line + "\n";
  }
  return out;
}

namespace {

std::string frameId(const nlohmann::json& j) {
  ANTHROFIT_THROW_IF(!j.contains("frame_id"), ErrorCode::kParseError, "frame without frame_id");
  const auto& id = j["frame_id"];
  return id.is_string() ? id.get<std::string>() : id.dump();
}

Pointsd pointsFromJson(const nlohmann::json& arr) {
  Pointsd p(static_cast<Eigen::Index>(arr.size()), 3);
  for (size_t i = 0; i < arr.size(); ++i) {
    ANTHROFIT_THROW_IF(arr[i].size() != 3, ErrorCode::kParseError, "points must be [x, y, z] triples");
    for (int c = 0; c < 3; ++c) {
      const auto& v = arr[i][static_cast<size_t>(c)];
      p(static_cast<Eigen::Index>(i), c) = v.is_null() ? kNaN : v.get<double>();
    }
  }
  return p;
}

std::vector<FramePoints> framesFromJson(const std::vector<nlohmann::json>& lines, const char* key, bool needRoot) {
  std::vector<FramePoints> out;
  try {
    for (const auto& j : lines) {
      FramePoints f;
      f.frame_id = frameId(j);
      f.present = j.value("present", true) && j.contains(key) && !j[key].is_null();
      if (f.present) {
        f.points = pointsFromJson(j[key]);
        if (j.contains("root") && j["root"].is_array()) {
          const auto r = j["root"].get<std::vector<double>>();
          ANTHROFIT_THROW_IF(r.size() != 3, ErrorCode::kParseError, "root must have 3 entries");
          f.root = Vector3d(r[0], r[1], r[2]);
        }
        ANTHROFIT_THROW_IF(
            needRoot && !f.root, ErrorCode::kParseError, "vertex frame '" + f.frame_id + "' has no root");
      }
      out.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed frame: ") + e.what());
  }
  return out;
}

} // namespace

std::vector<FramePoints> keypointFramesFromJson(const std::vector<nlohmann::json>& lines) {
  return framesFromJson(lines, "keypoints", false);
}

std::vector<FramePoints> vertexFramesFromJson(const std::vector<nlohmann::json>& lines) {
  return framesFromJson(lines, "vertices", true);
}

} // namespace anthrofit
