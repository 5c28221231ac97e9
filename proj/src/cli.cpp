#include "anthrofit/cli.h"

#include "anthrofit/a2b.h"
#include "anthrofit/audit.h"
#include "anthrofit/body_model.h"
#include "anthrofit/error.h"
#include "anthrofit/eval.h"
#include "anthrofit/ik.h"
#include "anthrofit/io.h"
#include "anthrofit/measure.h"
#include "anthrofit/sampling.h"
#include "anthrofit/toy_assets.h"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

namespace anthrofit::cli {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string format;
  int threads = 1;
  uint64_t seed = 0;
  std::string out;
  bool verbose = false;
};

/// Writes to --out or to the result stream.
void emit(const Globals& g, std::ostream& out, const std::string& text) {
  if (g.out.empty()) {
    out << text;
  } else {
    writeText(g.out, text);
  }
}

std::string formatOr(const Globals& g, const std::string& fallback) {
  return g.format.empty() ? fallback : g.format;
}

std::string dumpJson(const nlohmann::ordered_json& j) {
  return j.dump(2) + "\n";
}

std::vector<double> parseList(const std::string& text) {
  std::vector<double> out;
  std::string cell;
  std::istringstream is(text);
  while (std::getline(is, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t"));
    cell.erase(cell.find_last_not_of(" \t") + 1);
    out.push_back(parseNumber(cell));
  }
  return out;
}

std::vector<int> parseIntList(const std::string& text) {
  std::vector<int> out;
  for (const double v : parseList(text)) {
    ANTHROFIT_THROW_IF(v != static_cast<int>(v), ErrorCode::kParseError, "expected integers in '" + text + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> splitNames(const std::string& text) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(text);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty()) {
      out.push_back(cell);
    }
  }
  return out;
}

Eigen::VectorXd toVector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> toStd(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

bool isCsv(const std::string& path) {
  return fs::path(path).extension() == ".csv";
}

/// Rows of beta_<i> columns from a CSV file, or "beta" arrays from JSON lines.
Eigen::MatrixXd readBetas(const std::string& path) {
  std::vector<std::vector<double>> rows;
  if (isCsv(path)) {
    const CsvTable t = parseCsv(readText(path));
    std::vector<int> cols;
    for (int b = 0;; ++b) {
      const int c = t.column("beta_" + std::to_string(b));
      if (c < 0) {
        break;
      }
      cols.push_back(c);
    }
    ANTHROFIT_THROW_IF(cols.empty(), ErrorCode::kParseError, path + " has no beta_0 column");
    for (const auto& r : t.rows) {
      std::vector<double> row;
      for (const int c : cols) {
        row.push_back(parseNumber(r[c]));
      }
      rows.push_back(std::move(row));
    }
  } else {
    for (const auto& j : readJsonLines(path)) {
      ANTHROFIT_THROW_IF(!j.contains("beta"), ErrorCode::kParseError, path + ": line without beta");
      rows.push_back(j["beta"].get<std::vector<double>>());
    }
  }
  ANTHROFIT_THROW_IF(rows.empty(), ErrorCode::kParseError, path + " holds no shapes");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    ANTHROFIT_THROW_IF(rows[i].size() != rows.front().size(), ErrorCode::kDimensionMismatch, "shapes differ in length");
    m.row(static_cast<Eigen::Index>(i)) = toVector(rows[i]).transpose();
  }
  return m;
}

std::string betaCsv(const Eigen::MatrixXd& betas) {
  Dataset d;
  d.measurements.resize(betas.rows(), 0);
  d.betas = betas;
  return datasetToCsv(d);
}

nlohmann::ordered_json betaJson(const ShapeParams& s) {
  nlohmann::ordered_json j;
  j["beta"] = toStd(s.beta);
  return j;
}

std::string anthroTable(const AnthroVector& a) {
  size_t width = 0;
  for (const auto& n : a.names) {
    width = std::max(width, n.size());
  }
  std::string out;
  for (size_t i = 0; i < a.names.size(); ++i) {
    out += a.names[i] + std::string(width - a.names[i].size() + 2, ' ') +
        formatNumber(a.values(static_cast<Eigen::Index>(i))) + "\n";
  }
  return out;
}

std::string anthroOutput(const std::vector<AnthroVector>& rows, const std::string& format) {
  if (format == "csv") {
    std::string out = csvHeader(rows.front()) + "\n";
    for (const auto& a : rows) {
      out += csvRow(a) + "\n";
    }
    return out;
  }
  if (format == "table") {
    std::string out;
    for (size_t i = 0; i < rows.size(); ++i) {
      out += (i ? "\n" : "") + anthroTable(rows[i]);
    }
    return out;
  }
  if (rows.size() == 1) {
    return dumpJson(toJson(rows.front()));
  }
  auto arr = nlohmann::ordered_json::array();
  for (const auto& a : rows) {
    arr.push_back(toJson(a));
  }
  return dumpJson(arr);
}

ShapeDistribution readDistribution(const std::string& path) {
  return distributionFromJson(readJson(path));
}

// ---------------------------------------------------------------- measure

struct MeasureArgs {
  std::string body;
  std::string beta;
  std::string betas;
};

void runMeasure(const Globals& g, const MeasureArgs& a, std::ostream& out) {
  const BodyModel body = loadModel(a.body);
  const Measurer measurer(body);
  std::vector<AnthroVector> rows;
  if (!a.betas.empty()) {
    const Eigen::MatrixXd betas = readBetas(a.betas);
    for (Eigen::Index i = 0; i < betas.rows(); ++i) {
      rows.push_back(measurer.b2a(betas.row(i).transpose()));
    }
  } else {
    const Eigen::VectorXd beta =
        a.beta.empty() ? Eigen::VectorXd::Zero(body.beta_dim) : toVector(parseList(a.beta));
    rows.push_back(b2a(body, ShapeParams{beta}));
  }
  emit(g, out, anthroOutput(rows, formatOr(g, "json")));
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string dist;
  std::string corpus;
  std::string kind = "normal";
  double alpha = 1.0;
  int count = 1;
  std::string body;
  std::string write_dist;
};

void runSample(const Globals& g, const SampleArgs& a, std::ostream& out) {
  SampleConfig cfg;
  cfg.kind = parseSampleKind(a.kind);
  cfg.alpha = a.alpha;
  cfg.count = a.count;
  cfg.seed = g.seed;
  ANTHROFIT_THROW_IF(
      a.dist.empty() && a.corpus.empty(), ErrorCode::kInvalidConfig, "sample needs --dist or --corpus");
  std::optional<Eigen::MatrixXd> corpus;
  if (!a.corpus.empty()) {
    corpus = readBetas(a.corpus);
  }
  const ShapeDistribution dist = a.dist.empty() ? fitDistribution(*corpus) : readDistribution(a.dist);
  if (!a.write_dist.empty()) {
    writeText(a.write_dist, dumpJson(toJson(dist)));
  }
  Eigen::MatrixXd betas;
  if (cfg.kind == SampleKind::kCorpus) {
    ANTHROFIT_THROW_IF(!corpus, ErrorCode::kInvalidConfig, "corpus sampling needs --corpus");
    betas = sampleCorpus(*corpus, cfg);
  } else {
    betas = sampleShapes(dist, cfg);
  }
  Dataset data;
  if (!a.body.empty()) {
    data = measureShapes(loadModel(a.body), betas, g.threads);
  } else {
    data.measurements.resize(betas.rows(), 0);
    data.betas = betas;
  }
  if (formatOr(g, "csv") == "json") {
    nlohmann::ordered_json j;
    j["names"] = data.names;
    auto m = nlohmann::ordered_json::array();
    auto b = nlohmann::ordered_json::array();
    for (int i = 0; i < data.size(); ++i) {
      m.push_back(toStd(data.measurements.row(i).transpose()));
      b.push_back(toStd(data.betas.row(i).transpose()));
    }
    j["measurements"] = std::move(m);
    j["betas"] = std::move(b);
    emit(g, out, dumpJson(j));
  } else {
    emit(g, out, datasetToCsv(data));
  }
}

// ---------------------------------------------------------------- a2b

struct A2BArgs {
  // train
  std::string kind;
  std::string body;
  std::string dist;
  std::string model;
  std::string sample_kind = "uniform";
  double alpha = 1.5;
  int iterations = 50000;
  int batch = 256;
  double lr = 1e-3;
  double lr_final = 0.0;
  std::string hidden = "330,330,330";
  int warmup = 2048;
  int samples = 10000;
  double C = 3791.0;
  double epsilon = 0.012;
  double gamma = 0.0;
  double tol = 1e-3;
  // eval
  int count = 500;
  // predict
  std::string measurements;
  // convert-gender
  std::string body_src;
  std::string body_tgt;
  std::string beta;
};

void runA2BTrain(const Globals& g, const A2BArgs& a, std::ostream& out, std::ostream& err) {
  ANTHROFIT_THROW_IF(a.model.empty(), ErrorCode::kInvalidConfig, "a2b train needs --model for the output file");
  const BodyModel body = loadModel(a.body);
  const ShapeDistribution dist = readDistribution(a.dist);
  A2BModel model;
  if (parseA2BKind(a.kind) == A2BKind::kNn) {
    NnTrainConfig cfg;
    cfg.hidden.clear();
    for (const int h : parseIntList(a.hidden)) {
      cfg.hidden.push_back(h);
    }
    cfg.iterations = a.iterations;
    cfg.batch = a.batch;
    cfg.lr = a.lr;
    cfg.lr_final = a.lr_final;
    cfg.warmup = a.warmup;
    cfg.sample_kind = parseSampleKind(a.sample_kind);
    cfg.alpha = a.alpha;
    cfg.seed = g.seed;
    if (g.verbose) {
      cfg.progress = [&err](int it, double loss) { err << "iteration " << it << " loss " << loss << "\n"; };
    }
    model = trainNn(body, dist, cfg);
  } else {
    SampleConfig sc;
    sc.kind = parseSampleKind(a.sample_kind);
    sc.alpha = a.alpha;
    sc.count = a.samples;
    sc.seed = g.seed;
    const Dataset data = generateDataset(body, dist, sc, g.threads);
    SvrConfig cfg;
    cfg.C = a.C;
    cfg.epsilon = a.epsilon;
    cfg.gamma = a.gamma;
    cfg.tol = a.tol;
    model = trainSvr(data, cfg, body.gender);
  }
  saveA2B(a.model, model);
  nlohmann::ordered_json j;
  j["model"] = a.model;
  j["kind"] = toString(model.kind);
  j["gender"] = toString(model.gender);
  j["beta_dim"] = model.beta_dim;
  j["training"] = model.training;
  emit(g, out, dumpJson(j));
}

void runA2BEval(const Globals& g, const A2BArgs& a, std::ostream& out) {
  const A2BModel model = loadA2B(a.model);
  const BodyModel body = loadModel(a.body);
  SampleConfig sc;
  sc.kind = parseSampleKind(a.sample_kind);
  sc.alpha = a.alpha;
  sc.count = a.count;
  sc.seed = g.seed;
  const Eigen::MatrixXd test = sampleShapes(readDistribution(a.dist), sc);
  const A2BEvalReport report = evaluate(model, body, test, g.threads);
  const std::string format = formatOr(g, "json");
  if (format == "table") {
    std::string text = "samples          " + std::to_string(report.count) + "\n";
    text += "beta MSE (1e-3)  " + formatNumber(report.betaMseE3()) + "\n";
    text += "anthro MAE (mm)  " + formatNumber(report.anthro_mae_mm) + "\n";
    text += "\n" + anthroTable(AnthroVector{report.names, report.per_measurement_mae_mm});
    emit(g, out, text);
  } else {
    emit(g, out, dumpJson(toJson(report)));
  }
}

void emitShape(const Globals& g, std::ostream& out, const ShapeParams& s) {
  if (formatOr(g, "json") == "csv") {
    emit(g, out, betaCsv(s.beta.transpose()));
  } else {
    emit(g, out, dumpJson(betaJson(s)));
  }
}

void runA2BPredict(const Globals& g, const A2BArgs& a, std::ostream& out) {
  const A2BModel model = loadA2B(a.model);
  const AnthroVector m = anthroFromJson(readJson(a.measurements), model.measurement_names);
  emitShape(g, out, model.predict(m));
}

void runA2BConvert(const Globals& g, const A2BArgs& a, std::ostream& out) {
  const A2BModel model = loadA2B(a.model);
  const BodyModel src = loadModel(a.body_src);
  const BodyModel tgt = loadModel(a.body_tgt);
  const Eigen::VectorXd beta = a.beta.empty() ? Eigen::VectorXd::Zero(src.beta_dim) : toVector(parseList(a.beta));
  emitShape(g, out, convertGender(ShapeParams{beta}, src, tgt, model));
}

// ---------------------------------------------------------------- ik

struct IkArgs {
  std::string body;
  std::string frames;
  std::string regressor = "joint_regressor";
  std::string optimizer = "lm";
  int max_iters = 300;
  std::string prior = "gaussian_pose";
  double lambda_joint = 10.0;
  double lambda_prior = 0.0007;
  double lambda_beta = 0.01;
  bool no_mask = false;
  std::string mode = "refit";
  std::string previous;
  std::string fixed_shape;
  CLI::Option* fixed_shape_opt = nullptr;
};

IKConfig ikConfig(const IkArgs& a) {
  IKConfig cfg;
  cfg.optimizer = parseOptimizer(a.optimizer);
  cfg.max_iters = a.max_iters;
  cfg.prior = parsePriorKind(a.prior);
  ANTHROFIT_THROW_IF(
      cfg.prior == PriorKind::kExternal, ErrorCode::kInvalidConfig, "external priors are library-only");
  cfg.lambda_joint = a.lambda_joint;
  cfg.lambda_prior = a.lambda_prior;
  cfg.lambda_beta = a.lambda_beta;
  cfg.use_mask = !a.no_mask;
  cfg.refit_mode = parseRefitMode(a.mode);
  return cfg;
}

std::vector<FrameTargets> readFrames(const std::string& path, const std::string& regressor) {
  std::vector<FrameTargets> frames;
  for (const auto& j : readJsonLines(path)) {
    frames.push_back(frameTargetsFromJson(j, regressor));
  }
  return frames;
}

std::vector<IKResult> readResults(const std::string& path, int numJoints) {
  std::vector<IKResult> out;
  for (const auto& j : readJsonLines(path)) {
    out.push_back(ikResultFromJson(j, numJoints));
  }
  return out;
}

std::string resultLines(const std::vector<IKResult>& results) {
  std::string text;
  for (const auto& r : results) {
    text += toJson(r).dump() + "\n";
  }
  return text;
}

void runIk(const Globals& g, const IkArgs& a, std::ostream& out) {
  const BodyModel body = loadModel(a.body);
  const IKConfig cfg = ikConfig(a);
  const auto frames = readFrames(a.frames, a.regressor);
  const bool fixed = a.fixed_shape_opt && a.fixed_shape_opt->count() > 0;
  if (!fixed) {
    emit(g, out, resultLines(fitSequence(body, frames, cfg)));
    return;
  }
  std::vector<IKResult> previous;
  if (!a.previous.empty()) {
    previous = readResults(a.previous, body.numJoints());
  }
  ShapeParams shape;
  if (a.fixed_shape.empty()) {
    // No shape given: one free fit, then the per-coordinate median shape.
    if (previous.empty()) {
      previous = fitSequence(body, frames, cfg);
    }
    shape = consolidateShape(previous, ConsolidationStrategy::kMedianBeta, body);
  } else {
    shape.beta = toVector(parseList(a.fixed_shape));
  }
  if (cfg.refit_mode == RefitMode::kSwapOnly && previous.empty()) {
    previous = fitSequence(body, frames, cfg);
  }
  emit(g, out, resultLines(refitWithFixedShape(body, frames, shape, cfg, previous)));
}

// ---------------------------------------------------------------- pseudo-gt

void runPseudoGt(const Globals& g, const IkArgs& a, std::ostream& out) {
  const BodyModel body = loadModel(a.body);
  const auto results = fitSequence(body, readFrames(a.frames, a.regressor), ikConfig(a));
  const AnthroVector m = medianMeasurements(body, results);
  emit(g, out, anthroOutput({m}, formatOr(g, "json")));
}

// ---------------------------------------------------------------- audit

struct AuditArgs {
  std::string in;
  std::string body;
  std::string person_column = "person_id";
  std::string person = "all";
  std::string persons;
  bool bones = false;
  std::string skeleton;
  bool no_merge = false;
};

std::vector<PersonSeries> keepPersons(std::vector<PersonSeries> series, const std::set<std::string>& keep) {
  if (keep.empty()) {
    return series;
  }
  std::vector<PersonSeries> out;
  for (auto& s : series) {
    if (keep.count(s.person_id)) {
      out.push_back(std::move(s));
    }
  }
  return out;
}

void runAudit(const Globals& g, const AuditArgs& a, std::ostream& out) {
  std::optional<BodyModel> body;
  if (!a.body.empty()) {
    body = loadModel(a.body);
  }
  const auto names = splitNames(a.persons);
  const std::set<std::string> keep(names.begin(), names.end());
  AuditOptions options;
  options.merge_sides = !a.no_merge;
  StatsReport report;
  if (a.bones) {
    std::vector<Bone> skeleton;
    if (!a.skeleton.empty()) {
      for (const auto& b : readJson(a.skeleton)) {
        skeleton.push_back({b.at(0).get<std::string>(), b.at(1).get<int>(), b.at(2).get<int>()});
      }
    } else {
      ANTHROFIT_THROW_IF(!body, ErrorCode::kInvalidConfig, "bone audit needs --skeleton or --body");
      skeleton = skeletonFromParents(*body);
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<Pointsd>> frames;
    for (const auto& line : readJsonLines(a.in)) {
      if (!line.value("present", true)) {
        continue;
      }
      const std::string person = line.contains(a.person_column)
          ? (line[a.person_column].is_string() ? line[a.person_column].get<std::string>()
                                               : line[a.person_column].dump())
          : a.person;
      if (!frames.count(person)) {
        order.push_back(person);
      }
      frames[person].push_back(keypointFramesFromJson({line}).front().points);
    }
    std::vector<PersonSeries> series;
    std::vector<std::string> flags;
    for (const auto& p : order) {
      series.push_back(boneLengthSeries(p, frames[p], skeleton, &flags));
    }
    std::vector<std::string> boneNames;
    for (const auto& b : skeleton) {
      boneNames.push_back(b.name);
    }
    options.to_report_unit = 1.0;
    report = consistencyStats(boneNames, keepPersons(std::move(series), keep), options);
    report.flags = std::move(flags);
  } else {
    AuditData data = isCsv(a.in)
        ? auditDataFromCsv(readText(a.in), a.person_column, a.person)
        : auditDataFromJsonLines(readJsonLines(a.in), a.person_column, a.person, body ? &*body : nullptr);
    data.measurements = keepPersons(std::move(data.measurements), keep);
    data.betas = keepPersons(std::move(data.betas), keep);
    report = audit(data, options);
  }
  emit(g, out, formatOr(g, "json") == "table" ? formatTable(report) : dumpJson(toJson(report)));
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string config;
  std::string body;
  std::string pred;
  std::string gt;
  std::string gt_vertices;
  std::string regressor = "joint_regressor";
  int root = 0;
  std::string selection;
};

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).string();
}

void requireFile(const std::string& path) {
  ANTHROFIT_THROW_IF(!fs::is_regular_file(path), ErrorCode::kIoError, "file not found: " + path);
}

void runEval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  std::vector<ExperimentSequence> sequences;
  ReplacementConfig cfg;
  std::vector<std::unique_ptr<BodyModel>> bodies;
  std::vector<std::unique_ptr<A2BModel>> a2bs;
  ExperimentModels models;

  if (a.config.empty()) {
    ANTHROFIT_THROW_IF(
        a.body.empty() || a.pred.empty() || a.gt.empty(),
        ErrorCode::kInvalidConfig,
        "eval needs --config or --body, --pred and --gt");
    bodies.push_back(std::make_unique<BodyModel>(loadModel(a.body)));
    models.neutral = bodies.back().get();
    ExperimentSequence seq;
    seq.name = fs::path(a.pred).stem().string();
    seq.estimates = readResults(a.pred, models.neutral->numJoints());
    seq.gt_keypoints = keypointFramesFromJson(readJsonLines(a.gt));
    if (!a.gt_vertices.empty()) {
      seq.gt_vertices = vertexFramesFromJson(readJsonLines(a.gt_vertices));
    }
    sequences.push_back(std::move(seq));
    cfg.columns = {"orig"};
    cfg.regressor = a.regressor;
    cfg.root_index = a.root;
    if (!a.selection.empty()) {
      cfg.selection = parseIntList(a.selection);
    }
  } else {
    const nlohmann::json c = readJson(a.config);
    const fs::path base = fs::path(a.config).parent_path();
    try {
      // Every referenced file is checked before anything is loaded.
      std::vector<std::string> files = {resolve(base, c.at("body").get<std::string>())};
      for (const auto& [gender, path] : c.value("bodies", nlohmann::json::object()).items()) {
        (void)gender;
        files.push_back(resolve(base, path.get<std::string>()));
      }
      for (const auto& p : c.value("a2b", nlohmann::json::array())) {
        files.push_back(resolve(base, p.get<std::string>()));
      }
      for (const auto& s : c.at("sequences")) {
        for (const char* key : {"estimates", "gt", "gt_vertices", "pseudo_gt", "targets"}) {
          if (s.contains(key)) {
            files.push_back(resolve(base, s[key].get<std::string>()));
          }
        }
      }
      for (const auto& f : files) {
        requireFile(f);
      }

      bodies.push_back(std::make_unique<BodyModel>(loadModel(files.front())));
      models.neutral = bodies.back().get();
      for (const auto& [gender, path] : c.value("bodies", nlohmann::json::object()).items()) {
        bodies.push_back(std::make_unique<BodyModel>(loadModel(resolve(base, path.get<std::string>()))));
        models.gendered[parseGender(gender)] = bodies.back().get();
      }
      for (const auto& p : c.value("a2b", nlohmann::json::array())) {
        a2bs.push_back(std::make_unique<A2BModel>(loadA2B(resolve(base, p.get<std::string>()))));
        models.a2b.push_back(a2bs.back().get());
      }
      if (c.contains("columns")) {
        cfg.columns = c["columns"].get<std::vector<std::string>>();
      }
      cfg.source = parseMeasurementSource(c.value("measurement_source", std::string("pseudo_gt")));
      cfg.mode = parseRefitMode(c.value("mode", std::string("swap")));
      cfg.regressor = c.value("regressor", std::string("joint_regressor"));
      cfg.root_index = c.value("root_index", 0);
      cfg.selection = c.value("selection", std::vector<int>{});
      if (c.contains("ik")) {
        const auto& ik = c["ik"];
        cfg.ik.optimizer = parseOptimizer(ik.value("optimizer", std::string("lm")));
        cfg.ik.max_iters = ik.value("max_iters", cfg.ik.max_iters);
        cfg.ik.lambda_joint = ik.value("lambda_joint", cfg.ik.lambda_joint);
        cfg.ik.lambda_prior = ik.value("lambda_prior", cfg.ik.lambda_prior);
        cfg.ik.lambda_beta = ik.value("lambda_beta", cfg.ik.lambda_beta);
      }
      const int J = models.neutral->numJoints();
      for (const auto& s : c.at("sequences")) {
        ExperimentSequence seq;
        seq.name = s.at("name").get<std::string>();
        seq.gender = parseGender(s.value("gender", std::string("neutral")));
        seq.estimates = readResults(resolve(base, s.at("estimates").get<std::string>()), J);
        seq.gt_keypoints = keypointFramesFromJson(readJsonLines(resolve(base, s.at("gt").get<std::string>())));
        if (s.contains("gt_vertices")) {
          seq.gt_vertices = vertexFramesFromJson(readJsonLines(resolve(base, s["gt_vertices"].get<std::string>())));
        }
        if (s.contains("pseudo_gt")) {
          const nlohmann::json pj = readJson(resolve(base, s["pseudo_gt"].get<std::string>()));
          seq.pseudo_gt = anthroFromJson(pj, Measurer(*models.neutral).names());
        }
        if (s.contains("fixed_beta")) {
          seq.fixed_shape = ShapeParams{toVector(s["fixed_beta"].get<std::vector<double>>())};
        }
        if (s.contains("targets")) {
          seq.refit_targets = readFrames(resolve(base, s["targets"].get<std::string>()), cfg.regressor);
        }
        sequences.push_back(std::move(seq));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, std::string("malformed experiment config: ") + e.what());
    }
  }
  const auto table = runReplacementExperiment(sequences, models, cfg);
  emit(g, out, formatOr(g, "json") == "table" ? formatTable(table) : dumpJson(toJson(table)));
}

// ---------------------------------------------------------------- gen-toy-asset

struct ToyArgs {
  std::string kind;
  std::string gender = "male";
  bool pose_correctives = false;
  int count = 1000;
  int beta_dim = 8;
};

void runToy(const Globals& g, const ToyArgs& a, std::ostream& out) {
  ANTHROFIT_THROW_IF(g.out.empty(), ErrorCode::kInvalidConfig, "gen-toy-asset needs --out");
  if (a.kind == "corpus") {
    emit(g, out, betaCsv(toy::shapeCorpus(a.beta_dim, a.count, g.seed)));
    return;
  }
  BodyModel body;
  if (a.kind == "cylinder") {
    body = toy::cylinder();
  } else if (a.kind == "arm") {
    body = toy::arm();
  } else {
    body = toy::human({parseGender(a.gender), a.pose_correctives});
  }
  saveModel(g.out, body);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anthropometric body-shape toolkit", "anthrofit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv", "table"}));
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file (default: standard output)");
  app.add_flag("--verbose", g.verbose, "Progress on standard error");

  MeasureArgs ma;
  auto* measure = app.add_subcommand("measure", "Measure T-pose meshes");
  measure->add_option("--body", ma.body, "Body model (.bmf)")->required()->check(CLI::ExistingFile);
  measure->add_option("--beta", ma.beta, "Comma-separated shape coefficients");
  measure->add_option("--betas", ma.betas, "CSV or JSON-lines file of shapes")->check(CLI::ExistingFile);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Sample shapes and (A, beta) pairs");
  sample->add_option("--dist", sa.dist, "Shape distribution (JSON)")->check(CLI::ExistingFile);
  sample->add_option("--corpus", sa.corpus, "Shape corpus (CSV or JSON lines)")->check(CLI::ExistingFile);
  sample->add_option("--kind", sa.kind, "normal, uniform or corpus")->check(CLI::IsMember({"normal", "uniform", "corpus"}));
  sample->add_option("--alpha", sa.alpha, "Spread factor");
  sample->add_option("--count", sa.count, "Number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--body", sa.body, "Measure the samples on this body")->check(CLI::ExistingFile);
  sample->add_option("--write-dist", sa.write_dist, "Write the fitted distribution here");

  A2BArgs aa;
  auto* a2b = app.add_subcommand("a2b", "Train and apply measurement-to-shape models");
  a2b->require_subcommand(1);
  auto* train = a2b->add_subcommand("train", "Train a model");
  train->add_option("--kind", aa.kind, "nn or svr")->required()->check(CLI::IsMember({"nn", "svr"}));
  train->add_option("--body", aa.body)->required()->check(CLI::ExistingFile);
  train->add_option("--dist", aa.dist)->required()->check(CLI::ExistingFile);
  train->add_option("--model", aa.model, "Output model file")->required();
  train->add_option("--sample-kind", aa.sample_kind)->check(CLI::IsMember({"normal", "uniform"}));
  train->add_option("--alpha", aa.alpha);
  train->add_option("--iterations", aa.iterations)->check(CLI::NonNegativeNumber);
  train->add_option("--batch", aa.batch)->check(CLI::PositiveNumber);
  train->add_option("--lr", aa.lr);
  train->add_option("--lr-final", aa.lr_final);
  train->add_option("--hidden", aa.hidden, "Hidden layer widths");
  train->add_option("--warmup", aa.warmup)->check(CLI::PositiveNumber);
  train->add_option("--samples", aa.samples, "SVR training set size")->check(CLI::PositiveNumber);
  train->add_option("--C", aa.C);
  train->add_option("--epsilon", aa.epsilon);
  train->add_option("--gamma", aa.gamma);
  train->add_option("--tol", aa.tol);
  auto* evalA2B = a2b->add_subcommand("eval", "Cycle evaluation on sampled shapes");
  evalA2B->add_option("--model", aa.model)->required()->check(CLI::ExistingFile);
  evalA2B->add_option("--body", aa.body)->required()->check(CLI::ExistingFile);
  evalA2B->add_option("--dist", aa.dist)->required()->check(CLI::ExistingFile);
  evalA2B->add_option("--count", aa.count)->check(CLI::PositiveNumber);
  evalA2B->add_option("--sample-kind", aa.sample_kind)->check(CLI::IsMember({"normal", "uniform"}));
  evalA2B->add_option("--alpha", aa.alpha);
  auto* predict = a2b->add_subcommand("predict", "Shape from measurements");
  predict->add_option("--model", aa.model)->required()->check(CLI::ExistingFile);
  predict->add_option("--measurements", aa.measurements, "JSON object name -> mm")->required()->check(CLI::ExistingFile);
  auto* convert = a2b->add_subcommand("convert-gender", "Shape on another body via measurements");
  convert->add_option("--model", aa.model, "A2B model of the target body")->required()->check(CLI::ExistingFile);
  convert->add_option("--body-src", aa.body_src)->required()->check(CLI::ExistingFile);
  convert->add_option("--body-tgt", aa.body_tgt)->required()->check(CLI::ExistingFile);
  convert->add_option("--beta", aa.beta);

  IkArgs ia;
  auto addIkOptions = [&ia](CLI::App* cmd) {
    cmd->add_option("--body", ia.body)->required()->check(CLI::ExistingFile);
    cmd->add_option("--frames", ia.frames, "Keypoint frames (JSON lines)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--regressor", ia.regressor);
    cmd->add_option("--optimizer", ia.optimizer)->check(CLI::IsMember({"adam", "lbfgs", "lm"}));
    cmd->add_option("--max-iters", ia.max_iters)->check(CLI::PositiveNumber);
    cmd->add_option("--prior", ia.prior)->check(CLI::IsMember({"gaussian_pose", "none"}));
    cmd->add_option("--lambda-joint", ia.lambda_joint);
    cmd->add_option("--lambda-prior", ia.lambda_prior);
    cmd->add_option("--lambda-beta", ia.lambda_beta);
    cmd->add_flag("--no-mask", ia.no_mask, "Use every keypoint");
  };
  auto* ik = app.add_subcommand("ik", "Fit the body to keypoint sequences");
  addIkOptions(ik);
  ia.fixed_shape_opt =
      ik->add_option("--fixed-shape", ia.fixed_shape, "Freeze the shape (given, or the median of a free fit)")
          ->expected(0, 1);
  ik->add_option("--mode", ia.mode, "refit or swap")->check(CLI::IsMember({"refit", "swap", "swap-only"}));
  ik->add_option("--previous", ia.previous, "Earlier results (JSON lines)")->check(CLI::ExistingFile);
  auto* pseudo = app.add_subcommand("pseudo-gt", "Median measurements of IK fits");
  addIkOptions(pseudo);

  AuditArgs ua;
  auto* auditCmd = app.add_subcommand("audit", "Per-person shape consistency");
  auditCmd->add_option("--in", ua.in, "CSV or JSON lines")->required()->check(CLI::ExistingFile);
  auditCmd->add_option("--body", ua.body, "Measure shapes on this body")->check(CLI::ExistingFile);
  auditCmd->add_option("--person-column", ua.person_column);
  auditCmd->add_option("--person", ua.person, "Person id for rows without one");
  auditCmd->add_option("--persons", ua.persons, "Comma-separated persons to include");
  auditCmd->add_flag("--bones", ua.bones, "Audit bone lengths of keypoint frames");
  auditCmd->add_option("--skeleton", ua.skeleton, "JSON [[name, a, b], ...]")->check(CLI::ExistingFile);
  auditCmd->add_flag("--no-merge-sides", ua.no_merge, "Keep left and right rows apart");

  EvalArgs ea;
  auto* evalCmd = app.add_subcommand("eval", "MPJPE, MVE and shape replacement experiments");
  evalCmd->add_option("--config", ea.config, "Experiment (JSON)")->check(CLI::ExistingFile);
  evalCmd->add_option("--body", ea.body)->check(CLI::ExistingFile);
  evalCmd->add_option("--pred", ea.pred, "Estimates (JSON lines)")->check(CLI::ExistingFile);
  evalCmd->add_option("--gt", ea.gt, "Ground-truth keypoints (JSON lines)")->check(CLI::ExistingFile);
  evalCmd->add_option("--gt-vertices", ea.gt_vertices)->check(CLI::ExistingFile);
  evalCmd->add_option("--regressor", ea.regressor);
  evalCmd->add_option("--root", ea.root)->check(CLI::NonNegativeNumber);
  evalCmd->add_option("--selection", ea.selection, "Comma-separated keypoint indices");

  ToyArgs ta;
  auto* toyCmd = app.add_subcommand("gen-toy-asset", "Write a test body model or shape corpus");
  toyCmd->add_option("--kind", ta.kind)->required()->check(CLI::IsMember({"cylinder", "arm", "human", "corpus"}));
  toyCmd->add_option("--gender", ta.gender)->check(CLI::IsMember({"male", "female", "neutral"}));
  toyCmd->add_flag("--pose-correctives", ta.pose_correctives);
  toyCmd->add_option("--count", ta.count)->check(CLI::PositiveNumber);
  toyCmd->add_option("--beta-dim", ta.beta_dim)->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const auto extras = app.remaining();
    if (e.get_exit_code() != 0 && !extras.empty()) {
      // Name the unknown flag rather than the missing subcommand.
      err << "unexpected argument: " << extras.front() << "\nRun with --help for more information.\n";
      return kExitUsage;
    }
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*measure) {
      runMeasure(g, ma, out);
    } else if (*sample) {
      runSample(g, sa, out);
    } else if (*train) {
      runA2BTrain(g, aa, out, err);
    } else if (*evalA2B) {
      runA2BEval(g, aa, out);
    } else if (*predict) {
      runA2BPredict(g, aa, out);
    } else if (*convert) {
      runA2BConvert(g, aa, out);
    } else if (*ik) {
      runIk(g, ia, out);
    } else if (*pseudo) {
      runPseudoGt(g, ia, out);
    } else if (*auditCmd) {
      runAudit(g, ua, out);
    } else if (*evalCmd) {
      runEval(g, ea, out);
    } else if (*toyCmd) {
      runToy(g, ta, out);
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitDomainError;
  } catch (const nlohmann::json::exception& e) {
    err << errorName(ErrorCode::kParseError) << ": " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitOk;
}

} // namespace anthrofit::cli
