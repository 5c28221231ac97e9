#include "anthrofit/sampling.h"

#include "anthrofit/error.h"
#include "anthrofit/io.h"
#include "anthrofit/rng.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace anthrofit {

std::string_view toString(SampleKind kind) {
  switch (kind) {
    case SampleKind::kCorpus:
      return "corpus";
    case SampleKind::kNormal:
      return "normal";
    case SampleKind::kUniform:
      return "uniform";
  }
  return "?";
}

SampleKind parseSampleKind(std::string_view name) {
  if (name == "corpus") {
    return SampleKind::kCorpus;
  }
  if (name == "normal") {
    return SampleKind::kNormal;
  }
  if (name == "uniform") {
    return SampleKind::kUniform;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown sample kind '" + std::string(name) + "'");
}

ShapeDistribution fitDistribution(const Eigen::MatrixXd& betas) {
  const auto n = betas.rows();
  ANTHROFIT_THROW_IF(
      n < 2, ErrorCode::kTooFewSamples, "need at least 2 shapes to fit a distribution, got " + std::to_string(n));
  ANTHROFIT_THROW_IF(!betas.allFinite(), ErrorCode::kNonFiniteInput, "shape corpus contains non-finite values");
  ShapeDistribution d;
  d.mean = betas.colwise().mean().transpose();
  const Eigen::MatrixXd centered = betas.rowwise() - d.mean.transpose();
  d.std = (centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1)).cwiseSqrt();
  d.min = betas.colwise().minCoeff().transpose();
  d.max = betas.colwise().maxCoeff().transpose();
  d.source_count = static_cast<int>(n);
  return d;
}

namespace {

void checkConfig(const SampleConfig& cfg) {
  ANTHROFIT_THROW_IF(cfg.count < 1, ErrorCode::kInvalidConfig, "sample count must be at least 1");
  ANTHROFIT_THROW_IF(
      !(cfg.alpha >= 1.0) || !std::isfinite(cfg.alpha), ErrorCode::kInvalidConfig, "alpha must be finite and >= 1");
}

} // namespace

Eigen::VectorXd sampleShape(const ShapeDistribution& dist, const SampleConfig& cfg, int64_t index) {
  Rng rng(streamSeed(cfg.seed, static_cast<uint64_t>(index)));
  const int B = dist.dim();
  Eigen::VectorXd beta(B);
  switch (cfg.kind) {
    case SampleKind::kNormal:
      for (int b = 0; b < B; ++b) {
        beta(b) = rng.normal(dist.mean(b), cfg.alpha * dist.std(b));
      }
      break;
    case SampleKind::kUniform:
      for (int b = 0; b < B; ++b) {
        const double mid = 0.5 * (dist.min(b) + dist.max(b));
        const double half = 0.5 * cfg.alpha * (dist.max(b) - dist.min(b));
        beta(b) = std::clamp(rng.uniform(mid - half, mid + half), mid - half, mid + half);
      }
      break;
    case SampleKind::kCorpus:
      throw Error(ErrorCode::kInvalidConfig, "corpus sampling needs the corpus itself, not a distribution");
  }
  return beta;
}

Eigen::MatrixXd sampleShapes(const ShapeDistribution& dist, const SampleConfig& cfg) {
  checkConfig(cfg);
  Eigen::MatrixXd out(cfg.count, dist.dim());
  for (int i = 0; i < cfg.count; ++i) {
    out.row(i) = sampleShape(dist, cfg, i).transpose();
  }
  return out;
}

Eigen::MatrixXd sampleCorpus(const Eigen::MatrixXd& corpus, const SampleConfig& cfg) {
  checkConfig(cfg);
  ANTHROFIT_THROW_IF(corpus.rows() < 1, ErrorCode::kTooFewSamples, "empty shape corpus");
  Eigen::MatrixXd out(cfg.count, corpus.cols());
  for (int i = 0; i < cfg.count; ++i) {
    Rng rng(streamSeed(cfg.seed, static_cast<uint64_t>(i)));
    out.row(i) = corpus.row(static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(corpus.rows()))));
  }
  return out;
}

Dataset Dataset::rows(const std::vector<int>& indices) const {
  Dataset out;
  out.names = names;
  out.measurements.resize(static_cast<Eigen::Index>(indices.size()), measurements.cols());
  out.betas.resize(static_cast<Eigen::Index>(indices.size()), betas.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    out.measurements.row(static_cast<Eigen::Index>(i)) = measurements.row(indices[i]);
    out.betas.row(static_cast<Eigen::Index>(i)) = betas.row(indices[i]);
  }
  return out;
}

Dataset measureShapes(const BodyModel& model, const Eigen::MatrixXd& betas, int threads) {
  const Measurer measurer(model);
  Dataset out;
  out.names = measurer.names();
  out.betas = betas;
  out.measurements.resize(betas.rows(), static_cast<Eigen::Index>(out.names.size()));
  const int n = static_cast<int>(betas.rows());
  const int workers = std::clamp(threads, 1, std::max(1, n));

  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](int w) {
    try {
      for (int i = w * n / workers; i < (w + 1) * n / workers; ++i) {
        out.measurements.row(i) = measurer.b2a(betas.row(i).transpose()).values.transpose();
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(work, w);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return out;
}

Dataset generateDataset(const BodyModel& model, const ShapeDistribution& dist, const SampleConfig& cfg, int threads) {
  return measureShapes(model, sampleShapes(dist, cfg), threads);
}

DatasetStream::DatasetStream(const BodyModel& model, ShapeDistribution dist, SampleConfig cfg)
    : measurer_(model), dist_(std::move(dist)), cfg_(cfg) {
  cfg_.count = 1;
  checkConfig(cfg_);
}

std::pair<AnthroVector, ShapeParams> DatasetStream::next() {
  ShapeParams shape{sampleShape(dist_, cfg_, index_++)};
  AnthroVector a = measurer_.b2a(shape.beta);
  return {std::move(a), std::move(shape)};
}

Dataset DatasetStream::take(int n) {
  Dataset out;
  out.names = measurer_.names();
  out.measurements.resize(n, static_cast<Eigen::Index>(out.names.size()));
  out.betas.resize(n, dist_.dim());
  for (int i = 0; i < n; ++i) {
    auto [a, shape] = next();
    out.measurements.row(i) = a.values.transpose();
    out.betas.row(i) = shape.beta.transpose();
  }
  return out;
}

Split splitIndices(int n, uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1))]);
  }
  const int nTrain = static_cast<int>(std::floor(0.80 * n));
  const int nTest = static_cast<int>(std::floor(0.15 * n));
  Split s;
  s.train.assign(order.begin(), order.begin() + nTrain);
  s.test.assign(order.begin() + nTrain, order.begin() + nTrain + nTest);
  s.validation.assign(order.begin() + nTrain + nTest, order.end());
  return s;
}

namespace {

std::vector<double> toStd(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd fromJsonArray(const nlohmann::json& j, const char* key, int expected) {
  ANTHROFIT_THROW_IF(!j.contains(key) || !j[key].is_array(), ErrorCode::kParseError, std::string("missing '") + key + "'");
  const auto values = j[key].get<std::vector<double>>();
  ANTHROFIT_THROW_IF(
      expected >= 0 && static_cast<int>(values.size()) != expected,
      ErrorCode::kDimensionMismatch,
      std::string("'") + key + "' has the wrong length");
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

} // namespace

nlohmann::ordered_json toJson(const ShapeDistribution& dist) {
  nlohmann::ordered_json j;
  j["beta_dim"] = dist.dim();
  j["source_count"] = dist.source_count;
  j["mean"] = toStd(dist.mean);
  j["std"] = toStd(dist.std);
  j["min"] = toStd(dist.min);
  j["max"] = toStd(dist.max);
  return j;
}

ShapeDistribution distributionFromJson(const nlohmann::json& j) {
  ShapeDistribution d;
  d.mean = fromJsonArray(j, "mean", -1);
  const int B = d.dim();
  d.std = fromJsonArray(j, "std", B);
  d.min = fromJsonArray(j, "min", B);
  d.max = fromJsonArray(j, "max", B);
  d.source_count = j.value("source_count", 0);
  ANTHROFIT_THROW_IF(
      (d.std.array() < 0.0).any() || (d.min.array() > d.max.array()).any(),
      ErrorCode::kInvalidConfig,
      "distribution has negative std or min > max");
  return d;
}

std::string datasetToCsv(const Dataset& data) {
  std::ostringstream out;
  for (const auto& name : data.names) {
    out << name << ',';
  }
  for (Eigen::Index b = 0; b < data.betas.cols(); ++b) {
    out << "beta_" << b << (b + 1 < data.betas.cols() ? "," : "\n");
  }
  for (int i = 0; i < data.size(); ++i) {
    for (Eigen::Index m = 0; m < data.measurements.cols(); ++m) {
      out << formatNumber(data.measurements(i, m)) << ',';
    }
    for (Eigen::Index b = 0; b < data.betas.cols(); ++b) {
      out << formatNumber(data.betas(i, b)) << (b + 1 < data.betas.cols() ? "," : "\n");
    }
  }
  return out.str();
}

Dataset datasetFromCsv(const std::string& text) {
  const CsvTable table = parseCsv(text);
  Dataset d;
  std::vector<int> measureCols, betaCols;
  for (size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c].starts_with("beta_")) {
      betaCols.push_back(static_cast<int>(c));
    } else {
      measureCols.push_back(static_cast<int>(c));
      d.names.push_back(table.header[c]);
    }
  }
  ANTHROFIT_THROW_IF(betaCols.empty(), ErrorCode::kParseError, "dataset CSV has no beta_ columns");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  d.measurements.resize(n, static_cast<Eigen::Index>(measureCols.size()));
  d.betas.resize(n, static_cast<Eigen::Index>(betaCols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (size_t c = 0; c < measureCols.size(); ++c) {
      d.measurements(i, static_cast<Eigen::Index>(c)) = parseNumber(table.rows[i][measureCols[c]]);
    }
    for (size_t c = 0; c < betaCols.size(); ++c) {
      d.betas(i, static_cast<Eigen::Index>(c)) = parseNumber(table.rows[i][betaCols[c]]);
    }
  }
  return d;
}

} // namespace anthrofit
