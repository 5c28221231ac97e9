#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/measure.h"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace anthrofit {

/// Independent per-coefficient marginals of a shape corpus.
struct ShapeDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd std; // unbiased
  Eigen::VectorXd min;
  Eigen::VectorXd max;
  int source_count = 0;

  int dim() const {
    return static_cast<int>(mean.size());
  }
};

enum class SampleKind { kCorpus, kNormal, kUniform };

struct SampleConfig {
  SampleKind kind = SampleKind::kNormal;
  /// Normal: std is scaled by alpha. Uniform: [min, max] is stretched about
  /// its midpoint by alpha.
  double alpha = 1.0;
  int count = 1;
  uint64_t seed = 0;
};

std::string_view toString(SampleKind kind);
SampleKind parseSampleKind(std::string_view name);

/// Per-dimension mean, unbiased std, min and max of the rows of `betas`.
ShapeDistribution fitDistribution(const Eigen::MatrixXd& betas);

/// Row i of the result only depends on (seed, i).
Eigen::MatrixXd sampleShapes(const ShapeDistribution& dist, const SampleConfig& cfg);

/// Draws `count` rows of `corpus` with replacement.
Eigen::MatrixXd sampleCorpus(const Eigen::MatrixXd& corpus, const SampleConfig& cfg);

/// Sample i of the configured distribution (what row i of sampleShapes holds).
Eigen::VectorXd sampleShape(const ShapeDistribution& dist, const SampleConfig& cfg, int64_t index);

/// Measurement/shape pairs, one row each.
struct Dataset {
  std::vector<std::string> names;
  Eigen::MatrixXd measurements; // N x M, mm
  Eigen::MatrixXd betas; // N x B

  int size() const {
    return static_cast<int>(betas.rows());
  }
  Dataset rows(const std::vector<int>& indices) const;
};

/// b2a of every row of `betas`. Rows are split across `threads` workers; the
/// result does not depend on the thread count.
Dataset measureShapes(const BodyModel& model, const Eigen::MatrixXd& betas, int threads = 1);

Dataset generateDataset(const BodyModel& model, const ShapeDistribution& dist, const SampleConfig& cfg, int threads = 1);

/// Lazily produced (A, beta) pairs in the same order as generateDataset.
class DatasetStream {
 public:
  DatasetStream(const BodyModel& model, ShapeDistribution dist, SampleConfig cfg);

  /// Next pair; `count` in the config is ignored (the stream is unbounded).
  std::pair<AnthroVector, ShapeParams> next();

  /// The next `n` pairs as a dataset.
  Dataset take(int n);

 private:
  Measurer measurer_;
  ShapeDistribution dist_;
  SampleConfig cfg_;
  int64_t index_ = 0;
};

/// Seeded shuffle of 0..n-1 split 80/15/5 into train/test/validation.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> validation;
};
Split splitIndices(int n, uint64_t seed);

nlohmann::ordered_json toJson(const ShapeDistribution& dist);
ShapeDistribution distributionFromJson(const nlohmann::json& j);

std::string datasetToCsv(const Dataset& data);
Dataset datasetFromCsv(const std::string& text);

} // namespace anthrofit
