#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/measure.h"
#include "anthrofit/mlp.h"
#include "anthrofit/sampling.h"
#include "anthrofit/svr.h"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace anthrofit {

enum class A2BKind { kNn, kSvr };

std::string_view toString(A2BKind kind);
A2BKind parseA2BKind(std::string_view name);

/// Per-feature standardization.
struct InputScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  /// Fits on the rows of `x`. Features with zero spread get std 1.
  static InputScaler fit(const Eigen::MatrixXd& x);

  Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
  Eigen::VectorXd destandardize(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd standardizeRows(const Eigen::MatrixXd& x) const;
};

/// Measurement-to-shape regressor for one gender.
struct A2BModel {
  A2BKind kind = A2BKind::kSvr;
  Gender gender = Gender::kNeutral;
  std::vector<std::string> measurement_names;
  int beta_dim = 0;
  InputScaler scaler;
  Mlp nn; // kind == kNn
  SvrModel svr; // kind == kSvr
  nlohmann::json training; // configuration the model was trained with

  /// Throws NonFiniteInput for non-finite measurements and
  /// DimensionMismatch when the measurement names differ.
  ShapeParams predict(const AnthroVector& a) const;
  Eigen::VectorXd predictValues(const Eigen::VectorXd& measurements) const;
};

struct NnTrainConfig {
  std::vector<int> hidden = {330, 330, 330};
  int iterations = 50000;
  int batch = 256;
  double lr = 1e-3;
  /// Learning rate reached at the last iteration (cosine schedule); <= 0 keeps lr constant.
  double lr_final = 0.0;
  int warmup = 2048; // samples used to fit the input scaler
  SampleKind sample_kind = SampleKind::kUniform;
  double alpha = 1.5;
  uint64_t seed = 0;
  /// Called every `report_every` iterations with (iteration, batch loss).
  std::function<void(int, double)> progress;
  int report_every = 1000;
};

/// Trains on freshly sampled shapes every iteration. Throws
/// DivergenceDetected when the batch loss becomes non-finite or exceeds 1e4
/// times the first batch loss.
A2BModel trainNn(const BodyModel& body, const ShapeDistribution& dist, const NnTrainConfig& cfg);

/// One scalar SVR per shape coefficient on standardized measurements.
A2BModel trainSvr(const Dataset& data, const SvrConfig& cfg, Gender gender);

struct A2BEvalReport {
  int count = 0;
  double beta_mse = 0.0; // mean over samples and coefficients
  double anthro_mae_mm = 0.0; // mean over samples and measurements
  std::vector<std::string> names;
  Eigen::VectorXd per_measurement_mae_mm;

  double betaMseE3() const {
    return 1e3 * beta_mse;
  }
};

using ShapePredictor = std::function<Eigen::VectorXd(const AnthroVector&)>;

/// Cycle evaluation: A = b2a(beta), beta_hat = predictor(A), compare beta and
/// b2a(beta_hat) against A.
A2BEvalReport evaluatePredictor(
    const ShapePredictor& predictor,
    const BodyModel& body,
    const Eigen::MatrixXd& testBetas,
    int threads = 1);

A2BEvalReport evaluate(const A2BModel& model, const BodyModel& body, const Eigen::MatrixXd& testBetas, int threads = 1);

nlohmann::ordered_json toJson(const A2BEvalReport& report);

/// Measures `betaSrc` on `bodySrc` and predicts the target-gender shape.
ShapeParams convertGender(
    const ShapeParams& betaSrc,
    const BodyModel& bodySrc,
    const BodyModel& bodyTgt,
    const A2BModel& a2bTgt);

std::vector<char> serializeA2B(const A2BModel& model);
A2BModel parseA2B(const std::vector<char>& bytes);
void saveA2B(const std::filesystem::path& path, const A2BModel& model);
A2BModel loadA2B(const std::filesystem::path& path);

} // namespace anthrofit
