#include "anthrofit/a2b.h"

#include "anthrofit/container.h"
#include "anthrofit/error.h"
#include "anthrofit/rng.h"

#include <cmath>
#include <numbers>

namespace anthrofit {

namespace {

constexpr std::string_view kMagic = "A2B1";
constexpr double kDivergenceFactor = 1e4;

} // namespace

std::string_view toString(A2BKind kind) {
  return kind == A2BKind::kNn ? "nn" : "svr";
}

A2BKind parseA2BKind(std::string_view name) {
  if (name == "nn") {
    return A2BKind::kNn;
  }
  if (name == "svr") {
    return A2BKind::kSvr;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown A2B kind '" + std::string(name) + "'");
}

InputScaler InputScaler::fit(const Eigen::MatrixXd& x) {
  ANTHROFIT_THROW_IF(x.rows() < 2, ErrorCode::kTooFewSamples, "scaler needs at least 2 samples");
  InputScaler s;
  s.mean = x.colwise().mean().transpose();
  s.std = ((x.rowwise() - s.mean.transpose()).colwise().squaredNorm().transpose() / static_cast<double>(x.rows() - 1))
              .cwiseSqrt();
  for (Eigen::Index i = 0; i < s.std.size(); ++i) {
    if (!(s.std(i) > 0.0)) {
      s.std(i) = 1.0;
    }
  }
  return s;
}

Eigen::VectorXd InputScaler::standardize(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(std);
}

Eigen::VectorXd InputScaler::destandardize(const Eigen::VectorXd& z) const {
  return z.cwiseProduct(std) + mean;
}

Eigen::MatrixXd InputScaler::standardizeRows(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::VectorXd A2BModel::predictValues(const Eigen::VectorXd& measurements) const {
  ANTHROFIT_THROW_IF(
      measurements.size() != static_cast<Eigen::Index>(measurement_names.size()),
      ErrorCode::kDimensionMismatch,
      "A2B model expects " + std::to_string(measurement_names.size()) + " measurements, got " +
          std::to_string(measurements.size()));
  ANTHROFIT_THROW_IF(!measurements.allFinite(), ErrorCode::kNonFiniteInput, "measurements contain non-finite values");
  const Eigen::VectorXd z = scaler.standardize(measurements);
  if (kind == A2BKind::kNn) {
    return nn.forward(z).col(0);
  }
  return svr.predict(z);
}

ShapeParams A2BModel::predict(const AnthroVector& a) const {
  ANTHROFIT_THROW_IF(
      a.names != measurement_names, ErrorCode::kDimensionMismatch, "measurement names differ from the A2B model's");
  return ShapeParams{predictValues(a.values)};
}

A2BModel trainNn(const BodyModel& body, const ShapeDistribution& dist, const NnTrainConfig& cfg) {
  ANTHROFIT_THROW_IF(cfg.iterations < 0, ErrorCode::kInvalidConfig, "iterations must be non-negative");
  ANTHROFIT_THROW_IF(cfg.batch < 1, ErrorCode::kInvalidConfig, "batch size must be positive");
  ANTHROFIT_THROW_IF(!(cfg.lr > 0.0), ErrorCode::kInvalidConfig, "learning rate must be positive");
  ANTHROFIT_THROW_IF(cfg.warmup < 2, ErrorCode::kInvalidConfig, "warm-up needs at least 2 samples");
  ANTHROFIT_THROW_IF(
      cfg.sample_kind == SampleKind::kCorpus,
      ErrorCode::kInvalidConfig,
      "network training samples from a fitted distribution (normal or uniform)");
  ANTHROFIT_THROW_IF(dist.dim() != body.beta_dim, ErrorCode::kDimensionMismatch, "distribution and body differ in beta_dim");

  const Measurer measurer(body);
  const int M = static_cast<int>(measurer.names().size());
  const int B = body.beta_dim;

  A2BModel model;
  model.kind = A2BKind::kNn;
  model.gender = body.gender;
  model.measurement_names = measurer.names();
  model.beta_dim = B;

  SampleConfig sampling{cfg.sample_kind, cfg.alpha, 1, streamSeed(cfg.seed, 1)};
  Eigen::MatrixXd warm(cfg.warmup, M);
  for (int i = 0; i < cfg.warmup; ++i) {
    warm.row(i) = measurer.b2a(sampleShape(dist, sampling, i)).values.transpose();
  }
  model.scaler = InputScaler::fit(warm);

  std::vector<int> sizes = {M};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(B);
  Rng initRng(streamSeed(cfg.seed, 0));
  model.nn = Mlp(sizes, initRng);

  Adam adam(model.nn, cfg.lr);
  sampling.seed = streamSeed(cfg.seed, 2);
  int64_t index = 0;
  Eigen::MatrixXd x(M, cfg.batch);
  Eigen::MatrixXd y(B, cfg.batch);
  Mlp::Gradients grad;
  double firstLoss = 0.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int c = 0; c < cfg.batch; ++c) {
      const Eigen::VectorXd beta = sampleShape(dist, sampling, index++);
      x.col(c) = model.scaler.standardize(measurer.b2a(beta).values);
      y.col(c) = beta;
    }
    const double loss = model.nn.lossAndGradient(x, y, grad);
    if (it == 0) {
      firstLoss = loss;
    }
    ANTHROFIT_THROW_IF(
        !std::isfinite(loss) || loss > kDivergenceFactor * std::max(firstLoss, 1e-12),
        ErrorCode::kDivergenceDetected,
        "training loss " + std::to_string(loss) + " at iteration " + std::to_string(it));
    if (cfg.lr_final > 0.0 && cfg.iterations > 1) {
      const double t = static_cast<double>(it) / (cfg.iterations - 1);
      adam.lr = cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
    }
    adam.step(model.nn, grad);
    if (cfg.progress && (it + 1) % std::max(1, cfg.report_every) == 0) {
      cfg.progress(it + 1, loss);
    }
  }

  model.training = {
      {"iterations", cfg.iterations},
      {"batch", cfg.batch},
      {"lr", cfg.lr},
      {"lr_final", cfg.lr_final},
      {"warmup", cfg.warmup},
      {"sample_kind", toString(cfg.sample_kind)},
      {"alpha", cfg.alpha},
      {"seed", cfg.seed},
      {"hidden", cfg.hidden}};
  return model;
}

A2BModel trainSvr(const Dataset& data, const SvrConfig& cfg, Gender gender) {
  ANTHROFIT_THROW_IF(data.size() < 2, ErrorCode::kTooFewSamples, "SVR training needs at least 2 samples");
  A2BModel model;
  model.kind = A2BKind::kSvr;
  model.gender = gender;
  model.measurement_names = data.names;
  model.beta_dim = static_cast<int>(data.betas.cols());
  model.scaler = InputScaler::fit(data.measurements);
  model.svr = trainSvrModel(model.scaler.standardizeRows(data.measurements), data.betas, cfg);
  model.training = {
      {"samples", data.size()},
      {"C", cfg.C},
      {"epsilon", cfg.epsilon},
      {"gamma", model.svr.gamma},
      {"tol", cfg.tol}};
  return model;
}

A2BEvalReport evaluatePredictor(
    const ShapePredictor& predictor,
    const BodyModel& body,
    const Eigen::MatrixXd& testBetas,
    int threads) {
  ANTHROFIT_THROW_IF(testBetas.rows() < 1, ErrorCode::kTooFewSamples, "empty test set");
  const Dataset truth = measureShapes(body, testBetas, threads);
  Eigen::MatrixXd predicted(testBetas.rows(), testBetas.cols());
  AnthroVector a;
  a.names = truth.names;
  for (Eigen::Index i = 0; i < testBetas.rows(); ++i) {
    a.values = truth.measurements.row(i).transpose();
    const Eigen::VectorXd beta = predictor(a);
    ANTHROFIT_THROW_IF(
        beta.size() != testBetas.cols(), ErrorCode::kDimensionMismatch, "predictor returned the wrong beta length");
    predicted.row(i) = beta.transpose();
  }
  const Dataset cycle = measureShapes(body, predicted, threads);

  A2BEvalReport r;
  r.count = static_cast<int>(testBetas.rows());
  r.names = truth.names;
  r.beta_mse = (predicted - testBetas).squaredNorm() / static_cast<double>(testBetas.size());
  const Eigen::MatrixXd absErr = (cycle.measurements - truth.measurements).cwiseAbs();
  r.per_measurement_mae_mm = absErr.colwise().mean().transpose();
  r.anthro_mae_mm = absErr.mean();
  return r;
}

A2BEvalReport evaluate(const A2BModel& model, const BodyModel& body, const Eigen::MatrixXd& testBetas, int threads) {
  return evaluatePredictor([&](const AnthroVector& a) { return model.predict(a).beta; }, body, testBetas, threads);
}

nlohmann::ordered_json toJson(const A2BEvalReport& report) {
  nlohmann::ordered_json j;
  j["count"] = report.count;
  j["beta_mse"] = report.beta_mse;
  j["beta_mse_e3"] = report.betaMseE3();
  j["anthro_mae_mm"] = report.anthro_mae_mm;
  nlohmann::ordered_json per;
  for (size_t i = 0; i < report.names.size(); ++i) {
    per[report.names[i]] = report.per_measurement_mae_mm(static_cast<Eigen::Index>(i));
  }
  j["per_measurement_mae_mm"] = per;
  return j;
}

ShapeParams convertGender(
    const ShapeParams& betaSrc,
    const BodyModel& bodySrc,
    const BodyModel& bodyTgt,
    const A2BModel& a2bTgt) {
  ANTHROFIT_THROW_IF(
      a2bTgt.gender != bodyTgt.gender,
      ErrorCode::kGenderMismatch,
      "A2B model is " + std::string(toString(a2bTgt.gender)) + ", target body is " +
          std::string(toString(bodyTgt.gender)));
  ANTHROFIT_THROW_IF(
      a2bTgt.beta_dim != bodyTgt.beta_dim, ErrorCode::kDimensionMismatch, "A2B model and target body differ in beta_dim");
  return a2bTgt.predict(b2a(bodySrc, betaSrc));
}

std::vector<char> serializeA2B(const A2BModel& model) {
  Container c;
  c.header["version"] = 1;
  c.header["kind"] = toString(model.kind);
  c.header["gender"] = toString(model.gender);
  c.header["beta_dim"] = model.beta_dim;
  c.header["measurement_names"] = model.measurement_names;
  c.header["training"] = model.training;
  c.add("scaler_mean", realTensor(model.scaler.mean, DType::kF64, {model.scaler.mean.size()}));
  c.add("scaler_std", realTensor(model.scaler.std, DType::kF64, {model.scaler.std.size()}));
  if (model.kind == A2BKind::kNn) {
    c.header["layers"] = model.nn.sizes();
    for (size_t l = 0; l < model.nn.weights.size(); ++l) {
      c.add("nn_w" + std::to_string(l), realTensor(model.nn.weights[l], DType::kF64));
      c.add(
          "nn_b" + std::to_string(l),
          realTensor(model.nn.biases[l], DType::kF64, {model.nn.biases[l].size()}));
    }
  } else {
    c.header["svr"] = {{"gamma", model.svr.gamma}, {"epsilon", model.svr.epsilon}, {"C", model.svr.C}};
    c.add("svr_support", realTensor(model.svr.support, DType::kF64));
    c.add("svr_coef", realTensor(model.svr.coef, DType::kF64));
    c.add("svr_bias", realTensor(model.svr.bias, DType::kF64, {model.svr.bias.size()}));
  }
  return serializeContainer(c, kMagic);
}

namespace {

const Tensor& requireTensor(const Container& c, const std::string& name) {
  const Tensor* t = c.find(name);
  ANTHROFIT_THROW_IF(t == nullptr, ErrorCode::kTensorShapeMismatch, "missing tensor '" + name + "'");
  return *t;
}

Eigen::MatrixXd matrixOf(const Container& c, const std::string& name) {
  const Tensor& t = requireTensor(c, name);
  const int64_t rows = t.shape.empty() ? 0 : t.shape[0];
  const int64_t cols = t.shape.size() == 2 ? t.shape[1] : 1;
  ANTHROFIT_THROW_IF(t.shape.empty() || t.shape.size() > 2, ErrorCode::kTensorShapeMismatch, "tensor '" + name + "' must be 1-D or 2-D");
  return tensorMatrix(t, rows, cols);
}

} // namespace

A2BModel parseA2B(const std::vector<char>& bytes) {
  const Container c = parseContainer(bytes, kMagic);
  A2BModel m;
  try {
    ANTHROFIT_THROW_IF(
        c.header.at("version").get<int>() != 1, ErrorCode::kVersionUnsupported, "unsupported A2B model version");
    m.kind = parseA2BKind(c.header.at("kind").get<std::string>());
    m.gender = parseGender(c.header.at("gender").get<std::string>());
    m.beta_dim = c.header.at("beta_dim").get<int>();
    m.measurement_names = c.header.at("measurement_names").get<std::vector<std::string>>();
    m.training = c.header.value("training", nlohmann::json::object());
    m.scaler.mean = matrixOf(c, "scaler_mean").col(0);
    m.scaler.std = matrixOf(c, "scaler_std").col(0);
    if (m.kind == A2BKind::kNn) {
      const auto layers = c.header.at("layers").get<std::vector<int>>();
      for (size_t l = 0; l + 1 < layers.size(); ++l) {
        Eigen::MatrixXd w = matrixOf(c, "nn_w" + std::to_string(l));
        Eigen::VectorXd b = matrixOf(c, "nn_b" + std::to_string(l)).col(0);
        ANTHROFIT_THROW_IF(
            w.rows() != layers[l + 1] || w.cols() != layers[l] || b.size() != layers[l + 1],
            ErrorCode::kTensorShapeMismatch,
            "layer " + std::to_string(l) + " does not match the declared sizes");
        m.nn.weights.push_back(std::move(w));
        m.nn.biases.push_back(std::move(b));
      }
    } else {
      const auto& svr = c.header.at("svr");
      m.svr.gamma = svr.at("gamma").get<double>();
      m.svr.epsilon = svr.at("epsilon").get<double>();
      m.svr.C = svr.at("C").get<double>();
      m.svr.support = matrixOf(c, "svr_support");
      m.svr.coef = matrixOf(c, "svr_coef");
      m.svr.bias = matrixOf(c, "svr_bias").col(0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTensorShapeMismatch, std::string("malformed A2B header: ") + e.what());
  }
  const auto M = static_cast<Eigen::Index>(m.measurement_names.size());
  ANTHROFIT_THROW_IF(
      m.scaler.mean.size() != M || m.scaler.std.size() != M || (m.scaler.std.array() <= 0.0).any(),
      ErrorCode::kInvariantViolation,
      "input scaler does not match the measurement list or has non-positive std");
  if (m.kind == A2BKind::kNn) {
    ANTHROFIT_THROW_IF(
        m.nn.weights.empty() || m.nn.inputDim() != M || m.nn.outputDim() != m.beta_dim,
        ErrorCode::kInvariantViolation,
        "network shape does not chain measurements to beta");
  } else {
    ANTHROFIT_THROW_IF(
        m.svr.coef.cols() != m.beta_dim || m.svr.bias.size() != m.beta_dim ||
            m.svr.support.rows() != m.svr.coef.rows() || (m.svr.support.rows() > 0 && m.svr.support.cols() != M) ||
            (m.svr.coef.array().abs() > m.svr.C).any(),
        ErrorCode::kInvariantViolation,
        "SVR tensors are inconsistent or dual coefficients exceed C");
  }
  return m;
}

void saveA2B(const std::filesystem::path& path, const A2BModel& model) {
  writeBytes(path, serializeA2B(model));
}

A2BModel loadA2B(const std::filesystem::path& path) {
  return parseA2B(readBytes(path));
}

} // namespace anthrofit
