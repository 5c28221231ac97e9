#include "fixtures.h"

#include "anthrofit/a2b.h"
#include "anthrofit/error.h"
#include "anthrofit/rng.h"
#include "anthrofit/toy_assets.h"

#include <doctest.h>

#include <Eigen/QR>

#include <cmath>

using namespace anthrofit;
using anthrofit::testing::scratchDir;

namespace {

ErrorCode codeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an anthrofit::Error");
  return ErrorCode::kIoError;
}

ShapeDistribution boxDistribution(int dim, double halfWidth) {
  ShapeDistribution d;
  d.mean = Eigen::VectorXd::Zero(dim);
  d.std = Eigen::VectorXd::Constant(dim, halfWidth / std::sqrt(3.0));
  d.min = Eigen::VectorXd::Constant(dim, -halfWidth);
  d.max = Eigen::VectorXd::Constant(dim, halfWidth);
  d.source_count = 2;
  return d;
}

const BodyModel& male() {
  static const BodyModel m = toy::human({Gender::kMale});
  return m;
}

const BodyModel& female() {
  static const BodyModel m = toy::human({Gender::kFemale});
  return m;
}

ShapeDistribution humanDistribution(int dim) {
  return fitDistribution(toy::shapeCorpus(dim, 1000, 7));
}

/// Small SVR trained once per body and shared by the tests below.
const A2BModel& smallSvr(const BodyModel& body) {
  static std::map<Gender, A2BModel> cache;
  auto it = cache.find(body.gender);
  if (it == cache.end()) {
    const Dataset data =
        generateDataset(body, humanDistribution(body.beta_dim), {SampleKind::kUniform, 1.5, 800, 5});
    it = cache.emplace(body.gender, trainSvr(data, SvrConfig{}, body.gender)).first;
  }
  return it->second;
}

} // namespace

TEST_CASE("network learns the linear cylinder map to sub-millimetre accuracy") {
  const BodyModel body = toy::cylinder();
  const ShapeDistribution dist = boxDistribution(2, 0.05);
  NnTrainConfig cfg;
  cfg.hidden = {64};
  cfg.iterations = 5000;
  cfg.batch = 64;
  cfg.lr = 1e-2;
  cfg.lr_final = 1e-6;
  cfg.alpha = 1.2;
  cfg.warmup = 512;
  const A2BModel model = trainNn(body, dist, cfg);
  const Eigen::MatrixXd test = sampleShapes(dist, {SampleKind::kUniform, 1.0, 200, 99});
  const A2BEvalReport report = evaluate(model, body, test);
  MESSAGE("cylinder NN anthro MAE " << report.anthro_mae_mm << " mm");
  CHECK(report.anthro_mae_mm < 1.0);

  // Least squares on the same pairs is the linear oracle for this map.
  const Dataset data = generateDataset(body, dist, {SampleKind::kUniform, 1.0, 200, 99});
  Eigen::MatrixXd design(data.size(), data.measurements.cols() + 1);
  design << data.measurements, Eigen::VectorXd::Ones(data.size());
  const Eigen::MatrixXd w = design.colPivHouseholderQr().solve(data.betas);
  const Eigen::MatrixXd fitted = design * w;
  CHECK((fitted - data.betas).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero iterations leave the network at its initialization") {
  const BodyModel body = toy::cylinder();
  NnTrainConfig cfg;
  cfg.hidden = {8};
  cfg.iterations = 0;
  cfg.warmup = 16;
  cfg.seed = 42;
  const A2BModel model = trainNn(body, boxDistribution(2, 0.05), cfg);
  Rng init(streamSeed(42, 0));
  const Mlp expected({3, 8, 2}, init);
  CHECK(model.nn.parameters() == expected.parameters());
  const AnthroVector a = b2a(body, ShapeParams{Eigen::Vector2d(0.01, 0.02)});
  CHECK(model.predict(a).beta.allFinite());
}

TEST_CASE("a huge learning rate is reported as divergence") {
  NnTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.iterations = 200;
  cfg.lr = 1e3;
  cfg.warmup = 64;
  CHECK(codeOf([&] { trainNn(male(), humanDistribution(8), cfg); }) == ErrorCode::kDivergenceDetected);
}

TEST_CASE("invalid training configurations") {
  NnTrainConfig cfg;
  cfg.batch = 0;
  CHECK(codeOf([&] { trainNn(male(), humanDistribution(8), cfg); }) == ErrorCode::kInvalidConfig);
  cfg = {};
  CHECK(codeOf([&] { trainNn(male(), humanDistribution(7), cfg); }) == ErrorCode::kDimensionMismatch);
  CHECK(codeOf([&] { trainSvr(Dataset{}, SvrConfig{}, Gender::kMale); }) == ErrorCode::kTooFewSamples);
}

TEST_CASE("SVR cycle on training shapes") {
  const A2BModel& model = smallSvr(male());
  const Dataset data =
      generateDataset(male(), humanDistribution(8), {SampleKind::kUniform, 1.5, 800, 5});
  CHECK(model.svr.coef.cwiseAbs().maxCoeff() <= model.svr.C + 1e-9);
  CHECK(model.svr.C == 3791.0);
  CHECK(model.svr.epsilon == 0.012);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const AnthroVector a{data.names, data.measurements.row(i).transpose()};
    const Eigen::VectorXd predicted = model.predict(a).beta;
    worst = std::max(worst, (predicted - data.betas.row(i).transpose()).cwiseAbs().maxCoeff());
  }
  MESSAGE("largest training-shape coefficient error " << worst);
  // Inside the epsilon tube up to the training tolerance.
  CHECK(worst < 0.012 + 0.01);
}

TEST_CASE("prediction contract") {
  const A2BModel& model = smallSvr(male());
  const AnthroVector a = b2a(male(), ShapeParams{Eigen::VectorXd::Constant(8, 0.3)});
  CHECK(model.predict(a).beta == model.predict(a).beta);
  CHECK(model.predict(a).beta.size() == 8);

  AnthroVector bad = a;
  bad.values(4) = std::nan("");
  CHECK(codeOf([&] { model.predict(bad); }) == ErrorCode::kNonFiniteInput);

  AnthroVector renamed = a;
  renamed.names[0] = "wingspan";
  CHECK(codeOf([&] { model.predict(renamed); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("the identity predictor has zero cycle error") {
  const Eigen::MatrixXd test = sampleShapes(humanDistribution(8), {SampleKind::kUniform, 1.0, 20, 3});
  int calls = 0;
  Eigen::MatrixXd betas = test;
  const Measurer measurer(male());
  // Looks the shape up by its measurements.
  const ShapePredictor identity = [&](const AnthroVector& a) -> Eigen::VectorXd {
    ++calls;
    for (Eigen::Index i = 0; i < betas.rows(); ++i) {
      if (measurer.b2a(betas.row(i).transpose()).values == a.values) {
        return betas.row(i).transpose();
      }
    }
    FAIL("unknown measurements");
    return {};
  };
  const A2BEvalReport r = evaluatePredictor(identity, male(), test);
  CHECK(calls == 20);
  CHECK(r.beta_mse == 0.0);
  CHECK(r.anthro_mae_mm == 0.0);
  CHECK(r.count == 20);
}

TEST_CASE("property: trained models beat the mean-shape baseline") {
  const A2BModel& model = smallSvr(male());
  const ShapeDistribution dist = humanDistribution(8);
  const Eigen::MatrixXd test = sampleShapes(dist, {SampleKind::kUniform, 1.0, 100, 31});
  const A2BEvalReport trained = evaluate(model, male(), test);
  const ShapePredictor mean = [&](const AnthroVector&) { return dist.mean; };
  const A2BEvalReport baseline = evaluatePredictor(mean, male(), test);
  MESSAGE("SVR " << trained.anthro_mae_mm << " mm, baseline " << baseline.anthro_mae_mm << " mm");
  CHECK(trained.anthro_mae_mm < baseline.anthro_mae_mm);
  CHECK(trained.beta_mse >= 0.0);
  CHECK(trained.per_measurement_mae_mm.size() == 36);
}

TEST_CASE("gender conversion") {
  const A2BModel& maleSvr = smallSvr(male());
  const A2BModel& femaleSvr = smallSvr(female());

  SUBCASE("same gender returns the shape") {
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(8, 0.4);
    const ShapeParams back = convertGender(ShapeParams{beta}, male(), male(), maleSvr);
    CHECK((back.beta - beta).cwiseAbs().maxCoeff() < 0.05);
  }
  SUBCASE("mismatched model gender") {
    CHECK(
        codeOf([&] { convertGender(ShapeParams{Eigen::VectorXd::Zero(8)}, male(), female(), maleSvr); }) ==
        ErrorCode::kGenderMismatch);
  }
  SUBCASE("cross-gender conversion applies the target regressor to the source measurements") {
    Rng rng(17);
    const Eigen::VectorXd maleBeta = anthrofit::testing::randomBeta(8, rng, 0.5);
    const ShapeParams converted = convertGender(ShapeParams{maleBeta}, male(), female(), femaleSvr);
    CHECK(converted.beta.size() == 7);
    CHECK(converted.beta == femaleSvr.predict(b2a(male(), ShapeParams{maleBeta})).beta);
  }
  SUBCASE("male to female keeps the measurements") {
    Rng rng(17);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      // The female shape space spans the male one without its last coefficient.
      Eigen::VectorXd maleBeta = anthrofit::testing::randomBeta(8, rng, 0.5);
      maleBeta(7) = 0.0;
      const AnthroVector source = b2a(male(), ShapeParams{maleBeta});
      const ShapeParams converted = convertGender(ShapeParams{maleBeta}, male(), female(), femaleSvr);
      const AnthroVector result = b2a(female(), converted);
      worst = std::max(worst, (result.values - source.values).cwiseAbs().mean());
    }
    MESSAGE("male to female measurement MAE " << worst << " mm");
    CHECK(worst < 1.0);
  }
}

TEST_CASE("input scaler round trip and zero spread") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const InputScaler s = InputScaler::fit(x);
  CHECK(s.std(1) == 1.0);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d v(rng.normal(0, 100), rng.normal(0, 100));
    CHECK((s.destandardize(s.standardize(v)) - v).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("persisted models are deterministic and round-trip") {
  const BodyModel body = toy::cylinder();
  NnTrainConfig cfg;
  cfg.hidden = {8, 8};
  cfg.iterations = 50;
  cfg.batch = 8;
  cfg.warmup = 16;
  cfg.seed = 5;
  const A2BModel a = trainNn(body, boxDistribution(2, 0.05), cfg);
  const A2BModel b = trainNn(body, boxDistribution(2, 0.05), cfg);
  CHECK(serializeA2B(a) == serializeA2B(b));

  const auto dir = scratchDir("a2b_persist");
  for (const A2BModel* m : {&a, &smallSvr(male())}) {
    saveA2B(dir / "model.a2b", *m);
    const A2BModel loaded = loadA2B(dir / "model.a2b");
    CHECK(serializeA2B(loaded) == serializeA2B(*m));
    CHECK(loaded.measurement_names == m->measurement_names);
    const BodyModel& src = m->kind == A2BKind::kNn ? body : male();
    const AnthroVector probe = b2a(src, ShapeParams{Eigen::VectorXd::Constant(src.beta_dim, 0.01)});
    CHECK(loaded.predict(probe).beta == m->predict(probe).beta);
  }

  auto bytes = serializeA2B(a);
  bytes[1] = '?';
  CHECK(codeOf([&] { parseA2B(bytes); }) == ErrorCode::kMagicMismatch);
}
