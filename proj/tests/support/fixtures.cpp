#include "fixtures.h"

#include "anthrofit/io.h"
#include "anthrofit/model_core.h"

#ifndef ANTHROFIT_TEST_DATA_DIR
#error "ANTHROFIT_TEST_DATA_DIR must be defined"
#endif

namespace anthrofit::testing {

namespace fs = std::filesystem;

fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("anthrofit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path dataPath(const std::string& name) {
  return fs::path(ANTHROFIT_TEST_DATA_DIR) / name;
}

Eigen::VectorXd randomBeta(int dim, Rng& rng, double sigma) {
  Eigen::VectorXd b(dim);
  for (int i = 0; i < dim; ++i) {
    b(i) = rng.normal(0.0, sigma);
  }
  return b;
}

PoseParams randomPose(int numJoints, Rng& rng, double sigma) {
  PoseParams p = PoseParams::zero(numJoints);
  for (int j = 0; j + 1 < numJoints; ++j) {
    for (int c = 0; c < 3; ++c) {
      p.body_pose(j, c) = rng.normal(0.0, sigma);
    }
  }
  p.global_orient = Vector3d(rng.normal(0.0, 0.3), rng.uniform(-3.0, 3.0), rng.normal(0.0, 0.3));
  p.translation = Vector3d(rng.uniform(-1.0, 1.0), rng.uniform(0.0, 0.5), rng.uniform(2.0, 4.0));
  return p;
}

SyntheticSequence makeSequence(
    const BodyModel& body,
    int numFrames,
    uint64_t seed,
    double noiseMm,
    const std::string& regressor) {
  Rng rng(seed);
  SyntheticSequence s;
  s.beta = randomBeta(body.beta_dim, rng);
  const PoseParams start = randomPose(body.numJoints(), rng);
  PoseParams drift = PoseParams::zero(body.numJoints());
  for (int j = 0; j + 1 < body.numJoints(); ++j) {
    for (int c = 0; c < 3; ++c) {
      drift.body_pose(j, c) = rng.normal(0.0, 0.02);
    }
  }
  drift.global_orient = Vector3d(0.0, 0.03, 0.0);
  drift.translation = Vector3d(0.01, 0.0, 0.0);
  const Eigen::MatrixXd& R = body.regressor(regressor);
  for (int t = 0; t < numFrames; ++t) {
    PoseParams p = start;
    p.body_pose += t * drift.body_pose;
    p.global_orient += t * drift.global_orient;
    p.translation += t * drift.translation;
    const Pointsd truth = R * forward<double>(body, s.beta, p).vertices;
    FrameTargets f;
    f.frame_id = std::to_string(t);
    f.regressor = regressor;
    f.keypoints = truth;
    for (Eigen::Index k = 0; k < truth.rows(); ++k) {
      for (int c = 0; c < 3; ++c) {
        f.keypoints(k, c) += rng.normal(0.0, noiseMm / 1000.0);
      }
    }
    s.poses.push_back(p);
    s.truth.push_back(truth);
    s.frames.push_back(std::move(f));
  }
  return s;
}

void writeFrames(const fs::path& path, const std::vector<FrameTargets>& frames) {
  std::string text;
  for (const auto& f : frames) {
    text += toJson(f).dump() + "\n";
  }
  writeText(path, text);
}

double relativeError(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

} // namespace anthrofit::testing
