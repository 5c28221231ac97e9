#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/ik.h"
#include "anthrofit/rng.h"

#include <filesystem>
#include <string>
#include <vector>

namespace anthrofit::testing {

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratchDir(const std::string& name);

/// Path of a file below tests/data.
std::filesystem::path dataPath(const std::string& name);

Eigen::VectorXd randomBeta(int dim, Rng& rng, double sigma = 1.0);
PoseParams randomPose(int numJoints, Rng& rng, double sigma = 0.3);

/// Keypoints of a known body, optionally with Gaussian noise.
struct SyntheticSequence {
  Eigen::VectorXd beta;
  std::vector<PoseParams> poses;
  std::vector<FrameTargets> frames;
  std::vector<Pointsd> truth; // noiseless keypoints
};

/// Smoothly drifting poses of one shape: frame t is pose0 + t * drift.
SyntheticSequence makeSequence(
    const BodyModel& body,
    int numFrames,
    uint64_t seed,
    double noiseMm = 0.0,
    const std::string& regressor = "kpr_body");

/// Writes frames as JSON lines.
void writeFrames(const std::filesystem::path& path, const std::vector<FrameTargets>& frames);

double relativeError(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

} // namespace anthrofit::testing
