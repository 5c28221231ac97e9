#pragma once

#include "anthrofit/body_model.h"
#include "anthrofit/types.h"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace anthrofit {

/// Pose prior term: returns the sum of squared latent values for a body pose
/// and adds its gradient w.r.t. the (J-1) x 3 body pose to `grad`.
class PosePrior {
 public:
  virtual ~PosePrior() = default;
  virtual double evaluate(const Pointsd& bodyPose, Pointsd& grad) const = 0;
};

/// Latent = body pose itself, so the term is the sum of squared angles.
class GaussianPosePrior : public PosePrior {
 public:
  double evaluate(const Pointsd& bodyPose, Pointsd& grad) const override;
};

enum class PriorKind { kGaussianPose, kNone, kExternal };
/// kLm is Levenberg-Marquardt on the residual form of the loss. With an
/// external pose prior it falls back to kLbfgs.
enum class IKOptimizer { kAdam, kLbfgs, kLm };
enum class RefitMode { kRefit, kSwapOnly };

std::string_view toString(PriorKind kind);
PriorKind parsePriorKind(std::string_view name);
std::string_view toString(IKOptimizer kind);
IKOptimizer parseOptimizer(std::string_view name);
std::string_view toString(RefitMode mode);
RefitMode parseRefitMode(std::string_view name);

struct IKConfig {
  double lambda_joint = 10.0;
  double lambda_prior = 0.0007;
  double lambda_beta = 0.01;
  PriorKind prior = PriorKind::kGaussianPose;
  std::shared_ptr<const PosePrior> external_prior; // prior == kExternal

  IKOptimizer optimizer = IKOptimizer::kLm;
  int max_iters = 300;
  /// Converged when an accepted step changes the loss by less than
  /// tol * max(1, loss), or the gradient norm drops below grad_tol.
  double tol = 1e-12;
  double grad_tol = 1e-10;
  /// Adam: initial step, halved whenever a step would increase the loss.
  double step = 0.1;
  int lbfgs_memory = 10;

  /// Ignore keypoints whose mask entry is false.
  bool use_mask = true;
  /// Optimize pose and translation only.
  bool freeze_shape = false;
  RefitMode refit_mode = RefitMode::kRefit;
};

/// 3D keypoint targets of one frame.
struct FrameTargets {
  std::string frame_id;
  Pointsd keypoints; // K x 3, meters
  std::vector<bool> mask; // empty = all valid
  std::string regressor = "joint_regressor";
};

struct IKResult {
  std::string frame_id;
  bool present = false; // false when the frame could not be fitted
  ShapeParams shape;
  PoseParams pose;
  double final_loss = 0.0;
  double joint_rmse_mm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string error;
};

/// Flat parameter vector: [beta (unless frozen), global_orient, body_pose row-major, translation].
struct IKParamLayout {
  int beta_dim = 0; // 0 when the shape is frozen
  int num_joints = 0;

  int size() const {
    return beta_dim + 3 * num_joints + 3;
  }
  Eigen::VectorXd pack(const Eigen::VectorXd& beta, const PoseParams& pose) const;
  /// Writes the free parts; a frozen shape is left untouched.
  void unpack(const Eigen::VectorXd& x, Eigen::VectorXd& beta, PoseParams& pose) const;
};

struct IKLoss {
  double value = 0.0;
  Eigen::VectorXd gradient; // in IKParamLayout order
  double joint_term = 0.0; // sum of masked squared keypoint errors, m^2
  int valid_keypoints = 0;
};

/// Weighted loss and its exact gradient (reverse mode through regression,
/// skinning, kinematics, pose correctives and shape blendshapes).
IKLoss ikLoss(
    const BodyModel& model,
    const Eigen::VectorXd& beta,
    const PoseParams& pose,
    const FrameTargets& targets,
    const IKConfig& cfg);

/// Closed-form global orientation and translation from the pelvis-neck and
/// hip-hip axes (keypoints named pelvis, neck, left_hip, right_hip); falls
/// back to centroid alignment when they are unavailable.
PoseParams initialPose(const BodyModel& model, const Eigen::VectorXd& beta, const FrameTargets& targets, const IKConfig& cfg);

struct IKInit {
  ShapeParams shape;
  PoseParams pose;
};

IKResult fitFrame(
    const BodyModel& model,
    const FrameTargets& targets,
    const std::optional<IKInit>& init,
    const IKConfig& cfg);

/// Frame t starts from the most recent fitted frame.
/// Per-frame failures are recorded and the sequence continues.
std::vector<IKResult> fitSequence(const BodyModel& model, const std::vector<FrameTargets>& frames, const IKConfig& cfg);

/// Every result carries exactly `betaFixed`. Refit mode re-optimizes pose and
/// translation from `previous` (or from scratch when empty); swap-only mode
/// keeps the previous pose and only replaces the shape.
std::vector<IKResult> refitWithFixedShape(
    const BodyModel& model,
    const std::vector<FrameTargets>& frames,
    const ShapeParams& betaFixed,
    const IKConfig& cfg,
    const std::vector<IKResult>& previous = {});

/// Root mean squared distance over masked-in keypoints, in mm.
double keypointRmseMm(const Pointsd& predicted, const FrameTargets& targets, bool useMask);

FrameTargets frameTargetsFromJson(const nlohmann::json& j, const std::string& regressor);
nlohmann::ordered_json toJson(const FrameTargets& t);
nlohmann::ordered_json toJson(const IKResult& r);
IKResult ikResultFromJson(const nlohmann::json& j, int numJoints);

/// Pose as a flat J*3 list, global orientation first.
std::vector<double> flattenPose(const PoseParams& pose);
PoseParams unflattenPose(const std::vector<double>& flat, int numJoints);

} // namespace anthrofit
