#include "anthrofit/ik.h"

#include "anthrofit/error.h"
#include "anthrofit/model_core.h"

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace anthrofit {

double GaussianPosePrior::evaluate(const Pointsd& bodyPose, Pointsd& grad) const {
  grad += 2.0 * bodyPose;
  return bodyPose.squaredNorm();
}

std::string_view toString(PriorKind kind) {
  switch (kind) {
    case PriorKind::kGaussianPose:
      return "gaussian_pose";
    case PriorKind::kNone:
      return "none";
    case PriorKind::kExternal:
      return "external";
  }
  return "?";
}

PriorKind parsePriorKind(std::string_view name) {
  if (name == "gaussian_pose") {
    return PriorKind::kGaussianPose;
  }
  if (name == "none") {
    return PriorKind::kNone;
  }
  if (name == "external") {
    return PriorKind::kExternal;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown pose prior '" + std::string(name) + "'");
}

std::string_view toString(IKOptimizer kind) {
  switch (kind) {
    case IKOptimizer::kAdam:
      return "adam";
    case IKOptimizer::kLbfgs:
      return "lbfgs";
    case IKOptimizer::kLm:
      return "lm";
  }
  return "?";
}

IKOptimizer parseOptimizer(std::string_view name) {
  if (name == "adam") {
    return IKOptimizer::kAdam;
  }
  if (name == "lbfgs") {
    return IKOptimizer::kLbfgs;
  }
  if (name == "lm") {
    return IKOptimizer::kLm;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view toString(RefitMode mode) {
  return mode == RefitMode::kRefit ? "refit" : "swap";
}

RefitMode parseRefitMode(std::string_view name) {
  if (name == "refit") {
    return RefitMode::kRefit;
  }
  if (name == "swap" || name == "swap-only") {
    return RefitMode::kSwapOnly;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown refit mode '" + std::string(name) + "'");
}

Eigen::VectorXd IKParamLayout::pack(const Eigen::VectorXd& beta, const PoseParams& pose) const {
  Eigen::VectorXd x(size());
  if (beta_dim > 0) {
    x.head(beta_dim) = beta;
  }
  x.segment<3>(beta_dim) = pose.global_orient;
  for (int j = 1; j < num_joints; ++j) {
    x.segment<3>(beta_dim + 3 * j) = pose.body_pose.row(j - 1).transpose();
  }
  x.tail<3>() = pose.translation;
  return x;
}

void IKParamLayout::unpack(const Eigen::VectorXd& x, Eigen::VectorXd& beta, PoseParams& pose) const {
  if (beta_dim > 0) {
    beta = x.head(beta_dim);
  }
  pose.global_orient = x.segment<3>(beta_dim);
  pose.body_pose.resize(num_joints - 1, 3);
  for (int j = 1; j < num_joints; ++j) {
    pose.body_pose.row(j - 1) = x.segment<3>(beta_dim + 3 * j).transpose();
  }
  pose.translation = x.tail<3>();
}

namespace {

/// Partial derivatives of the Rodrigues rotation w.r.t. each axis-angle component.
std::array<Matrix3d, 3> rodriguesJacobian(const Vector3d& aa) {
  const double t2 = aa.squaredNorm();
  double a, b, da, db; // da = a'(t)/t, db = b'(t)/t
  if (t2 < 1e-4) {
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    da = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0;
    db = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0;
  } else {
    const double t = std::sqrt(t2);
    const double s = std::sin(t);
    const double c = std::cos(t);
    a = s / t;
    b = (1.0 - c) / t2;
    da = (t * c - s) / (t2 * t);
    db = (t * s - 2.0 * (1.0 - c)) / (t2 * t2);
  }
  const Matrix3d K = skew<double>(aa);
  const Matrix3d K2 = K * K;
  std::array<Matrix3d, 3> out;
  for (int k = 0; k < 3; ++k) {
    const Matrix3d E = skew<double>(Vector3d::Unit(k));
    out[k] = da * aa(k) * K + a * E + db * aa(k) * K2 + b * (E * K + K * E);
  }
  return out;
}

Vector3d axisAngleGradient(const Vector3d& aa, const Matrix3d& dR) {
  const auto jac = rodriguesJacobian(aa);
  return {dR.cwiseProduct(jac[0]).sum(), dR.cwiseProduct(jac[1]).sum(), dR.cwiseProduct(jac[2]).sum()};
}

bool isValid(const FrameTargets& t, Eigen::Index k, bool useMask) {
  if (useMask && !t.mask.empty() && !t.mask[static_cast<size_t>(k)]) {
    return false;
  }
  return true;
}

int countValid(const FrameTargets& t, bool useMask) {
  int n = 0;
  for (Eigen::Index k = 0; k < t.keypoints.rows(); ++k) {
    n += isValid(t, k, useMask) ? 1 : 0;
  }
  return n;
}

void checkTargets(const BodyModel& model, const FrameTargets& t, bool useMask) {
  const Eigen::MatrixXd& reg = model.regressor(t.regressor);
  ANTHROFIT_THROW_IF(
      reg.rows() != t.keypoints.rows(),
      ErrorCode::kKeypointCountMismatch,
      "frame '" + t.frame_id + "' has " + std::to_string(t.keypoints.rows()) + " keypoints, regressor '" +
          t.regressor + "' produces " + std::to_string(reg.rows()));
  ANTHROFIT_THROW_IF(
      !t.mask.empty() && static_cast<Eigen::Index>(t.mask.size()) != t.keypoints.rows(),
      ErrorCode::kKeypointCountMismatch,
      "frame '" + t.frame_id + "' mask length differs from its keypoint count");
  for (Eigen::Index k = 0; k < t.keypoints.rows(); ++k) {
    ANTHROFIT_THROW_IF(
        isValid(t, k, useMask) && !t.keypoints.row(k).allFinite(),
        ErrorCode::kNonFiniteInput,
        "frame '" + t.frame_id + "' keypoint " + std::to_string(k) + " is valid but not finite");
  }
}

const PosePrior* priorOf(const IKConfig& cfg) {
  static const GaussianPosePrior gaussian;
  switch (cfg.prior) {
    case PriorKind::kGaussianPose:
      return &gaussian;
    case PriorKind::kNone:
      return nullptr;
    case PriorKind::kExternal:
      ANTHROFIT_THROW_IF(!cfg.external_prior, ErrorCode::kInvalidConfig, "external prior selected but none given");
      return cfg.external_prior.get();
  }
  return nullptr;
}

} // namespace

namespace {

/// Gradient (layout order) of <gv, vertices> where `gv` is a cotangent on the
/// skinned vertices. Only vertices listed in `active` may have non-zero rows.
Eigen::VectorXd backpropVertices(
    const BodyModel& model,
    const ForwardState<double>& st,
    const PoseParams& pose,
    const Pointsd& gv,
    const std::vector<int>& active,
    const IKParamLayout& layout) {
  const int J = model.numJoints();
  const int V = model.numVertices();

  // Skinning -> per-joint transforms and posed rest vertices.
  std::vector<Matrix3d> dG(J, Matrix3d::Zero());
  std::vector<Vector3d> ds(J, Vector3d::Zero());
  Pointsd gRest = Pointsd::Zero(V, 3);
  for (const int v : active) {
    const Vector3d g = gv.row(v).transpose();
    const Vector3d p = st.posed_rest.row(v).transpose();
    Vector3d acc = Vector3d::Zero();
    for (int j = 0; j < J; ++j) {
      const double w = model.skin_weights(v, j);
      if (w == 0.0) {
        continue;
      }
      dG[j].noalias() += (w * g) * p.transpose();
      ds[j] += w * g;
      acc.noalias() += w * (st.global_rot[j].transpose() * g);
    }
    gRest.row(v) = acc.transpose();
  }

  // skin_trans = global_trans - global_rot * rest_joint
  std::vector<Vector3d> dt(J, Vector3d::Zero());
  std::vector<Vector3d> dJ(J, Vector3d::Zero());
  for (int j = 0; j < J; ++j) {
    const Vector3d rj = st.rest_joints.row(j).transpose();
    dt[j] += ds[j];
    dG[j].noalias() -= ds[j] * rj.transpose();
    dJ[j].noalias() -= st.global_rot[j].transpose() * ds[j];
  }

  // Forward kinematics in reverse topological order.
  std::vector<Matrix3d> dR(J, Matrix3d::Zero());
  for (int j = J - 1; j >= 1; --j) {
    const int p = model.parents[j];
    const Vector3d offset = (st.rest_joints.row(j) - st.rest_joints.row(p)).transpose();
    dG[p].noalias() += dt[j] * offset.transpose();
    const Vector3d q = st.global_rot[p].transpose() * dt[j];
    dJ[j] += q;
    dJ[p] -= q;
    dt[p] += dt[j];
    dG[p].noalias() += dG[j] * st.local_rot[j].transpose();
    dR[j].noalias() = st.global_rot[p].transpose() * dG[j];
  }
  dR[0] = dG[0];
  dJ[0] += dt[0];

  if (model.pose_dirs) {
    const Eigen::VectorXd gf =
        model.pose_dirs->transpose() * Eigen::Map<const Eigen::VectorXd>(gRest.data(), gRest.size());
    for (int j = 1; j < J; ++j) {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          dR[j](r, c) += gf(9 * (j - 1) + 3 * r + c);
        }
      }
    }
  }

  Eigen::VectorXd grad(layout.size());
  const int off = layout.beta_dim;
  grad.segment<3>(off) = axisAngleGradient(pose.global_orient, dR[0]);
  for (int j = 1; j < J; ++j) {
    grad.segment<3>(off + 3 * j) = axisAngleGradient(pose.body_pose.row(j - 1).transpose(), dR[j]);
  }
  grad.tail<3>() = gv.colwise().sum().transpose();

  if (layout.beta_dim > 0) {
    Pointsd dShaped = gRest;
    Pointsd dJoints(J, 3);
    for (int j = 0; j < J; ++j) {
      dJoints.row(j) = dJ[j].transpose();
    }
    dShaped.noalias() += model.joint_regressor.transpose() * dJoints;
    grad.head(layout.beta_dim) =
        model.shape_dirs.transpose() * Eigen::Map<const Eigen::VectorXd>(dShaped.data(), dShaped.size());
  }
  return grad;
}

std::vector<int> allVertices(int V) {
  std::vector<int> v(V);
  for (int i = 0; i < V; ++i) {
    v[i] = i;
  }
  return v;
}

/// Vertices with a non-zero weight in any valid keypoint row.
std::vector<int> supportOf(const Eigen::MatrixXd& reg, const FrameTargets& targets, bool useMask) {
  std::vector<int> out;
  for (Eigen::Index v = 0; v < reg.cols(); ++v) {
    for (Eigen::Index k = 0; k < reg.rows(); ++k) {
      if (reg(k, v) != 0.0 && isValid(targets, k, useMask)) {
        out.push_back(static_cast<int>(v));
        break;
      }
    }
  }
  return out;
}

} // namespace

IKLoss ikLoss(
    const BodyModel& model,
    const Eigen::VectorXd& beta,
    const PoseParams& pose,
    const FrameTargets& targets,
    const IKConfig& cfg) {
  const Eigen::MatrixXd& reg = model.regressor(targets.regressor);
  ANTHROFIT_THROW_IF(
      reg.rows() != targets.keypoints.rows(),
      ErrorCode::kKeypointCountMismatch,
      "target keypoint count differs from the regressor's");
  const int J = model.numJoints();
  const int K = static_cast<int>(reg.rows());

  ForwardState<double> st;
  forwardState<double>(model, beta, pose, st);
  const Pointsd kp = reg * st.vertices;

  IKLoss out;
  Pointsd gk = Pointsd::Zero(K, 3);
  for (int k = 0; k < K; ++k) {
    if (!isValid(targets, k, cfg.use_mask)) {
      continue;
    }
    const Vector3d d = (kp.row(k) - targets.keypoints.row(k)).transpose();
    out.joint_term += d.squaredNorm();
    gk.row(k) = 2.0 * cfg.lambda_joint * d.transpose();
    ++out.valid_keypoints;
  }
  Pointsd gBodyPose = Pointsd::Zero(J - 1, 3);
  double priorTerm = 0.0;
  if (const PosePrior* prior = priorOf(cfg)) {
    priorTerm = prior->evaluate(pose.body_pose, gBodyPose);
  }
  const double betaTerm = beta.squaredNorm();
  out.value = cfg.lambda_joint * out.joint_term + cfg.lambda_prior * priorTerm + cfg.lambda_beta * betaTerm;
  ANTHROFIT_THROW_IF(!std::isfinite(out.value), ErrorCode::kNonFiniteLoss, "IK loss is not finite");

  const IKParamLayout layout{cfg.freeze_shape ? 0 : model.beta_dim, J};
  const Pointsd gv = reg.transpose() * gk;
  out.gradient = backpropVertices(model, st, pose, gv, allVertices(model.numVertices()), layout);
  for (int j = 1; j < J; ++j) {
    out.gradient.segment<3>(layout.beta_dim + 3 * j) += cfg.lambda_prior * gBodyPose.row(j - 1).transpose();
  }
  if (layout.beta_dim > 0) {
    out.gradient.head(layout.beta_dim) += 2.0 * cfg.lambda_beta * beta;
  }
  return out;
}

namespace {

/// Residuals whose squared norm is the IK loss (Gaussian or no prior), and
/// their Jacobian in layout order.
struct Residuals {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
};

Residuals ikResiduals(
    const BodyModel& model,
    const Eigen::VectorXd& beta,
    const PoseParams& pose,
    const FrameTargets& targets,
    const IKConfig& cfg,
    const IKParamLayout& layout,
    const std::vector<int>& support,
    bool withJacobian) {
  const Eigen::MatrixXd& reg = model.regressor(targets.regressor);
  const int J = model.numJoints();
  const int K = static_cast<int>(reg.rows());
  const bool prior = cfg.prior == PriorKind::kGaussianPose;

  ForwardState<double> st;
  forwardState<double>(model, beta, pose, st);
  const Pointsd kp = reg * st.vertices;

  std::vector<int> rows;
  for (int k = 0; k < K; ++k) {
    if (isValid(targets, k, cfg.use_mask)) {
      rows.push_back(k);
    }
  }
  const int nKp = 3 * static_cast<int>(rows.size());
  const int nPrior = prior ? 3 * (J - 1) : 0;
  const int B = model.beta_dim;
  Residuals out;
  out.r.resize(nKp + nPrior + B);
  const double sj = std::sqrt(cfg.lambda_joint);
  const double sp = std::sqrt(cfg.lambda_prior);
  const double sb = std::sqrt(cfg.lambda_beta);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out.r(3 * static_cast<Eigen::Index>(i) + c) = sj * (kp(rows[i], c) - targets.keypoints(rows[i], c));
    }
  }
  for (int j = 1; j < J && prior; ++j) {
    out.r.segment<3>(nKp + 3 * (j - 1)) = sp * pose.body_pose.row(j - 1).transpose();
  }
  out.r.tail(B) = sb * beta;
  ANTHROFIT_THROW_IF(!out.r.allFinite(), ErrorCode::kNonFiniteLoss, "IK loss is not finite");
  if (!withJacobian) {
    return out;
  }

  out.jac = Eigen::MatrixXd::Zero(out.r.size(), layout.size());
  Pointsd gv = Pointsd::Zero(model.numVertices(), 3);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      for (const int v : support) {
        gv(v, c) = sj * reg(rows[i], v);
      }
      out.jac.row(3 * static_cast<Eigen::Index>(i) + c) =
          backpropVertices(model, st, pose, gv, support, layout).transpose();
      for (const int v : support) {
        gv(v, c) = 0.0;
      }
    }
  }
  for (int j = 1; j < J && prior; ++j) {
    for (int c = 0; c < 3; ++c) {
      out.jac(nKp + 3 * (j - 1) + c, layout.beta_dim + 3 * j + c) = sp;
    }
  }
  for (int b = 0; b < layout.beta_dim; ++b) {
    out.jac(nKp + nPrior + b, b) = sb;
  }
  return out;
}

} // namespace

PoseParams initialPose(
    const BodyModel& model,
    const Eigen::VectorXd& beta,
    const FrameTargets& targets,
    const IKConfig& cfg) {
  const int J = model.numJoints();
  PoseParams pose = PoseParams::zero(J);
  const Eigen::MatrixXd& reg = model.regressor(targets.regressor);
  const std::vector<std::string> names = model.keypointNames(targets.regressor);
  const PosedMesh rest = shapedTemplate<double>(model, beta);
  const Pointsd k0 = reg * rest.vertices;
  const Vector3d root = rest.joints.row(0).transpose();

  auto find = [&](const char* name) -> int {
    for (size_t k = 0; k < names.size(); ++k) {
      if (names[k] == name && isValid(targets, static_cast<Eigen::Index>(k), cfg.use_mask)) {
        return static_cast<int>(k);
      }
    }
    return -1;
  };
  const int pelvis = find("pelvis");
  const int neck = find("neck");
  const int lhip = find("left_hip");
  const int rhip = find("right_hip");

  auto frame = [](const Vector3d& up, const Vector3d& side, Matrix3d& f) {
    if (side.norm() < 1e-9) {
      return false;
    }
    const Vector3d x = side.normalized();
    const Vector3d yRaw = up - up.dot(x) * x;
    if (yRaw.norm() < 1e-9) {
      return false;
    }
    const Vector3d y = yRaw.normalized();
    f.col(0) = x;
    f.col(1) = y;
    f.col(2) = x.cross(y);
    return true;
  };

  if (pelvis >= 0 && neck >= 0 && lhip >= 0 && rhip >= 0) {
    const auto& t = targets.keypoints;
    Matrix3d fm, ft;
    if (frame((k0.row(neck) - k0.row(pelvis)).transpose(), (k0.row(lhip) - k0.row(rhip)).transpose(), fm) &&
        frame((t.row(neck) - t.row(pelvis)).transpose(), (t.row(lhip) - t.row(rhip)).transpose(), ft)) {
      pose.global_orient = rotationToAxisAngle(ft * fm.transpose());
      const Matrix3d R = rodrigues<double>(pose.global_orient);
      pose.translation = t.row(pelvis).transpose() - (R * (k0.row(pelvis).transpose() - root) + root);
      return pose;
    }
  }

  Vector3d sumT = Vector3d::Zero();
  Vector3d sumM = Vector3d::Zero();
  int n = 0;
  for (Eigen::Index k = 0; k < k0.rows(); ++k) {
    if (isValid(targets, k, cfg.use_mask)) {
      sumT += targets.keypoints.row(k).transpose();
      sumM += k0.row(k).transpose();
      ++n;
    }
  }
  if (n > 0) {
    pose.translation = (sumT - sumM) / n;
  }
  return pose;
}

namespace {

struct OptResult {
  Eigen::VectorXd x;
  IKLoss loss;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<IKLoss(const Eigen::VectorXd&)>;

constexpr int kMaxHalvings = 40;

bool smallChange(double before, double after, const IKConfig& cfg) {
  return std::abs(before - after) <= cfg.tol * std::max(1.0, std::abs(after));
}

IKLoss tryEval(const Objective& f, const Eigen::VectorXd& x) {
  try {
    return f(x);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFiniteLoss && e.code() != ErrorCode::kNonFiniteInput) {
      throw;
    }
    IKLoss bad;
    bad.value = std::numeric_limits<double>::infinity();
    return bad;
  }
}

// Adam; a step that would raise the loss is retried at half the step size,
// and the reduced step size is kept.
OptResult runAdam(const Objective& f, Eigen::VectorXd x, const IKConfig& cfg) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  OptResult r;
  r.loss = f(x);
  if (r.loss.gradient.norm() < cfg.grad_tol) {
    r.x = std::move(x);
    r.converged = true;
    return r;
  }
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  double lr = cfg.step;
  for (int t = 1; r.iterations < cfg.max_iters; ++t) {
    const Eigen::VectorXd& g = r.loss.gradient;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    const Eigen::VectorXd dir = (m / (1.0 - std::pow(b1, t))).array() /
        ((v / (1.0 - std::pow(b2, t))).array().sqrt() + eps);
    ++r.iterations;
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      Eigen::VectorXd xn = x - lr * dir;
      IKLoss cand = tryEval(f, xn);
      if (cand.value <= r.loss.value) {
        const double before = r.loss.value;
        x = std::move(xn);
        r.loss = std::move(cand);
        accepted = true;
        if (smallChange(before, r.loss.value, cfg) || r.loss.gradient.norm() < cfg.grad_tol) {
          r.converged = true;
        }
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) {
      // The momentum points uphill. Restart the moments once before giving up.
      if (t == 1) {
        r.converged = true;
        break;
      }
      m.setZero();
      v.setZero();
      t = 0;
      lr = cfg.step;
      continue;
    }
    if (r.converged) {
      break;
    }
  }
  r.x = std::move(x);
  return r;
}

// Limited-memory BFGS with Armijo backtracking.
OptResult runLbfgs(const Objective& f, Eigen::VectorXd x, const IKConfig& cfg) {
  OptResult r;
  r.loss = f(x);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;
  while (r.iterations < cfg.max_iters) {
    const Eigen::VectorXd& g = r.loss.gradient;
    if (g.norm() < cfg.grad_tol) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd q = g;
    std::vector<double> alphas(history.size());
    for (size_t i = history.size(); i-- > 0;) {
      const auto& [s, y] = history[i];
      alphas[i] = s.dot(q) / y.dot(s);
      q -= alphas[i] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      const double beta = y.dot(q) / y.dot(s);
      q += s * (alphas[i] - beta);
    }
    Eigen::VectorXd d = -q;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      history.clear();
      d = -g;
      slope = -g.squaredNorm();
    }
    double step = history.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    ++r.iterations;
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      Eigen::VectorXd xn = x + step * d;
      IKLoss cand = tryEval(f, xn);
      if (cand.value <= r.loss.value + 1e-4 * step * slope) {
        const double before = r.loss.value;
        Eigen::VectorXd s = xn - x;
        Eigen::VectorXd y = cand.gradient - g;
        if (s.dot(y) > 1e-16) {
          history.emplace_back(std::move(s), std::move(y));
          if (static_cast<int>(history.size()) > cfg.lbfgs_memory) {
            history.pop_front();
          }
        }
        x = std::move(xn);
        r.loss = std::move(cand);
        accepted = true;
        if (smallChange(before, r.loss.value, cfg)) {
          r.converged = true;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      r.converged = true;
    }
    if (r.converged) {
      break;
    }
  }
  r.x = std::move(x);
  return r;
}

using ResidualFn = std::function<Residuals(const Eigen::VectorXd&, bool)>;

Residuals tryResiduals(const ResidualFn& f, const Eigen::VectorXd& x) {
  try {
    return f(x, false);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFiniteLoss && e.code() != ErrorCode::kNonFiniteInput) {
      throw;
    }
    Residuals bad;
    bad.r = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
    return bad;
  }
}

// Levenberg-Marquardt with Marquardt's diagonal scaling. Every trial step
// counts as an iteration.
OptResult runLm(const ResidualFn& f, const Objective& loss, Eigen::VectorXd x, const IKConfig& cfg) {
  OptResult r;
  Residuals cur = f(x, true);
  double value = cur.r.squaredNorm();
  double mu = 1e-3;
  while (r.iterations < cfg.max_iters) {
    const Eigen::VectorXd g = cur.jac.transpose() * cur.r;
    if (2.0 * g.norm() < cfg.grad_tol) {
      r.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = cur.jac.transpose() * cur.jac;
    const Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12);
    bool accepted = false;
    while (r.iterations < cfg.max_iters && !accepted) {
      ++r.iterations;
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * diag;
      const Eigen::VectorXd dx = a.ldlt().solve(-g);
      const Eigen::VectorXd xn = x + dx;
      const Residuals cand = tryResiduals(f, xn);
      const double nv = cand.r.squaredNorm();
      if (nv <= value) {
        const double before = value;
        x = xn;
        value = nv;
        cur = f(x, true);
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (smallChange(before, value, cfg)) {
          r.converged = true;
        }
      } else {
        mu *= 4.0;
        if (mu > 1e16) {
          r.converged = true;
          break;
        }
      }
    }
    if (r.converged) {
      break;
    }
  }
  r.loss = loss(x);
  r.x = std::move(x);
  return r;
}

} // namespace

double keypointRmseMm(const Pointsd& predicted, const FrameTargets& targets, bool useMask) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index k = 0; k < predicted.rows(); ++k) {
    if (isValid(targets, k, useMask)) {
      sum += (predicted.row(k) - targets.keypoints.row(k)).squaredNorm();
      ++n;
    }
  }
  return n > 0 ? 1000.0 * std::sqrt(sum / n) : 0.0;
}

IKResult fitFrame(
    const BodyModel& model,
    const FrameTargets& targets,
    const std::optional<IKInit>& init,
    const IKConfig& cfg) {
  ANTHROFIT_THROW_IF(cfg.max_iters < 1, ErrorCode::kInvalidConfig, "max_iters must be at least 1");
  ANTHROFIT_THROW_IF(
      cfg.lambda_joint < 0.0 || cfg.lambda_prior < 0.0 || cfg.lambda_beta < 0.0,
      ErrorCode::kInvalidConfig,
      "loss weights must be non-negative");
  checkTargets(model, targets, cfg.use_mask);
  const int valid = countValid(targets, cfg.use_mask);
  ANTHROFIT_THROW_IF(
      valid < 4,
      ErrorCode::kTooFewKeypoints,
      "frame '" + targets.frame_id + "' has " + std::to_string(valid) + " valid keypoints, need at least 4");
  ANTHROFIT_THROW_IF(
      cfg.freeze_shape && !init, ErrorCode::kInvalidConfig, "a frozen shape needs an initial shape");

  Eigen::VectorXd beta = init ? init->shape.beta : Eigen::VectorXd::Zero(model.beta_dim);
  ANTHROFIT_THROW_IF(
      beta.size() != model.beta_dim, ErrorCode::kDimensionMismatch, "initial beta length differs from beta_dim");
  PoseParams pose = init && init->pose.body_pose.rows() == model.numJoints() - 1
      ? init->pose
      : initialPose(model, beta, targets, cfg);

  const IKParamLayout layout{cfg.freeze_shape ? 0 : model.beta_dim, model.numJoints()};
  const Objective f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd b = beta;
    PoseParams p = pose;
    layout.unpack(x, b, p);
    return ikLoss(model, b, p, targets, cfg);
  };
  const Eigen::VectorXd x0 = layout.pack(beta, pose);
  OptResult opt;
  const IKOptimizer method =
      cfg.optimizer == IKOptimizer::kLm && cfg.prior == PriorKind::kExternal ? IKOptimizer::kLbfgs : cfg.optimizer;
  switch (method) {
    case IKOptimizer::kAdam:
      opt = runAdam(f, x0, cfg);
      break;
    case IKOptimizer::kLbfgs:
      opt = runLbfgs(f, x0, cfg);
      break;
    case IKOptimizer::kLm: {
      const std::vector<int> support = supportOf(model.regressor(targets.regressor), targets, cfg.use_mask);
      const ResidualFn res = [&](const Eigen::VectorXd& x, bool withJac) {
        Eigen::VectorXd b = beta;
        PoseParams p = pose;
        layout.unpack(x, b, p);
        return ikResiduals(model, b, p, targets, cfg, layout, support, withJac);
      };
      opt = runLm(res, f, x0, cfg);
      break;
    }
  }

  IKResult r;
  r.frame_id = targets.frame_id;
  r.present = true;
  layout.unpack(opt.x, beta, pose);
  r.shape.beta = beta;
  r.pose = pose;
  r.final_loss = opt.loss.value;
  r.iterations = opt.iterations;
  r.converged = opt.converged;
  const PosedMesh mesh = forward<double>(model, beta, pose);
  r.joint_rmse_mm = keypointRmseMm(model.regressor(targets.regressor) * mesh.vertices, targets, cfg.use_mask);
  return r;
}

namespace {

IKResult failed(const FrameTargets& t, const std::string& message) {
  IKResult r;
  r.frame_id = t.frame_id;
  r.present = false;
  r.converged = false;
  r.error = message;
  return r;
}

} // namespace

std::vector<IKResult> fitSequence(const BodyModel& model, const std::vector<FrameTargets>& frames, const IKConfig& cfg) {
  std::vector<IKResult> out;
  out.reserve(frames.size());
  std::optional<IKInit> warm;
  for (const auto& frame : frames) {
    try {
      IKResult r = fitFrame(model, frame, warm, cfg);
      warm = IKInit{r.shape, r.pose};
      out.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnknownRegressor || e.code() == ErrorCode::kInvalidConfig) {
        throw;
      }
      out.push_back(failed(frame, e.what()));
    }
  }
  return out;
}

std::vector<IKResult> refitWithFixedShape(
    const BodyModel& model,
    const std::vector<FrameTargets>& frames,
    const ShapeParams& betaFixed,
    const IKConfig& cfg,
    const std::vector<IKResult>& previous) {
  ANTHROFIT_THROW_IF(
      betaFixed.beta.size() != model.beta_dim,
      ErrorCode::kDimensionMismatch,
      "fixed beta has " + std::to_string(betaFixed.beta.size()) + " entries, model expects " +
          std::to_string(model.beta_dim));
  ANTHROFIT_THROW_IF(!betaFixed.beta.allFinite(), ErrorCode::kNonFiniteInput, "fixed beta is not finite");
  ANTHROFIT_THROW_IF(
      !previous.empty() && previous.size() != frames.size(),
      ErrorCode::kFrameIdMismatch,
      "previous results and frames differ in count");
  for (size_t i = 0; i < previous.size(); ++i) {
    ANTHROFIT_THROW_IF(
        previous[i].frame_id != frames[i].frame_id,
        ErrorCode::kFrameIdMismatch,
        "frame '" + frames[i].frame_id + "' does not match previous result '" + previous[i].frame_id + "'");
  }

  std::vector<IKResult> out;
  out.reserve(frames.size());
  if (cfg.refit_mode == RefitMode::kSwapOnly) {
    ANTHROFIT_THROW_IF(
        previous.empty() && !frames.empty(), ErrorCode::kInvalidConfig, "swap-only mode needs previous results");
    for (size_t i = 0; i < frames.size(); ++i) {
      IKResult r = previous[i];
      if (!r.present) {
        out.push_back(std::move(r));
        continue;
      }
      const bool unchanged = r.shape.beta.size() == betaFixed.beta.size() && r.shape.beta == betaFixed.beta;
      r.shape = betaFixed;
      if (!unchanged) {
        try {
          checkTargets(model, frames[i], cfg.use_mask);
          const PosedMesh mesh = forward<double>(model, r.shape.beta, r.pose);
          r.joint_rmse_mm =
              keypointRmseMm(model.regressor(frames[i].regressor) * mesh.vertices, frames[i], cfg.use_mask);
          r.final_loss = ikLoss(model, r.shape.beta, r.pose, frames[i], cfg).value;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kUnknownRegressor) {
            throw;
          }
          r.error = e.what();
        }
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  IKConfig frozen = cfg;
  frozen.freeze_shape = true;
  std::optional<PoseParams> warm;
  for (size_t i = 0; i < frames.size(); ++i) {
    IKInit init{betaFixed, PoseParams{}};
    if (!previous.empty() && previous[i].present) {
      init.pose = previous[i].pose;
    } else if (warm) {
      init.pose = *warm;
    }
    try {
      IKResult r = fitFrame(model, frames[i], init, frozen);
      r.shape = betaFixed;
      warm = r.pose;
      out.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnknownRegressor || e.code() == ErrorCode::kInvalidConfig) {
        throw;
      }
      out.push_back(failed(frames[i], e.what()));
    }
  }
  return out;
}

std::vector<double> flattenPose(const PoseParams& pose) {
  std::vector<double> flat = {pose.global_orient.x(), pose.global_orient.y(), pose.global_orient.z()};
  for (Eigen::Index j = 0; j < pose.body_pose.rows(); ++j) {
    for (int c = 0; c < 3; ++c) {
      flat.push_back(pose.body_pose(j, c));
    }
  }
  return flat;
}

PoseParams unflattenPose(const std::vector<double>& flat, int numJoints) {
  ANTHROFIT_THROW_IF(
      static_cast<int>(flat.size()) != 3 * numJoints,
      ErrorCode::kDimensionMismatch,
      "pose has " + std::to_string(flat.size()) + " values, expected " + std::to_string(3 * numJoints));
  PoseParams p = PoseParams::zero(numJoints);
  p.global_orient = Vector3d(flat[0], flat[1], flat[2]);
  for (int j = 1; j < numJoints; ++j) {
    p.body_pose.row(j - 1) = Eigen::RowVector3d(flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]);
  }
  return p;
}

namespace {

std::string frameIdString(const nlohmann::json& j) {
  if (!j.contains("frame_id")) {
    throw Error(ErrorCode::kParseError, "frame without frame_id");
  }
  const auto& id = j["frame_id"];
  return id.is_string() ? id.get<std::string>() : id.dump();
}

} // namespace

FrameTargets frameTargetsFromJson(const nlohmann::json& j, const std::string& regressor) {
  FrameTargets t;
  try {
    t.frame_id = frameIdString(j);
    t.regressor = regressor;
    const auto& kps = j.at("keypoints");
    t.keypoints.resize(static_cast<Eigen::Index>(kps.size()), 3);
    for (size_t k = 0; k < kps.size(); ++k) {
      ANTHROFIT_THROW_IF(kps[k].size() != 3, ErrorCode::kParseError, "keypoints must be [x, y, z] triples");
      for (int c = 0; c < 3; ++c) {
        const auto& v = kps[k][static_cast<size_t>(c)];
        t.keypoints(static_cast<Eigen::Index>(k), c) =
            v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
      }
    }
    if (j.contains("mask") && !j["mask"].is_null()) {
      t.mask = j["mask"].get<std::vector<bool>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed keypoint frame: ") + e.what());
  }
  return t;
}

nlohmann::ordered_json toJson(const FrameTargets& t) {
  nlohmann::ordered_json j;
  j["frame_id"] = t.frame_id;
  auto kps = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < t.keypoints.rows(); ++k) {
    kps.push_back({t.keypoints(k, 0), t.keypoints(k, 1), t.keypoints(k, 2)});
  }
  j["keypoints"] = kps;
  if (!t.mask.empty()) {
    j["mask"] = t.mask;
  }
  return j;
}

nlohmann::ordered_json toJson(const IKResult& r) {
  nlohmann::ordered_json j;
  j["frame_id"] = r.frame_id;
  j["present"] = r.present;
  if (r.present) {
    j["beta"] = std::vector<double>(r.shape.beta.data(), r.shape.beta.data() + r.shape.beta.size());
    j["pose"] = flattenPose(r.pose);
    j["translation"] = {r.pose.translation.x(), r.pose.translation.y(), r.pose.translation.z()};
  } else {
    j["beta"] = nullptr;
    j["pose"] = nullptr;
    j["translation"] = nullptr;
  }
  j["converged"] = r.converged;
  j["joint_rmse_mm"] = r.joint_rmse_mm;
  j["iterations"] = r.iterations;
  j["final_loss"] = r.final_loss;
  if (!r.error.empty()) {
    j["error"] = r.error;
  }
  return j;
}

IKResult ikResultFromJson(const nlohmann::json& j, int numJoints) {
  IKResult r;
  try {
    r.frame_id = frameIdString(j);
    const bool hasShape = j.contains("beta") && j["beta"].is_array();
    r.present = j.value("present", hasShape);
    if (r.present) {
      const auto beta = j.at("beta").get<std::vector<double>>();
      r.shape.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
      r.pose = unflattenPose(j.at("pose").get<std::vector<double>>(), numJoints);
      if (j.contains("translation") && j["translation"].is_array()) {
        const auto t = j["translation"].get<std::vector<double>>();
        ANTHROFIT_THROW_IF(t.size() != 3, ErrorCode::kParseError, "translation must have 3 entries");
        r.pose.translation = Vector3d(t[0], t[1], t[2]);
      }
    }
    r.converged = j.value("converged", r.present);
    r.joint_rmse_mm = j.value("joint_rmse_mm", 0.0);
    r.iterations = j.value("iterations", 0);
    r.final_loss = j.value("final_loss", 0.0);
    r.error = j.value("error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed result frame: ") + e.what());
  }
  return r;
}

} // namespace anthrofit
