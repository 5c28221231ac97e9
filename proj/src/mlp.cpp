#include "anthrofit/mlp.h"

#include "anthrofit/error.h"

#include <cmath>

namespace anthrofit {

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) {
  ANTHROFIT_THROW_IF(sizes.size() < 2, ErrorCode::kInvalidConfig, "network needs at least an input and an output size");
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    ANTHROFIT_THROW_IF(in < 1 || out < 1, ErrorCode::kInvalidConfig, "layer sizes must be positive");
    const double a = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w(r, c) = rng.uniform(-a, a);
      }
    }
    weights.push_back(std::move(w));
    biases.push_back(Eigen::VectorXd::Zero(out));
  }
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (weights.empty()) {
    return s;
  }
  s.push_back(inputDim());
  for (const auto& w : weights) {
    s.push_back(static_cast<int>(w.rows()));
  }
  return s;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = weights[l] * h;
    z.colwise() += biases[l];
    h = l + 1 < weights.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return h;
}

double Mlp::lossAndGradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradients& grad) const {
  const size_t L = weights.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);
  acts[0] = x;
  for (size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = weights[l] * acts[l];
    z.colwise() += biases[l];
    acts[l + 1] = l + 1 < L ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  const Eigen::MatrixXd diff = acts[L] - y;
  const double count = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / count;

  grad.weights.resize(L);
  grad.biases.resize(L);
  Eigen::MatrixXd delta = (2.0 / count) * diff;
  for (size_t l = L; l-- > 0;) {
    grad.weights[l].noalias() = delta * acts[l].transpose();
    grad.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weights[l].transpose() * delta;
      delta = back.array() * (1.0 - acts[l].array().square());
    }
  }
  return loss;
}

Eigen::VectorXd Mlp::parameters() const {
  Gradients g{weights, biases};
  return flatten(g);
}

void Mlp::setParameters(const Eigen::VectorXd& params) {
  Eigen::Index k = 0;
  for (auto& w : weights) {
    w = Eigen::Map<const Eigen::MatrixXd>(params.data() + k, w.rows(), w.cols());
    k += w.size();
  }
  for (auto& b : biases) {
    b = params.segment(k, b.size());
    k += b.size();
  }
  ANTHROFIT_THROW_IF(k != params.size(), ErrorCode::kDimensionMismatch, "parameter vector has the wrong length");
}

Eigen::VectorXd Mlp::flatten(const Gradients& grad) {
  Eigen::Index n = 0;
  for (const auto& w : grad.weights) {
    n += w.size();
  }
  for (const auto& b : grad.biases) {
    n += b.size();
  }
  Eigen::VectorXd out(n);
  Eigen::Index k = 0;
  for (const auto& w : grad.weights) {
    out.segment(k, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    k += w.size();
  }
  for (const auto& b : grad.biases) {
    out.segment(k, b.size()) = b;
    k += b.size();
  }
  return out;
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& w : net.weights) {
    m_.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    m_.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  }
  v_ = m_;
}

void Adam::step(Mlp& net, const Mlp::Gradients& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double stepSize = lr * std::sqrt(c2) / c1;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    param.array() -= stepSize * m.array() / (v.array().sqrt() + eps_ * std::sqrt(c2));
  };
  for (size_t l = 0; l < net.weights.size(); ++l) {
    update(net.weights[l], m_.weights[l], v_.weights[l], grad.weights[l]);
    update(net.biases[l], m_.biases[l], v_.biases[l], grad.biases[l]);
  }
}

} // namespace anthrofit
