#pragma once

#include "anthrofit/rng.h"

#include <Eigen/Core>

#include <vector>

namespace anthrofit {

/// Fully connected network with tanh hidden layers and a linear output.
/// Samples are columns: forward maps an (in x N) batch to (out x N).
class Mlp {
 public:
  Mlp() = default;

  /// Xavier-Glorot uniform weights, zero biases. `sizes` = {in, h1, ..., out}.
  Mlp(const std::vector<int>& sizes, Rng& rng);

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  /// Mean squared error over every entry of the batch, and its gradient.
  double lossAndGradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradients& grad) const;

  int inputDim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
  }
  int outputDim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
  }
  std::vector<int> sizes() const;

  /// All weights then all biases, layer by layer, column-major.
  Eigen::VectorXd parameters() const;
  void setParameters(const Eigen::VectorXd& params);
  static Eigen::VectorXd flatten(const Gradients& grad);

  std::vector<Eigen::MatrixXd> weights; // layer l: out_l x in_l
  std::vector<Eigen::VectorXd> biases;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Mlp& net, const Mlp::Gradients& grad);

  double lr;

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  Mlp::Gradients m_, v_;
};

} // namespace anthrofit
