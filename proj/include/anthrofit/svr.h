#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <list>
#include <vector>

namespace anthrofit {

struct SvrConfig {
  double C = 3791.0;
  double epsilon = 0.012;
  /// RBF bandwidth; <= 0 selects 1 / (d * mean feature variance).
  double gamma = 0.0;
  /// Stop when the maximal KKT violation pair gap drops below this.
  double tol = 1e-3;
  /// 0 selects max(10^7, 100 n).
  long max_iter = 0;
  size_t cache_bytes = size_t{512} << 20;
};

double autoGamma(const Eigen::MatrixXd& x);

/// Rows of the RBF Gram matrix of the samples (rows of `x`), computed on
/// demand and kept in an LRU cache.
class RbfKernelCache {
 public:
  RbfKernelCache(const Eigen::MatrixXd& x, double gamma, size_t cacheBytes);

  int size() const {
    return static_cast<int>(x_.rows());
  }
  double gamma() const {
    return gamma_;
  }

  /// Row i of the Gram matrix. The pointer stays valid until two more
  /// distinct rows have been requested.
  const double* row(int i);

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd sqNorms_;
  double gamma_;
  size_t capacity_;
  std::list<int> lru_; // front = most recent
  std::vector<std::list<int>::iterator> where_;
  std::vector<std::vector<double>> rows_;
};

/// Dual solution of one epsilon-SVR. Prediction is sum_j coef_j k(x_j, x) + bias.
struct SvrDual {
  Eigen::VectorXd alpha; // n, multipliers of the upper tube constraints
  Eigen::VectorXd alpha_star; // n, multipliers of the lower tube constraints
  Eigen::VectorXd coef; // alpha - alpha_star
  double bias = 0.0;
  long iterations = 0;
  double gap = 0.0; // final maximal violating pair gap
};

/// SMO with second-order working set selection over the 2n dual variables.
/// Throws NoConvergence when max_iter is reached first.
SvrDual solveSvr(RbfKernelCache& kernel, const Eigen::VectorXd& y, const SvrConfig& cfg);

/// Independent scalar SVRs sharing support vectors and kernel.
struct SvrModel {
  Eigen::MatrixXd support; // S x d
  Eigen::MatrixXd coef; // S x k
  Eigen::VectorXd bias; // k
  double gamma = 0.0;
  double epsilon = 0.0;
  double C = 0.0;

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const;
};

/// One SVR per column of `y`; rows of `x` are samples.
SvrModel trainSvrModel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const SvrConfig& cfg);

} // namespace anthrofit
