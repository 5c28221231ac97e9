#include "anthrofit/svr.h"

#include "anthrofit/error.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anthrofit {

double autoGamma(const Eigen::MatrixXd& x) {
  ANTHROFIT_THROW_IF(x.rows() < 1 || x.cols() < 1, ErrorCode::kTooFewSamples, "empty training matrix");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double variance = (x.rowwise() - mean).squaredNorm() / static_cast<double>(x.size());
  return variance > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * variance) : 1.0;
}

RbfKernelCache::RbfKernelCache(const Eigen::MatrixXd& x, double gamma, size_t cacheBytes)
    : x_(x), sqNorms_(x.rowwise().squaredNorm()), gamma_(gamma) {
  const size_t rowBytes = std::max<size_t>(1, static_cast<size_t>(x.rows()) * sizeof(double));
  capacity_ = std::max<size_t>(2, cacheBytes / rowBytes);
  where_.resize(static_cast<size_t>(x.rows()), lru_.end());
  rows_.resize(static_cast<size_t>(x.rows()));
}

const double* RbfKernelCache::row(int i) {
  if (where_[i] != lru_.end()) {
    lru_.splice(lru_.begin(), lru_, where_[i]);
    return rows_[i].data();
  }
  if (lru_.size() >= capacity_) {
    const int evict = lru_.back();
    lru_.pop_back();
    where_[evict] = lru_.end();
    rows_[evict] = {};
  }
  std::vector<double>& r = rows_[i];
  r.resize(static_cast<size_t>(x_.rows()));
  Eigen::Map<Eigen::VectorXd> out(r.data(), x_.rows());
  out.noalias() = x_ * x_.row(i).transpose();
  out = (-gamma_ * (sqNorms_.array() + sqNorms_(i) - 2.0 * out.array()).max(0.0)).exp();
  out(i) = 1.0;
  lru_.push_front(i);
  where_[i] = lru_.begin();
  return r.data();
}

SvrDual solveSvr(RbfKernelCache& kernel, const Eigen::VectorXd& y, const SvrConfig& cfg) {
  const int l = kernel.size();
  ANTHROFIT_THROW_IF(l < 1, ErrorCode::kTooFewSamples, "SVR needs at least one sample");
  ANTHROFIT_THROW_IF(y.size() != l, ErrorCode::kDimensionMismatch, "SVR target count differs from sample count");
  ANTHROFIT_THROW_IF(!(cfg.C > 0.0), ErrorCode::kInvalidConfig, "SVR C must be positive");
  ANTHROFIT_THROW_IF(!(cfg.epsilon >= 0.0), ErrorCode::kInvalidConfig, "SVR epsilon must be non-negative");
  ANTHROFIT_THROW_IF(!(cfg.tol > 0.0), ErrorCode::kInvalidConfig, "SVR tolerance must be positive");
  ANTHROFIT_THROW_IF(!y.allFinite(), ErrorCode::kNonFiniteInput, "SVR targets contain non-finite values");

  // Variables 0..l-1 carry sign +1 (alpha), l..2l-1 sign -1 (alpha*).
  const int n = 2 * l;
  const double C = cfg.C;
  const long maxIter = cfg.max_iter > 0 ? cfg.max_iter : std::max<long>(10'000'000, 100L * l);
  constexpr double kTau = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> a(n, 0.0);
  std::vector<double> G(n);
  std::vector<int> s(n);
  for (int i = 0; i < l; ++i) {
    s[i] = 1;
    s[i + l] = -1;
    G[i] = cfg.epsilon - y(i);
    G[i + l] = cfg.epsilon + y(i);
  }
  auto isUpper = [&](int t) { return a[t] >= C; };
  auto isLower = [&](int t) { return a[t] <= 0.0; };
  auto Q = [&](const double* kRow, int i, int t) { return s[i] * s[t] * kRow[t % l]; };

  SvrDual out;
  long iter = 0;
  double gap = kInf;
  for (;; ++iter) {
    // First index: maximal violation.
    double gmax = -kInf;
    int i = -1;
    for (int t = 0; t < n; ++t) {
      if (s[t] == 1) {
        if (!isUpper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          i = t;
        }
      } else if (!isLower(t) && G[t] >= gmax) {
        gmax = G[t];
        i = t;
      }
    }
    // Second index: largest decrease of the objective.
    double gmax2 = -kInf;
    int j = -1;
    double objMin = kInf;
    const double* Ki = i >= 0 ? kernel.row(i % l) : nullptr;
    if (i >= 0) {
      for (int t = 0; t < n; ++t) {
        if (s[t] == 1) {
          if (!isLower(t)) {
            const double gradDiff = gmax + G[t];
            gmax2 = std::max(gmax2, G[t]);
            if (gradDiff > 0.0) {
              double quad = 2.0 - 2.0 * s[i] * Q(Ki, i, t);
              quad = quad > 0.0 ? quad : kTau;
              const double objDiff = -(gradDiff * gradDiff) / quad;
              if (objDiff <= objMin) {
                objMin = objDiff;
                j = t;
              }
            }
          }
        } else if (!isUpper(t)) {
          const double gradDiff = gmax - G[t];
          gmax2 = std::max(gmax2, -G[t]);
          if (gradDiff > 0.0) {
            double quad = 2.0 + 2.0 * s[i] * Q(Ki, i, t);
            quad = quad > 0.0 ? quad : kTau;
            const double objDiff = -(gradDiff * gradDiff) / quad;
            if (objDiff <= objMin) {
              objMin = objDiff;
              j = t;
            }
          }
        }
      }
    }
    gap = gmax + gmax2;
    if (i < 0 || j < 0 || gap < cfg.tol) {
      break;
    }
    if (iter >= maxIter) {
      throw Error(
          ErrorCode::kNoConvergence,
          "SVR solver hit " + std::to_string(maxIter) + " iterations with KKT gap " + std::to_string(gap));
    }

    const double* Kj = kernel.row(j % l);
    Ki = kernel.row(i % l);
    const double Qij = Q(Ki, i, j);
    const double oldAi = a[i];
    const double oldAj = a[j];
    if (s[i] != s[j]) {
      double quad = 2.0 + 2.0 * Qij;
      quad = quad > 0.0 ? quad : kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > 0.0) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = C - diff;
        }
      } else if (a[j] > C) {
        a[j] = C;
        a[i] = C + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * Qij;
      quad = quad > 0.0 ? quad : kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) {
          a[i] = C;
          a[j] = sum - C;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > C) {
        if (a[j] > C) {
          a[j] = C;
          a[i] = sum - C;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    const double di = s[i] * (a[i] - oldAi);
    const double dj = s[j] * (a[j] - oldAj);
    for (int t = 0; t < l; ++t) {
      const double u = di * Ki[t] + dj * Kj[t];
      G[t] += u;
      G[t + l] -= u;
    }
  }

  // Offset from the free variables, or the middle of the feasible interval.
  int nFree = 0;
  double sumFree = 0.0;
  double ub = kInf;
  double lb = -kInf;
  for (int t = 0; t < n; ++t) {
    const double yG = s[t] * G[t];
    if (isUpper(t)) {
      if (s[t] == -1) {
        ub = std::min(ub, yG);
      } else {
        lb = std::max(lb, yG);
      }
    } else if (isLower(t)) {
      if (s[t] == 1) {
        ub = std::min(ub, yG);
      } else {
        lb = std::max(lb, yG);
      }
    } else {
      ++nFree;
      sumFree += yG;
    }
  }
  const double rho = nFree > 0 ? sumFree / nFree : 0.5 * (ub + lb);

  out.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), l);
  out.alpha_star = Eigen::Map<const Eigen::VectorXd>(a.data() + l, l);
  out.coef = out.alpha - out.alpha_star;
  out.bias = -rho;
  out.iterations = iter;
  out.gap = gap;
  return out;
}

Eigen::VectorXd SvrModel::predict(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd k = (-gamma * (support.rowwise() - x.transpose()).rowwise().squaredNorm()).array().exp();
  return coef.transpose() * k + bias;
}

SvrModel trainSvrModel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const SvrConfig& cfg) {
  ANTHROFIT_THROW_IF(x.rows() != y.rows(), ErrorCode::kDimensionMismatch, "SVR inputs and targets differ in count");
  ANTHROFIT_THROW_IF(!x.allFinite(), ErrorCode::kNonFiniteInput, "SVR inputs contain non-finite values");
  const double gamma = cfg.gamma > 0.0 ? cfg.gamma : autoGamma(x);
  RbfKernelCache kernel(x, gamma, cfg.cache_bytes);

  const auto n = x.rows();
  Eigen::MatrixXd coef(n, y.cols());
  SvrModel model;
  model.bias.resize(y.cols());
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    const SvrDual dual = solveSvr(kernel, y.col(k), cfg);
    coef.col(k) = dual.coef;
    model.bias(k) = dual.bias;
  }

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    if ((coef.row(i).array() != 0.0).any()) {
      keep.push_back(i);
    }
  }
  model.support.resize(static_cast<Eigen::Index>(keep.size()), x.cols());
  model.coef.resize(static_cast<Eigen::Index>(keep.size()), y.cols());
  for (size_t r = 0; r < keep.size(); ++r) {
    model.support.row(static_cast<Eigen::Index>(r)) = x.row(keep[r]);
    model.coef.row(static_cast<Eigen::Index>(r)) = coef.row(keep[r]);
  }
  model.gamma = gamma;
  model.epsilon = cfg.epsilon;
  model.C = cfg.C;
  return model;
}

} // namespace anthrofit
