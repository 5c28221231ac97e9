#pragma once

#include "anthrofit/geometry.h"
#include "anthrofit/rng.h"
#include "anthrofit/svr.h"

#include <Eigen/Core>

#include <vector>

namespace anthrofit::testing {

Eigen::MatrixXd randomMatrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sigma = 1.0);

/// Dense RBF Gram matrix of the rows of `x`.
Eigen::MatrixXd gram(const Eigen::MatrixXd& x, double gamma);

struct QpSolution {
  Eigen::VectorXd coef;
  double bias = 0.0;
};

/// Epsilon-SVR dual by accelerated projected gradient over z = [alpha; alpha*]
/// with the equality constraint sum(alpha - alpha*) = 0 handled inside the
/// projection (bisection on its multiplier).
QpSolution qpOracle(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double C, double eps);

/// Largest violation of the epsilon-insensitive KKT conditions.
double kktViolation(const SvrDual& dual, const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double C, double eps);

struct SvrOracleCheck {
  double prediction_gap = 0.0; // largest |SMO - oracle| over the probes
  double kkt_violation = 0.0;
  bool bounds_ok = true; // 0 <= alpha, alpha* <= C and sum(coef) = 0
};

/// Random 1-D (even problems) or 2-D (odd) regression problem with 20 to 40
/// points, solved by SMO at `tol` and by the oracle.
SvrOracleCheck svrOracleProblem(int problem, Rng& rng, double tol);

/// Gift wrapping: O(n) per hull vertex, farthest point wins on collinear ties.
std::vector<Point2<double>> bruteForceHull(const std::vector<Point2<double>>& pts);

} // namespace anthrofit::testing
