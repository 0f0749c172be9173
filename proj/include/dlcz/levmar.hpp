#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace dlcz::fit {

/// Weighted least-squares problem: residuals r(p) (already divided by their
/// errors) and, optionally, the Jacobian dr/dp.
struct LeastSquaresProblem {
  Eigen::Index n_params = 0;
  /// Fills `r`; fills `jac` when non-null.
  std::function<void(const Eigen::VectorXd &p, Eigen::VectorXd &r,
                     Eigen::MatrixXd *jac)>
      evaluate;
  Eigen::VectorXd lower; ///< empty = unbounded
  Eigen::VectorXd upper;
};

struct LmOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10; ///< on the objective decrease
  double initial_damping = 1e-3;
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd covariance; ///< (J^T J)^-1 at the optimum
  double objective = 0.0;     ///< sum of squared residuals
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Damped Gauss-Newton (Levenberg-Marquardt, Marquardt diagonal scaling)
/// with box constraints enforced by projection. Stops when an accepted step
/// lowers the objective by less than `relative_tolerance` (relative), or when
/// damping saturates at a point where the Gauss-Newton model predicts no
/// further decrease. Never throws on non-convergence; inspect `converged`.
LmResult levenberg_marquardt(const LeastSquaresProblem &problem,
                             const Eigen::VectorXd &start,
                             const LmOptions &options = {});

} // namespace dlcz::fit
