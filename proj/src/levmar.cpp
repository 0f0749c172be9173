#include "dlcz/levmar.hpp"

#include <cmath>
#include <limits>

namespace dlcz::fit {

namespace {

Eigen::VectorXd project(const LeastSquaresProblem &prob, Eigen::VectorXd p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (prob.lower.size() && p[i] < prob.lower[i])
      p[i] = prob.lower[i];
    if (prob.upper.size() && p[i] > prob.upper[i])
      p[i] = prob.upper[i];
  }
  return p;
}

struct GaussNewtonStep {
  double decrease = 0.0; // predicted objective decrease
  double length = 0.0;   // norm of the step
};

// Gauss-Newton step over the parameters that are free to move (a parameter
// pinned at a bound with the gradient pushing outward is held fixed).
GaussNewtonStep free_step(const LeastSquaresProblem &prob, const Eigen::VectorXd &p,
                          const Eigen::MatrixXd &a, const Eigen::VectorXd &g) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const bool at_lower = prob.lower.size() && p[i] <= prob.lower[i] && g[i] > 0;
    const bool at_upper = prob.upper.size() && p[i] >= prob.upper[i] && g[i] < 0;
    if (!at_lower && !at_upper)
      free.push_back(i);
  }
  if (free.empty())
    return {};
  const auto n = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd af(n, n);
  Eigen::VectorXd gf(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gf[i] = g[free[i]];
    for (Eigen::Index j = 0; j < n; ++j)
      af(i, j) = a(free[i], free[j]);
  }
  const Eigen::VectorXd step = af.completeOrthogonalDecomposition().solve(gf);
  return {gf.dot(step), step.norm()};
}

} // namespace

LmResult levenberg_marquardt(const LeastSquaresProblem &prob,
                             const Eigen::VectorXd &start, const LmOptions &opt) {
  LmResult res;
  Eigen::VectorXd p = project(prob, start);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  prob.evaluate(p, r, &jac);
  double obj = r.squaredNorm();
  double lambda = opt.initial_damping;

  Eigen::VectorXd r_try;
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (!std::isfinite(obj)) {
      res.stop_reason = "non-finite objective";
      break;
    }
    if (obj == 0.0) {
      res.converged = true;
      res.stop_reason = "zero residual";
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;

    bool accepted = false;
    bool done = false;
    while (!accepted) {
      Eigen::MatrixXd m = a;
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        m(i, i) += lambda * std::max(a(i, i), 1e-300);
      const Eigen::VectorXd step = m.ldlt().solve(-g);
      const Eigen::VectorXd p_try = project(prob, p + step);
      prob.evaluate(p_try, r_try, nullptr);
      const double obj_try = r_try.squaredNorm();

      if (std::isfinite(obj_try) && obj_try < obj) {
        const double rel = (obj - obj_try) / obj;
        p = p_try;
        prob.evaluate(p, r, &jac);
        obj = r.squaredNorm();
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < opt.relative_tolerance) {
          res.converged = true;
          res.stop_reason = "relative objective decrease below tolerance";
          done = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // At a round-off-level objective the predicted decrease is noise;
          // a negligible step then also counts as converged.
          const auto gn = free_step(prob, p, a, g);
          res.converged = gn.decrease <= 1e-8 * obj || gn.length <= 1e-10 * (p.norm() + 1e-10);
          res.stop_reason = res.converged ? "no further decrease possible"
                                          : "damping saturated away from a minimum";
          done = true;
          break;
        }
      }
    }
    if (done) {
      ++res.iterations;
      break;
    }
  }
  if (!res.converged && res.stop_reason.empty())
    res.stop_reason = "iteration limit reached";

  res.params = p;
  res.residuals = r;
  res.jacobian = jac;
  res.objective = obj;
  const Eigen::MatrixXd a = jac.transpose() * jac;
  res.covariance = a.completeOrthogonalDecomposition().pseudoInverse();
  res.covariance = 0.5 * (res.covariance + res.covariance.transpose()).eval();
  return res;
}

} // namespace dlcz::fit
