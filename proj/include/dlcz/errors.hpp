#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dlcz {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Invalid or inconsistent configuration (bad units, violated spec invariants).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (unsorted events, bad file lines).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative fit stopped without meeting its convergence test.
/// Carries the best parameter vector seen so callers can report it.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string &what, std::vector<double> best_point,
                   double best_objective)
      : std::runtime_error(what), best_point_(std::move(best_point)),
        best_objective_(best_objective) {}

  const std::vector<double> &best_point() const { return best_point_; }
  double best_objective() const { return best_objective_; }

private:
  std::vector<double> best_point_;
  double best_objective_;
};

} // namespace dlcz
