#pragma once

#include <cmath>
#include <limits>

namespace dlcz {

/// A point estimate with its one-sigma standard error.
/// `defined == false` marks quantities whose denominator vanished
/// (e.g. conditional probabilities with no heralds).
struct Estimate {
  double value = 0.0;
  double error = 0.0;
  bool defined = true;

  static Estimate undefined() {
    return {std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(), false};
  }
};

} // namespace dlcz
