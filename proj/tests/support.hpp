#pragma once

#include "dlcz/physics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace dlcz::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(Rng &rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

/// Adaptive Gauss-Kronrod integral of f over [a, b].
template <class F>
double integrate(F f, double a, double b, double tol = 1e-10, unsigned depth = 12) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, depth, tol);
}

/// Integral of density / dt over [0, infinity). Breakpoints follow the fast
/// rise geometrically and each oscillation lobe, so every piece is smooth.
inline double density_integral(const physics::ReadoutSpec &r, const physics::AtomSpec &atom) {
  const double c = r.chi * atom.gamma / 2.0;
  const double om = r.rabi_frequency(atom);
  const double d = om * om - c * c;
  const double slow = d >= 0.0 ? c : c - std::sqrt(-d);
  const double end = 40.0 / slow;
  std::vector<double> cuts{0.0, end};
  for (double t = 0.05 / c; t < end; t *= 2.0)
    cuts.push_back(t);
  if (d > 0.0)
    for (double lobe = 2.0 * std::numbers::pi / std::sqrt(d), t = lobe; t < end; t += lobe)
      cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  auto f = [&](double t) { return physics::wavepacket_density(t, r, atom) / r.dt; };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1],
                                                                         2, 1e-10);
  return sum;
}

/// Readout with the given Omega/Gamma at 1 mW.
inline physics::ReadoutSpec readout_with_ratio(double chi, double omega_over_gamma) {
  physics::ReadoutSpec r;
  r.power = 1e-3;
  r.alpha = omega_over_gamma;
  r.chi = chi;
  r.dt = 1e-9;
  r.read_duration = 840e-9;
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("dlcz_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace dlcz::testing
