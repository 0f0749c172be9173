#include "dlcz/physics.hpp"

#include "dlcz/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dlcz::physics {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

// Below this |u| = |D| t^2 / 4 the series for h and j are used. The exact
// forms lose relative precision as y = sqrt(|u|) -> 0 and the overdamped
// form divides by y^4.
constexpr double kSeriesBound = 0.1;

// h(u) = sin^2(sqrt u) / u, continued analytically to u < 0 (sinh^2).
// Coefficients a_n = (-1)^n 2^(2n+1) / (2n+2)!.
void h_series(double u, double &h, double &hp) {
  double coef = 1.0; // a_0
  double upow = 1.0;
  h = 0.0;
  hp = 0.0;
  for (int n = 0; n < 12; ++n) {
    h += coef * upow;
    if (n + 1 < 12) {
      const double next = -coef * 4.0 / ((2.0 * n + 3.0) * (2.0 * n + 4.0));
      hp += (n + 1) * next * upow;
      coef = next;
    }
    upow *= u;
  }
}

// j(v) = sin(sqrt v) / sqrt v, series sum (-v)^n / (2n+1)!.
double j_series(double v) {
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n < 12; ++n) {
    term *= -v / ((2.0 * n) * (2.0 * n + 1.0));
    sum += term;
  }
  return sum;
}

// Exponentially damped shape functions evaluated together so the overdamped
// branch never forms sinh(y) on its own (it overflows long before the
// product with exp(-c t) underflows).
struct DampedShape {
  double eh = 0.0;  // exp(-ct) h(u)
  double ehp = 0.0; // exp(-ct) h'(u)
  double ej = 0.0;  // exp(-ct) j(4u)
};

DampedShape damped_shape(double c, double d, double t) {
  DampedShape s;
  const double ct = c * t;
  const double u = d * t * t / 4.0;
  if (std::abs(u) < kSeriesBound) {
    const double e = std::exp(-ct);
    double h, hp;
    h_series(u, h, hp);
    s.eh = e * h;
    s.ehp = e * hp;
    s.ej = e * j_series(4.0 * u);
  } else if (u > 0.0) {
    const double e = std::exp(-ct);
    const double y = std::sqrt(u);
    const double sn = std::sin(y);
    const double s2y = std::sin(2.0 * y);
    s.eh = e * sn * sn / (y * y);
    s.ehp = e * (s2y / (2.0 * y * y * y) - sn * sn / (y * y * y * y));
    s.ej = e * s2y / (2.0 * y);
  } else {
    const double y = std::sqrt(-u);
    const double w = std::exp(-ct + 2.0 * y);
    const double half = 0.5 * (1.0 - std::exp(-2.0 * y)); // e^-y sinh(y)
    const double quarter = 0.5 * (1.0 - std::exp(-4.0 * y)); // e^-2y sinh(2y)
    s.eh = w * half * half / (y * y);
    s.ehp = w * (half * half / (y * y * y * y) - quarter / (2.0 * y * y * y));
    s.ej = w * quarter / (2.0 * y);
  }
  return s;
}

struct Rates {
  double c;     // chi gamma / 2
  double omega; // Rabi frequency
  double d;     // Omega^2 - c^2
};

Rates rates(const ReadoutSpec &readout, const AtomSpec &atom) {
  const double c = readout.chi * atom.gamma / 2.0;
  const double omega = readout.rabi_frequency(atom);
  return {c, omega, omega * omega - c * c};
}

} // namespace

void AtomSpec::validate() const {
  if (!positive_finite(gamma))
    throw ConfigError("atom.gamma must be positive");
  if (!positive_finite(wavelength))
    throw ConfigError("atom.wavelength must be positive");
  if (!positive_finite(i_sat))
    throw ConfigError("atom.i_sat must be positive");
}

double od_from_atom_number(double n_atoms, double waist, const AtomSpec &atom) {
  return n_atoms * atom.cross_section() / (std::numbers::pi * waist * waist);
}

double atom_number_from_od(double od, double waist, const AtomSpec &atom) {
  return od * std::numbers::pi * waist * waist / atom.cross_section();
}

void EnsembleSpec::validate(const AtomSpec &atom) const {
  if (!std::isfinite(od) || od < 0.0)
    throw ConfigError("ensemble.od must be >= 0");
  if (!positive_finite(waist))
    throw ConfigError("ensemble.waist must be positive");
  if (n_atoms) {
    if (!std::isfinite(*n_atoms) || *n_atoms < 0.0)
      throw ConfigError("ensemble.n_atoms must be >= 0");
    const double implied = od_from_atom_number(*n_atoms, waist, atom);
    const double scale = std::max(std::abs(od), std::abs(implied));
    if (std::abs(implied - od) > 1e-12 * scale)
      throw ConfigError("ensemble.od inconsistent with ensemble.n_atoms (implied OD " +
                        std::to_string(implied) + ")");
  }
}

void ReadoutSpec::validate() const {
  if (!std::isfinite(power) || power < 0.0)
    throw DomainError("readout power must be >= 0");
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw DomainError("readout alpha must be >= 0");
  if (!std::isfinite(chi) || chi < 1.0)
    throw DomainError("cooperativity chi must be >= 1");
  if (!positive_finite(dt))
    throw DomainError("bin width must be positive");
  if (!positive_finite(read_duration))
    throw DomainError("read duration must be positive");
}

double ReadoutSpec::rabi_frequency(const AtomSpec &atom) const {
  return alpha * std::sqrt(power_mw()) * atom.gamma;
}

double wavepacket_density(double t, const ReadoutSpec &readout,
                          const AtomSpec &atom) {
  return wavepacket_density_jet(t, readout, atom).value;
}

DensityJet wavepacket_density_jet(double t, const ReadoutSpec &readout,
                                  const AtomSpec &atom) {
  if (!std::isfinite(t) || t < 0.0)
    throw DomainError("wavepacket time must be >= 0");
  readout.validate();
  atom.validate();

  const auto [c, omega, d] = rates(readout, atom);
  const double g = atom.gamma;
  const double chi = readout.chi;
  const double q = t * t / 4.0;
  const DampedShape s = damped_shape(c, d, t);

  DensityJet jet;
  jet.value = readout.dt * chi * g * omega * omega * q * s.eh;
  jet.d_chi = readout.dt * g * omega * omega * q *
              (s.eh * (1.0 - c * t) - chi * c * g * q * s.ehp);
  const double d_omega = readout.dt * chi * g * q *
                         (2.0 * omega * s.eh + 2.0 * omega * omega * omega * q * s.ehp);
  jet.d_alpha = d_omega * std::sqrt(readout.power_mw()) * g;
  return jet;
}

double wavepacket_survival(double t, const ReadoutSpec &readout,
                           const AtomSpec &atom) {
  if (!std::isfinite(t) || t < 0.0)
    throw DomainError("wavepacket time must be >= 0");
  readout.validate();
  atom.validate();
  const auto [c, omega, d] = rates(readout, atom);
  const double ct = c * t;
  const DampedShape s = damped_shape(c, d, t);
  const double surv = std::exp(-ct) + 0.5 * ct * ct * s.eh + ct * s.ej;
  return std::clamp(surv, 0.0, 1.0);
}

double wavepacket_quantile(double mass, const ReadoutSpec &readout,
                           const AtomSpec &atom) {
  if (!(mass >= 0.0 && mass < 1.0))
    throw DomainError("quantile mass must lie in [0, 1)");
  if (mass == 0.0)
    return 0.0;
  const double target = 1.0 - mass;
  const double c = readout.chi * atom.gamma / 2.0;
  double hi = 1.0 / c;
  while (wavepacket_survival(hi, readout, atom) > target) {
    hi *= 2.0;
    if (hi > 1e6 / c)
      throw DomainError("wavepacket quantile does not converge (Omega ~ 0?)");
  }
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (wavepacket_survival(mid, readout, atom) > target)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

std::vector<double> wavepacket_nodes(const ReadoutSpec &readout,
                                     const AtomSpec &atom) {
  readout.validate();
  atom.validate();
  const auto [c, omega, d] = rates(readout, atom);
  std::vector<double> nodes;
  if (d <= 0.0)
    return nodes;
  const double b = std::sqrt(d);
  for (int n = 1;; ++n) {
    const double tn = kTwoPi * n / b;
    if (tn > readout.read_duration)
      break;
    nodes.push_back(tn);
  }
  return nodes;
}

double chi_from_atom_number(double n_atoms, double waist, const AtomSpec &atom) {
  if (!std::isfinite(n_atoms) || n_atoms < 0.0)
    throw DomainError("atom number must be >= 0");
  if (!positive_finite(waist))
    throw DomainError("waist must be positive");
  atom.validate();
  const double k = atom.wavevector();
  return 1.0 + n_atoms / (waist * waist * k * k);
}

double chi_from_od(double od, const AtomSpec &atom) {
  if (!std::isfinite(od) || od < 0.0)
    throw DomainError("optical depth must be >= 0");
  return 1.0 + beta_theory(atom) * od;
}

double beta_theory(const AtomSpec &atom) {
  atom.validate();
  const double k = atom.wavevector();
  return std::numbers::pi / (atom.cross_section() * k * k);
}

double superradiant_decay_time(double chi, const AtomSpec &atom) {
  if (!std::isfinite(chi) || chi < 1.0)
    throw DomainError("cooperativity chi must be >= 1");
  atom.validate();
  return 2.0 / (chi * atom.gamma);
}

} // namespace dlcz::physics
