#pragma once

#include <numbers>
#include <optional>
#include <vector>

namespace dlcz::physics {

inline constexpr double kSpeedOfLight = 299792458.0;   // m/s
inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Emitter constants for the |e> -> |g> transition that carries field 2.
///
/// `gamma` is an angular rate (rad/s). A linewidth quoted as "5.2 MHz"
/// enters as 2*pi*5.2e6 rad/s, which is the reading under which the
/// independent-atom coherence decay time (gamma/2)^-1 is ~61 ns.
struct AtomSpec {
  double gamma = kTwoPi * 5.2e6; ///< rad/s
  double wavelength = 852.3e-9;  ///< m
  double i_sat = 35.0;           ///< W/m^2 (3.5 mW/cm^2)

  /// Cesium D2 values used throughout the presets.
  static AtomSpec cesium_d2() { return {}; }
  static AtomSpec from_linewidth_mhz(double linewidth_mhz, double wavelength,
                                     double i_sat) {
    return {kTwoPi * linewidth_mhz * 1e6, wavelength, i_sat};
  }

  void validate() const;

  double wavevector() const { return kTwoPi / wavelength; }
  double angular_frequency() const {
    return kTwoPi * kSpeedOfLight / wavelength;
  }
  /// On-resonance cross section hbar*omega*gamma / (2 I_sat), m^2.
  double cross_section() const {
    return kHbar * angular_frequency() * gamma / (2.0 * i_sat);
  }

  friend bool operator==(const AtomSpec &, const AtomSpec &) = default;
};

struct EnsembleSpec {
  double od = 0.0;                ///< optical depth on |g> -> |e>
  double waist = 100e-6;          ///< photonic mode waist w0, m
  std::optional<double> n_atoms;  ///< atoms interacting with the mode

  /// Throws ConfigError unless od >= 0, waist > 0 and, when n_atoms is set,
  /// od agrees with n_atoms * sigma0 / (pi w0^2) to 1e-12 relative.
  void validate(const AtomSpec &atom) const;

  friend bool operator==(const EnsembleSpec &, const EnsembleSpec &) = default;
};

/// OD = N sigma0 / (pi w0^2).
double od_from_atom_number(double n_atoms, double waist, const AtomSpec &atom);
double atom_number_from_od(double od, double waist, const AtomSpec &atom);

/// Read-pulse parameters entering the wavepacket.
///
/// The Rabi frequency follows Omega = alpha * sqrt(P) * gamma with P in mW,
/// so `alpha` carries units of mW^-1/2 (alpha = 9.0 for the Fig.-3 data).
struct ReadoutSpec {
  double power = 0.3e-3;        ///< read power, W
  double alpha = 9.0;           ///< Rabi calibration, mW^-1/2
  double chi = 1.0;             ///< cooperativity, >= 1
  double dt = 1e-9;             ///< histogram bin width, s
  double read_duration = 840e-9; ///< s

  void validate() const;

  double power_mw() const { return power * 1e3; }
  double rabi_frequency(const AtomSpec &atom) const;

  friend bool operator==(const ReadoutSpec &, const ReadoutSpec &) = default;
};

/// Normalized conditional wavepacket p_c(t)/P_c for one bin of width dt
/// centred at t (seconds after read turn-on).
///
/// Handles all three damping regimes through a single analytic expression
/// (sin^2 underdamped, sinh^2 overdamped, (t/2)^2 at critical damping),
/// switching to a power series in D t^2/4 near D = Omega^2 - (chi gamma/2)^2 = 0.
/// Throws DomainError for t < 0 or an invalid spec.
double wavepacket_density(double t, const ReadoutSpec &readout,
                          const AtomSpec &atom);

/// Density together with its partial derivatives in chi and alpha.
struct DensityJet {
  double value = 0.0;
  double d_chi = 0.0;
  double d_alpha = 0.0;
};
DensityJet wavepacket_density_jet(double t, const ReadoutSpec &readout,
                                  const AtomSpec &atom);

/// Probability that emission happens after t for the untruncated density
/// (1 - CDF). Closed form; equals 1 at t = 0 and tends to 0.
double wavepacket_survival(double t, const ReadoutSpec &readout,
                           const AtomSpec &atom);

/// Time by which a fraction `mass` of the untruncated density has been emitted.
double wavepacket_quantile(double mass, const ReadoutSpec &readout,
                           const AtomSpec &atom);

/// Zeros t_n = 2 pi n / sqrt(Omega^2 - chi^2 gamma^2/4) inside the read
/// window. Empty when the read pulse is critically or over-damped.
std::vector<double> wavepacket_nodes(const ReadoutSpec &readout,
                                     const AtomSpec &atom);

/// chi = 1 + N / (w0^2 k^2).
double chi_from_atom_number(double n_atoms, double waist, const AtomSpec &atom);

/// chi = 1 + beta * OD, equivalent to chi_from_atom_number composed with the
/// OD-to-N relation.
double chi_from_od(double od, const AtomSpec &atom);

/// beta = pi / (sigma0 k^2).
double beta_theory(const AtomSpec &atom);

/// tau_sp = (chi gamma / 2)^-1.
double superradiant_decay_time(double chi, const AtomSpec &atom);

} // namespace dlcz::physics
