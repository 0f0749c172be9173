#pragma once

#include "dlcz/estimate.hpp"
#include "dlcz/levmar.hpp"
#include "dlcz/physics.hpp"

#include <complex>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace dlcz::od {

/// Slowly varying probe envelope on a uniform time grid.
struct ProbePulse {
  std::vector<std::complex<double>> envelope;
  double sample_period = 1e-9; ///< s
  double detuning = 0.0;       ///< carrier detuning from resonance, rad/s

  static constexpr std::size_t kMinSamples = 1024;

  /// Throws DomainError for fewer than kMinSamples samples, a nonpositive
  /// period or non-finite samples.
  void validate() const;
  std::size_t size() const { return envelope.size(); }
  std::vector<double> intensity() const;
  /// sum |E|^2 * sample_period
  double energy() const;
};

/// Real envelope with a flat top of `duration` and raised-cosine edges of
/// `edge` each, starting at `onset`.
ProbePulse flat_top_pulse(std::size_t samples, double sample_period, double onset,
                          double duration, double edge, double detuning = 0.0);
/// Gaussian envelope with the given intensity FWHM centred at `center`.
ProbePulse gaussian_pulse(std::size_t samples, double sample_period, double center,
                          double fwhm, double detuning = 0.0);

/// Linear two-level-medium field transfer at total detuning `delta` (rad/s):
/// exp[-(od/2) (gamma/2) / (gamma/2 - i delta)].
std::complex<double> field_transfer(double delta, double od,
                                    const physics::AtomSpec &atom);

/// Propagates the envelope through a medium of optical depth `od` in the
/// frequency domain (4x zero padding). od = 0 returns the input unchanged.
ProbePulse propagate(const ProbePulse &pulse, double od, const physics::AtomSpec &atom);

/// Impulse response of the medium without its delta-function part:
/// h(t) = -exp(-gamma t/2) sqrt(a g / t) J1(2 sqrt(a g t)), a = od/2, g = gamma/2,
/// and 0 for t < 0.
double impulse_response_tail(double t, double od, const physics::AtomSpec &atom);

enum class OdMethod { log_ratio, lorentzian_scan, pulse_shape };
std::string_view method_name(OdMethod m);

struct ODEstimate {
  Estimate od;
  OdMethod method = OdMethod::log_ratio;
  int iterations = 0;
  double chi_squared_reduced = 0.0;
};

/// od = -ln(v_f / v_i). Throws DomainError unless 0 < v_f <= v_i.
ODEstimate od_log_ratio(double v_i, double v_f);
/// Same with first-order propagation of the intensity errors.
ODEstimate od_log_ratio(Estimate v_i, Estimate v_f);

struct ScanPoint {
  double detuning = 0.0;     ///< rad/s
  double transmission = 0.0; ///< I / I0
  double sigma = 0.0;        ///< optional one-sigma error; <= 0 means unknown
};

/// Fits I/I0 = exp[-od (gamma/2)^2 / (delta^2 + (gamma/2)^2)]. Needs >= 5
/// points with detunings reaching -gamma and +gamma. Unknown errors are
/// estimated from the residual scatter. Throws ConvergenceError.
ODEstimate od_lorentzian_scan(std::span<const ScanPoint> points,
                              const physics::AtomSpec &atom,
                              const fit::LmOptions &options = {});
/// Alternative reading: fits -ln T = od (gamma/2)^2 / (delta^2 + (gamma/2)^2)
/// directly (linear in od).
ODEstimate od_lorentzian_profile(std::span<const ScanPoint> points,
                                 const physics::AtomSpec &atom);

/// One-parameter least-squares fit of |propagate(input, od)| to |output|.
/// The error is scaled by the residual scatter. Throws DataError when the
/// grids differ, ConvergenceError on failure.
ODEstimate od_pulse_shape(const ProbePulse &input, const ProbePulse &output,
                          const physics::AtomSpec &atom,
                          const fit::LmOptions &options = {});

/// Two-column trace files: "time_ns,amplitude" header then samples. Written
/// amplitudes are |E|. Reading checks the grid is uniform.
void save_trace(const std::filesystem::path &path, const ProbePulse &pulse);
ProbePulse load_trace(const std::filesystem::path &path);

/// Scan files: "detuning_MHz,transmission" header; detunings are cyclic
/// frequencies and are converted to rad/s.
void save_scan(const std::filesystem::path &path, std::span<const ScanPoint> points);
std::vector<ScanPoint> load_scan(const std::filesystem::path &path);

} // namespace dlcz::od
