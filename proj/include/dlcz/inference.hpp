#pragma once

#include "dlcz/estimate.hpp"
#include "dlcz/levmar.hpp"
#include "dlcz/physics.hpp"
#include "dlcz/statistics.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlcz::fit {

/// One normalized wavepacket ready for fitting: y_k = p_c(t_k) / P_c.
struct CurveData {
  std::vector<double> t;     ///< bin centres, s
  std::vector<double> y;     ///< normalized conditional probability per bin
  std::vector<double> sigma; ///< one-sigma errors on y
  double power = 0.0;        ///< read power, W
  double bin_width = 1e-9;   ///< s
  double read_duration = 0.0;
  double od = std::numeric_limits<double>::quiet_NaN(); ///< label only
  /// Coincidences behind `y`; when positive, refits weight bins by the
  /// model-predicted Poisson variance instead of the observed counts.
  double counts = 0.0;
};

/// Normalizes heralded bin counts by the coincidence total. Empty bins get
/// an error floor of one count; `counts` is set to the coincidence total. Throws DataError when no heralded field-2
/// click was recorded.
CurveData curve_from_wavepacket(const stats::Wavepacket &wp, double power,
                                double od = std::numeric_limits<double>::quiet_NaN());

enum class FitMode { global, per_curve };

struct WavepacketFitSettings {
  LmOptions lm;
  std::vector<double> chi_starts{1.5, 3.0, 6.0};
  std::vector<double> alpha_starts{3.0, 9.0, 27.0};
  /// Bins after the time holding this fraction of the fitted wavepacket's
  /// mass are dropped.
  double window_mass = 0.999;
  /// After the first pass, bin errors become sqrt(max(model count, 1)) for
  /// curves with known counts. Removes the low-count bias of data errors.
  bool model_errors = true;
  /// Curves with power below the threshold have their weight multiplied by
  /// `low_power_weight` (errors divided by its square root).
  double low_power_threshold = 0.0; ///< W
  double low_power_weight = 1.0;
};

struct WavepacketFit {
  Estimate chi;
  Estimate alpha; ///< mW^-1/2
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double chi_squared = 0.0;
  double chi_squared_reduced = 0.0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::size_t start_index = 0;        ///< winning multistart branch
  std::vector<std::size_t> curves;    ///< indices into the input curves
  std::vector<std::size_t> window;    ///< bins used per curve
  std::vector<std::vector<double>> residuals; ///< (y - model)/sigma per curve
};

/// Weighted squared-residual objective of a set of curves sharing (chi, alpha).
class WavepacketObjective {
public:
  WavepacketObjective(std::vector<CurveData> curves, physics::AtomSpec atom,
                      std::vector<std::size_t> window, std::vector<double> weights);

  /// Sum over curves and windowed bins of ((y - model) / sigma)^2.
  double value(double chi, double alpha) const;
  /// Analytic gradient of value() in (chi, alpha).
  Eigen::Vector2d gradient(double chi, double alpha) const;

  LeastSquaresProblem problem() const;
  std::size_t n_residuals() const;
  const std::vector<CurveData> &curves() const { return curves_; }
  const std::vector<std::size_t> &window() const { return window_; }

private:
  void evaluate(double chi, double alpha, Eigen::VectorXd &r,
                Eigen::MatrixXd *jac) const;

  std::vector<CurveData> curves_;
  physics::AtomSpec atom_;
  std::vector<std::size_t> window_;
  std::vector<double> scale_; // 1 / (sigma_eff) factor per curve weight
};

/// Fits normalized wavepackets with the closed-form density. `global` shares
/// (chi, alpha) across all curves (needs >= 2 curves) and returns one fit;
/// `per_curve` returns one fit per curve. Multistart over the settings'
/// (chi, alpha) grid, best objective wins (ties to the lower start index).
/// Throws ConvergenceError (carrying the best point) when the winning branch
/// did not converge, DataError for empty or all-zero curves.
std::vector<WavepacketFit> fit_wavepacket(std::span<const CurveData> curves,
                                          const physics::AtomSpec &atom,
                                          FitMode mode,
                                          const WavepacketFitSettings &settings = {});

/// Single-start fit of all curves jointly from (chi, alpha), with the fit
/// window derived from the start point.
WavepacketFit refine_wavepacket_fit(std::span<const CurveData> curves,
                                    const physics::AtomSpec &atom, double chi,
                                    double alpha,
                                    const WavepacketFitSettings &settings = {});

/// Number of leading bins of `curve` inside min(read window, quantile of
/// `mass` for the given parameters).
std::size_t model_window(const CurveData &curve, const physics::AtomSpec &atom,
                         double chi, double alpha, double mass);

struct CooperativityPoint {
  double od = 0.0;
  Estimate chi;
};

struct ThresholdPoint {
  double od = 0.0;
  Estimate pc;
  Estimate p2;
};

/// Result of the two scaling fits: chi = 1 + beta OD and
/// Delta P_c = P_c - P_2 proportional to OD^s.
struct ScalingFit {
  std::optional<Estimate> beta;
  std::optional<Estimate> slope;
  std::optional<Estimate> log_amplitude;
  /// OD where G12 = P_c/P_2 first exceeds 2 (linear interpolation in ln OD).
  std::optional<double> od_threshold;
  bool threshold_below_range = false;
  int dof = 0;
  double chi_squared_reduced = 0.0;
  std::vector<std::size_t> used; ///< indices of points entering the fit
};

/// Weighted least squares with the intercept fixed at one. Points with a
/// nonpositive error fall back to an unweighted fit whose error comes from
/// the residual scatter. Throws DataError with fewer than two distinct ODs.
ScalingFit fit_cooperativity(std::span<const CooperativityPoint> points);

/// Log-log weighted linear fit over the threshold window: Delta P_c > 3 sigma
/// and P_c below half the largest P_c in the set. Also reports the G12 = 2
/// crossing. Throws DataError with fewer than three usable points.
ScalingFit fit_threshold_slope(std::span<const ThresholdPoint> points);

/// Indices of points selected for the slope fit.
std::vector<std::size_t> threshold_window(std::span<const ThresholdPoint> points);

/// Weighted straight-line fit y = a + b x; returns {a, b} and their 2x2
/// covariance (unscaled, from the weights).
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double chi_squared = 0.0;
};
LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma);

} // namespace dlcz::fit
