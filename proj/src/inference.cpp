#include "dlcz/inference.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace dlcz::fit {

namespace {

physics::ReadoutSpec readout_for(const CurveData &c, double chi, double alpha) {
  physics::ReadoutSpec r;
  r.power = c.power;
  r.alpha = alpha;
  r.chi = chi;
  r.dt = c.bin_width;
  r.read_duration = c.read_duration;
  return r;
}

void check_curve(const CurveData &c, std::size_t index) {
  if (c.t.empty())
    throw DataError(fmt::format("curve {}: no bins", index));
  if (c.y.size() != c.t.size() || c.sigma.size() != c.t.size())
    throw DataError(fmt::format("curve {}: t, y and sigma lengths differ", index));
  if (!(c.power > 0.0))
    throw DataError(fmt::format("curve {}: read power must be positive", index));
  if (!(c.bin_width > 0.0) || !(c.read_duration > 0.0))
    throw DataError(fmt::format("curve {}: bad bin width or read window", index));
  bool any = false;
  for (std::size_t k = 0; k < c.y.size(); ++k) {
    if (!std::isfinite(c.y[k]) || !(c.sigma[k] > 0.0))
      throw DataError(fmt::format("curve {}: bin {} has a non-finite value or "
                                  "nonpositive error",
                                  index, k));
    any = any || c.y[k] != 0.0;
  }
  if (!any)
    throw DataError(fmt::format("curve {}: all bins are zero", index));
}

// Bins up to the point where the empirical cumulative reaches `mass`.
std::size_t empirical_window(const CurveData &c, double mass) {
  double total = 0.0;
  for (double v : c.y)
    total += std::max(v, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < c.y.size(); ++k) {
    acc += std::max(c.y[k], 0.0);
    if (acc >= mass * total)
      return std::max<std::size_t>(k + 1, std::min<std::size_t>(3, c.y.size()));
  }
  return c.y.size();
}

std::vector<double> curve_weights(std::span<const CurveData> curves,
                                  const WavepacketFitSettings &s) {
  std::vector<double> w;
  for (const auto &c : curves)
    w.push_back(c.power < s.low_power_threshold ? s.low_power_weight : 1.0);
  return w;
}

LmResult run_lm(const WavepacketObjective &obj, double chi, double alpha,
                const LmOptions &opt) {
  Eigen::VectorXd start(2);
  start << chi, alpha;
  return levenberg_marquardt(obj.problem(), start, opt);
}

WavepacketFit package(const WavepacketObjective &obj, const LmResult &lm,
                      std::vector<std::size_t> indices, std::size_t start_index) {
  WavepacketFit f;
  f.covariance = lm.covariance;
  f.chi = {lm.params[0], std::sqrt(std::max(lm.covariance(0, 0), 0.0))};
  f.alpha = {lm.params[1], std::sqrt(std::max(lm.covariance(1, 1), 0.0))};
  f.chi_squared = lm.objective;
  f.dof = static_cast<int>(obj.n_residuals()) - 2;
  f.chi_squared_reduced = f.dof > 0 ? lm.objective / f.dof
                                    : std::numeric_limits<double>::quiet_NaN();
  f.iterations = lm.iterations;
  f.converged = lm.converged;
  f.stop_reason = lm.stop_reason;
  f.start_index = start_index;
  f.curves = std::move(indices);
  f.window = obj.window();
  Eigen::Index off = 0;
  for (std::size_t w : obj.window()) {
    const auto n = static_cast<Eigen::Index>(w);
    const Eigen::VectorXd seg = lm.residuals.segment(off, n);
    f.residuals.emplace_back(seg.data(), seg.data() + seg.size());
    off += n;
  }
  return f;
}

// Poisson errors from the model prediction, floored at one count.
void apply_model_errors(std::vector<CurveData> &curves, const physics::AtomSpec &atom,
                        double chi, double alpha) {
  for (auto &c : curves) {
    if (!(c.counts > 0.0))
      continue;
    const auto readout = readout_for(c, chi, alpha);
    for (std::size_t k = 0; k < c.t.size(); ++k) {
      const double mu = c.counts * physics::wavepacket_density(c.t[k], readout, atom);
      c.sigma[k] = std::sqrt(std::max(mu, 1.0)) / c.counts;
    }
  }
}

bool same_point(const LmResult &a, const LmResult &b) {
  for (Eigen::Index i = 0; i < a.params.size(); ++i)
    if (std::abs(a.params[i] - b.params[i]) > 1e-9 * std::abs(b.params[i]))
      return false;
  return true;
}

void require_converged(const LmResult &lm, const std::string &what) {
  if (!lm.converged)
    throw ConvergenceError(what + ": " + lm.stop_reason,
                           {lm.params[0], lm.params[1]}, lm.objective);
}

// Refits until the model-derived window and errors stop changing.
WavepacketFit settle(std::vector<CurveData> curves, const physics::AtomSpec &atom,
                     const std::vector<double> &weights, LmResult lm,
                     std::vector<std::size_t> indices, std::size_t start_index,
                     const WavepacketFitSettings &s) {
  auto windows = [&](const LmResult &at) {
    std::vector<std::size_t> w;
    for (const auto &c : curves)
      w.push_back(model_window(c, atom, at.params[0], at.params[1], s.window_mass));
    return w;
  };
  std::vector<std::size_t> window;
  LmResult prev = lm;
  for (int pass = 0; pass < 20; ++pass) {
    auto next = windows(lm);
    if (pass > 0 && next == window && (!s.model_errors || same_point(lm, prev)))
      break;
    window = std::move(next);
    if (s.model_errors)
      apply_model_errors(curves, atom, lm.params[0], lm.params[1]);
    prev = lm;
    lm = run_lm(WavepacketObjective(curves, atom, window, weights), lm.params[0],
                lm.params[1], s.lm);
    require_converged(lm, "wavepacket fit");
  }
  WavepacketObjective obj(std::move(curves), atom, window, weights);
  return package(obj, lm, std::move(indices), start_index);
}

WavepacketFit fit_group(std::vector<CurveData> curves, std::vector<std::size_t> indices,
                        const physics::AtomSpec &atom, const WavepacketFitSettings &s) {
  const auto weights = curve_weights(curves, s);
  std::vector<std::size_t> window;
  for (const auto &c : curves)
    window.push_back(empirical_window(c, s.window_mass));
  const WavepacketObjective first(curves, atom, window, weights);

  std::vector<std::pair<double, double>> starts;
  for (double chi : s.chi_starts)
    for (double alpha : s.alpha_starts)
      starts.emplace_back(chi, alpha);
  if (starts.empty())
    throw DomainError("wavepacket fit needs at least one start point");

  std::vector<std::future<LmResult>> jobs;
  for (const auto &[chi, alpha] : starts)
    jobs.push_back(std::async(std::launch::async, [&first, &s, chi = chi, alpha = alpha] {
      return run_lm(first, chi, alpha, s.lm);
    }));
  std::vector<LmResult> results;
  for (auto &j : jobs)
    results.push_back(j.get());

  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const double a = results[i].objective;
    if (std::isfinite(a) && !(a >= results[best].objective))
      best = i;
  }
  require_converged(results[best], "wavepacket fit");
  return settle(std::move(curves), atom, weights, results[best], std::move(indices), best, s);
}

} // namespace

CurveData curve_from_wavepacket(const stats::Wavepacket &wp, double power, double od) {
  if (wp.n_coincident == 0)
    throw DataError("wavepacket has no heralded field-2 clicks");
  CurveData c;
  c.power = power;
  c.bin_width = wp.bin_width;
  c.read_duration = wp.read_duration;
  c.od = od;
  const double n = static_cast<double>(wp.n_coincident);
  c.counts = n;
  for (std::size_t i = 0; i < wp.bins.size(); ++i) {
    const double k = static_cast<double>(wp.bins[i].heralded);
    c.t.push_back(wp.bin_center(i));
    c.y.push_back(k / n);
    c.sigma.push_back(std::sqrt(std::max(k, 1.0)) / n);
  }
  return c;
}

WavepacketObjective::WavepacketObjective(std::vector<CurveData> curves,
                                         physics::AtomSpec atom,
                                         std::vector<std::size_t> window,
                                         std::vector<double> weights)
    : curves_(std::move(curves)), atom_(atom), window_(std::move(window)) {
  if (window_.size() != curves_.size() || weights.size() != curves_.size())
    throw DomainError("objective needs one window and weight per curve");
  for (std::size_t i = 0; i < curves_.size(); ++i) {
    window_[i] = std::min(window_[i], curves_[i].t.size());
    if (!(weights[i] >= 0.0))
      throw DomainError("curve weights must be >= 0");
    scale_.push_back(std::sqrt(weights[i]));
  }
}

std::size_t WavepacketObjective::n_residuals() const {
  return std::accumulate(window_.begin(), window_.end(), std::size_t{0});
}

void WavepacketObjective::evaluate(double chi, double alpha, Eigen::VectorXd &r,
                                   Eigen::MatrixXd *jac) const {
  const auto n = static_cast<Eigen::Index>(n_residuals());
  r.resize(n);
  if (jac)
    jac->resize(n, 2);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < curves_.size(); ++i) {
    const auto &c = curves_[i];
    const auto readout = readout_for(c, chi, alpha);
    for (std::size_t k = 0; k < window_[i]; ++k, ++row) {
      const double w = scale_[i] / c.sigma[k];
      const auto jet = physics::wavepacket_density_jet(c.t[k], readout, atom_);
      r[row] = w * (c.y[k] - jet.value);
      if (jac) {
        (*jac)(row, 0) = -w * jet.d_chi;
        (*jac)(row, 1) = -w * jet.d_alpha;
      }
    }
  }
}

double WavepacketObjective::value(double chi, double alpha) const {
  Eigen::VectorXd r;
  evaluate(chi, alpha, r, nullptr);
  return r.squaredNorm();
}

Eigen::Vector2d WavepacketObjective::gradient(double chi, double alpha) const {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  evaluate(chi, alpha, r, &j);
  return 2.0 * j.transpose() * r;
}

LeastSquaresProblem WavepacketObjective::problem() const {
  LeastSquaresProblem p;
  p.n_params = 2;
  p.evaluate = [this](const Eigen::VectorXd &x, Eigen::VectorXd &r, Eigen::MatrixXd *j) {
    evaluate(x[0], x[1], r, j);
  };
  p.lower = Eigen::Vector2d(1.0, 0.0);
  return p;
}

std::size_t model_window(const CurveData &curve, const physics::AtomSpec &atom,
                         double chi, double alpha, double mass) {
  const auto readout = readout_for(curve, chi, alpha);
  double t_end = curve.read_duration;
  if (physics::wavepacket_survival(curve.read_duration, readout, atom) < 1.0 - mass)
    t_end = physics::wavepacket_quantile(mass, readout, atom);
  std::size_t n = 0;
  while (n < curve.t.size() && curve.t[n] <= t_end)
    ++n;
  return std::max(n, std::min<std::size_t>(3, curve.t.size()));
}

std::vector<WavepacketFit> fit_wavepacket(std::span<const CurveData> curves,
                                          const physics::AtomSpec &atom, FitMode mode,
                                          const WavepacketFitSettings &settings) {
  if (curves.empty())
    throw DataError("no wavepackets to fit");
  for (std::size_t i = 0; i < curves.size(); ++i)
    check_curve(curves[i], i);

  std::vector<WavepacketFit> fits;
  if (mode == FitMode::global) {
    if (curves.size() < 2)
      throw DataError("global fit needs at least two curves");
    std::vector<std::size_t> idx(curves.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    fits.push_back(fit_group({curves.begin(), curves.end()}, idx, atom, settings));
  } else {
    for (std::size_t i = 0; i < curves.size(); ++i)
      fits.push_back(fit_group({curves[i]}, {i}, atom, settings));
  }
  return fits;
}

WavepacketFit refine_wavepacket_fit(std::span<const CurveData> curves,
                                    const physics::AtomSpec &atom, double chi,
                                    double alpha, const WavepacketFitSettings &settings) {
  if (curves.empty())
    throw DataError("no wavepackets to fit");
  for (std::size_t i = 0; i < curves.size(); ++i)
    check_curve(curves[i], i);
  std::vector<CurveData> cs(curves.begin(), curves.end());
  if (settings.model_errors)
    apply_model_errors(cs, atom, chi, alpha);
  const auto weights = curve_weights(cs, settings);
  std::vector<std::size_t> window;
  for (const auto &c : cs)
    window.push_back(model_window(c, atom, chi, alpha, settings.window_mass));
  const WavepacketObjective obj(cs, atom, window, weights);
  const auto lm = run_lm(obj, chi, alpha, settings.lm);
  require_converged(lm, "wavepacket refit");
  std::vector<std::size_t> idx(cs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return package(obj, lm, idx, 0);
}

LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size())
    throw DomainError("line fit inputs differ in length");
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    s += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = s * sxx - sx * sx;
  if (!(det > 0.0))
    throw DataError("line fit is degenerate (need two distinct abscissae)");
  LineFit f;
  f.slope = (s * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  f.covariance << sxx / det, -sx / det, -sx / det, s / det;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - f.intercept - f.slope * x[i]) / sigma[i];
    f.chi_squared += r * r;
  }
  return f;
}

ScalingFit fit_cooperativity(std::span<const CooperativityPoint> points) {
  if (points.size() < 2)
    throw DataError("cooperativity fit needs at least two points");
  bool distinct = false;
  bool weighted = true;
  for (const auto &p : points) {
    if (!std::isfinite(p.od) || !std::isfinite(p.chi.value))
      throw DataError("cooperativity fit: non-finite input");
    distinct = distinct || p.od != points.front().od;
    weighted = weighted && p.chi.error > 0.0;
  }
  if (!distinct)
    throw DataError("cooperativity fit needs at least two distinct ODs");

  // chi - 1 = beta * od
  double sxx = 0, sxy = 0;
  for (const auto &p : points) {
    const double w = weighted ? 1.0 / (p.chi.error * p.chi.error) : 1.0;
    sxx += w * p.od * p.od;
    sxy += w * p.od * (p.chi.value - 1.0);
  }
  const double beta = sxy / sxx;
  double chi2 = 0;
  for (const auto &p : points) {
    const double r = p.chi.value - 1.0 - beta * p.od;
    chi2 += weighted ? r * r / (p.chi.error * p.chi.error) : r * r;
  }
  ScalingFit f;
  f.dof = static_cast<int>(points.size()) - 1;
  f.chi_squared_reduced = chi2 / f.dof;
  const double se = weighted ? std::sqrt(1.0 / sxx) : std::sqrt(chi2 / f.dof / sxx);
  f.beta = Estimate{beta, se};
  f.used.resize(points.size());
  std::iota(f.used.begin(), f.used.end(), std::size_t{0});
  return f;
}

std::vector<std::size_t> threshold_window(std::span<const ThresholdPoint> points) {
  double plateau = 0.0;
  for (const auto &p : points)
    if (p.pc.defined && std::isfinite(p.pc.value))
      plateau = std::max(plateau, p.pc.value);
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto &p = points[i];
    if (!p.pc.defined || !p.p2.defined || !(p.od > 0.0))
      continue;
    const double delta = p.pc.value - p.p2.value;
    const double err = std::hypot(p.pc.error, p.p2.error);
    if (err > 0.0 && delta > 3.0 * err && p.pc.value < 0.5 * plateau)
      used.push_back(i);
  }
  return used;
}

ScalingFit fit_threshold_slope(std::span<const ThresholdPoint> points) {
  ScalingFit f;
  f.used = threshold_window(points);
  if (f.used.size() < 3)
    throw DataError(fmt::format("threshold slope fit needs >= 3 points in the "
                                "threshold window, found {}",
                                f.used.size()));
  std::vector<double> x, y, s;
  for (std::size_t i : f.used) {
    const auto &p = points[i];
    const double delta = p.pc.value - p.p2.value;
    x.push_back(std::log(p.od));
    y.push_back(std::log(delta));
    s.push_back(std::hypot(p.pc.error, p.p2.error) / delta);
  }
  const auto line = weighted_line_fit(x, y, s);
  f.slope = Estimate{line.slope, std::sqrt(line.covariance(1, 1))};
  f.log_amplitude = Estimate{line.intercept, std::sqrt(line.covariance(0, 0))};
  f.dof = static_cast<int>(x.size()) - 2;
  f.chi_squared_reduced = line.chi_squared / f.dof;

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].od < points[b].od; });
  auto g12 = [&](std::size_t i) {
    const auto &p = points[i];
    return p.pc.defined && p.p2.defined && p.p2.value > 0.0
               ? p.pc.value / p.p2.value
               : std::numeric_limits<double>::quiet_NaN();
  };
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double g = g12(order[k]);
    if (!(g > 2.0))
      continue;
    if (k == 0) {
      f.threshold_below_range = true;
      break;
    }
    const auto &lo = points[order[k - 1]];
    const auto &hi = points[order[k]];
    const double g_lo = g12(order[k - 1]);
    if (!(lo.od > 0.0) || !std::isfinite(g_lo)) {
      f.od_threshold = hi.od;
      break;
    }
    const double frac = (2.0 - g_lo) / (g - g_lo);
    f.od_threshold = std::exp(std::log(lo.od) + frac * (std::log(hi.od) - std::log(lo.od)));
    break;
  }
  return f;
}

} // namespace dlcz::fit
