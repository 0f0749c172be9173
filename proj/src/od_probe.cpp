#include "dlcz/od_probe.hpp"

#include "dlcz/errors.hpp"
#include "dlcz/event_io.hpp"

#include <fftw3.h>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>

namespace dlcz::od {

namespace {

using cplx = std::complex<double>;

// FFTW planning is not thread-safe; execution is.
std::mutex &plan_mutex() {
  static std::mutex m;
  return m;
}

void fft(std::vector<cplx> &data, int sign) {
  const int n = static_cast<int>(data.size());
  auto *ptr = reinterpret_cast<fftw_complex *>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_1d(n, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(plan_mutex());
  fftw_destroy_plan(plan);
}

// Input spectrum computed once, reused for every trial optical depth.
// Spectrum convention: E^(w) = sum_t E(t) exp(+i w t) so that a transfer
// analytic in the upper half plane gives a causal response.
class Propagator {
public:
  Propagator(const ProbePulse &pulse, const physics::AtomSpec &atom)
      : n_(pulse.size()), m_(4 * pulse.size()), dt_(pulse.sample_period),
        detuning_(pulse.detuning), atom_(atom), spectrum_(m_) {
    std::copy(pulse.envelope.begin(), pulse.envelope.end(), spectrum_.begin());
    fft(spectrum_, FFTW_BACKWARD);
    omega_.resize(m_);
    const double dw = physics::kTwoPi / (static_cast<double>(m_) * dt_);
    for (std::size_t k = 0; k < m_; ++k) {
      const auto kk = static_cast<double>(k);
      omega_[k] = (k < (m_ + 1) / 2 ? kk : kk - static_cast<double>(m_)) * dw;
    }
  }

  std::vector<cplx> apply(double od, bool derivative) const {
    std::vector<cplx> buf(m_);
    const double g = atom_.gamma / 2.0;
    for (std::size_t k = 0; k < m_; ++k) {
      const double delta = detuning_ + omega_[k];
      const cplx t = field_transfer(delta, od, atom_);
      const cplx f = derivative ? -0.5 * g / cplx(g, -delta) * t : t;
      buf[k] = spectrum_[k] * f;
    }
    fft(buf, FFTW_FORWARD);
    buf.resize(n_);
    const double scale = 1.0 / static_cast<double>(m_);
    for (auto &v : buf)
      v *= scale;
    return buf;
  }

private:
  std::size_t n_, m_;
  double dt_, detuning_;
  physics::AtomSpec atom_;
  std::vector<cplx> spectrum_;
  std::vector<double> omega_;
};

double lorentzian(double delta, const physics::AtomSpec &atom) {
  const double g = atom.gamma / 2.0;
  return g * g / (delta * delta + g * g);
}

void check_scan(std::span<const ScanPoint> points, const physics::AtomSpec &atom) {
  if (points.size() < 5)
    throw DomainError("Lorentzian scan needs at least 5 detunings");
  double lo = 0.0, hi = 0.0;
  for (const auto &p : points) {
    if (!std::isfinite(p.detuning) || !std::isfinite(p.transmission))
      throw DomainError("Lorentzian scan: non-finite point");
    lo = std::min(lo, p.detuning);
    hi = std::max(hi, p.detuning);
  }
  const double reach = atom.gamma * (1.0 - 1e-9);
  if (lo > -reach || hi < reach)
    throw DomainError("Lorentzian scan must span -Gamma..+Gamma");
}

} // namespace

void ProbePulse::validate() const {
  if (envelope.size() < kMinSamples)
    throw DomainError(fmt::format("probe pulse needs >= {} samples", kMinSamples));
  if (!(sample_period > 0.0) || !std::isfinite(sample_period))
    throw DomainError("probe sample period must be positive");
  if (!std::isfinite(detuning))
    throw DomainError("probe detuning must be finite");
  for (const auto &v : envelope)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw DomainError("probe envelope must be finite");
}

std::vector<double> ProbePulse::intensity() const {
  std::vector<double> out;
  out.reserve(envelope.size());
  for (const auto &v : envelope)
    out.push_back(std::norm(v));
  return out;
}

double ProbePulse::energy() const {
  double e = 0.0;
  for (const auto &v : envelope)
    e += std::norm(v);
  return e * sample_period;
}

ProbePulse flat_top_pulse(std::size_t samples, double sample_period, double onset,
                          double duration, double edge, double detuning) {
  ProbePulse p;
  p.sample_period = sample_period;
  p.detuning = detuning;
  p.envelope.resize(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * sample_period - onset;
    double a = 0.0;
    if (t >= 0.0 && t <= duration + 2.0 * edge) {
      if (t < edge)
        a = 0.5 * (1.0 - std::cos(std::numbers::pi * t / edge));
      else if (t > duration + edge)
        a = 0.5 * (1.0 - std::cos(std::numbers::pi * (duration + 2.0 * edge - t) / edge));
      else
        a = 1.0;
    }
    p.envelope[k] = a;
  }
  return p;
}

ProbePulse gaussian_pulse(std::size_t samples, double sample_period, double center,
                          double fwhm, double detuning) {
  ProbePulse p;
  p.sample_period = sample_period;
  p.detuning = detuning;
  p.envelope.resize(samples);
  // Intensity FWHM -> field standard deviation.
  const double sigma = fwhm / std::sqrt(8.0 * std::log(2.0)) * std::sqrt(2.0);
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = (static_cast<double>(k) * sample_period - center) / sigma;
    p.envelope[k] = std::exp(-0.5 * x * x);
  }
  return p;
}

std::complex<double> field_transfer(double delta, double od,
                                    const physics::AtomSpec &atom) {
  const double g = atom.gamma / 2.0;
  return std::exp(-0.5 * od * g / cplx(g, -delta));
}

ProbePulse propagate(const ProbePulse &pulse, double od, const physics::AtomSpec &atom) {
  pulse.validate();
  atom.validate();
  if (!(od >= 0.0) || !std::isfinite(od))
    throw DomainError("optical depth must be >= 0");
  if (od == 0.0)
    return pulse;
  ProbePulse out = pulse;
  out.envelope = Propagator(pulse, atom).apply(od, false);
  return out;
}

double impulse_response_tail(double t, double od, const physics::AtomSpec &atom) {
  if (t <= 0.0 || od == 0.0)
    return 0.0;
  const double a = od / 2.0;
  const double g = atom.gamma / 2.0;
  const double x = 2.0 * std::sqrt(a * g * t);
  return -std::exp(-g * t) * std::sqrt(a * g / t) * std::cyl_bessel_j(1.0, x);
}

std::string_view method_name(OdMethod m) {
  switch (m) {
  case OdMethod::log_ratio:
    return "log_ratio";
  case OdMethod::lorentzian_scan:
    return "lorentzian_scan";
  case OdMethod::pulse_shape:
    return "pulse_shape";
  }
  return "?";
}

ODEstimate od_log_ratio(double v_i, double v_f) {
  return od_log_ratio(Estimate{v_i, 0.0}, Estimate{v_f, 0.0});
}

ODEstimate od_log_ratio(Estimate v_i, Estimate v_f) {
  if (!(v_i.value > 0.0) || !(v_f.value > 0.0))
    throw DomainError("log-ratio OD needs positive intensities");
  if (v_f.value > v_i.value)
    throw DomainError("log-ratio OD needs v_f <= v_i");
  ODEstimate e;
  e.method = OdMethod::log_ratio;
  const double ri = v_i.error / v_i.value;
  const double rf = v_f.error / v_f.value;
  e.od = {-std::log(v_f.value / v_i.value), std::sqrt(ri * ri + rf * rf)};
  return e;
}

ODEstimate od_lorentzian_profile(std::span<const ScanPoint> points,
                                 const physics::AtomSpec &atom) {
  check_scan(points, atom);
  bool weighted = true;
  for (const auto &p : points) {
    if (!(p.transmission > 0.0))
      throw DomainError("OD profile fit needs positive transmissions");
    weighted = weighted && p.sigma > 0.0;
  }
  // y = -ln T = od L; sigma_y = sigma_T / T
  double sxx = 0, sxy = 0;
  for (const auto &p : points) {
    const double sy = weighted ? p.sigma / p.transmission : 1.0;
    const double w = 1.0 / (sy * sy);
    const double l = lorentzian(p.detuning, atom);
    sxx += w * l * l;
    sxy += w * l * -std::log(p.transmission);
  }
  const double od = sxy / sxx;
  double chi2 = 0.0;
  for (const auto &p : points) {
    const double sy = weighted ? p.sigma / p.transmission : 1.0;
    const double r = (-std::log(p.transmission) - od * lorentzian(p.detuning, atom)) / sy;
    chi2 += r * r;
  }
  const int dof = static_cast<int>(points.size()) - 1;
  ODEstimate e;
  e.method = OdMethod::lorentzian_scan;
  e.chi_squared_reduced = chi2 / dof;
  const double var = weighted ? 1.0 / sxx : chi2 / dof / sxx;
  e.od = {std::max(od, 0.0), std::sqrt(var)};
  return e;
}

ODEstimate od_lorentzian_scan(std::span<const ScanPoint> points,
                              const physics::AtomSpec &atom,
                              const fit::LmOptions &options) {
  check_scan(points, atom);
  bool weighted = true;
  double start = 1.0;
  for (const auto &p : points)
    weighted = weighted && p.sigma > 0.0;
  if (std::all_of(points.begin(), points.end(),
                  [](const ScanPoint &p) { return p.transmission > 0.0; }))
    start = std::max(od_lorentzian_profile(points, atom).od.value, 1e-3);

  const std::vector<ScanPoint> pts(points.begin(), points.end());
  fit::LeastSquaresProblem prob;
  prob.n_params = 1;
  prob.lower = Eigen::VectorXd::Zero(1);
  prob.evaluate = [&](const Eigen::VectorXd &x, Eigen::VectorXd &r, Eigen::MatrixXd *j) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    r.resize(n);
    if (j)
      j->resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto &p = pts[static_cast<std::size_t>(i)];
      const double w = weighted ? 1.0 / p.sigma : 1.0;
      const double l = lorentzian(p.detuning, atom);
      const double m = std::exp(-x[0] * l);
      r[i] = w * (p.transmission - m);
      if (j)
        (*j)(i, 0) = w * l * m;
    }
  };
  Eigen::VectorXd x0(1);
  x0 << start;
  const auto lm = fit::levenberg_marquardt(prob, x0, options);
  if (!lm.converged)
    throw ConvergenceError("Lorentzian scan fit: " + lm.stop_reason, {lm.params[0]},
                           lm.objective);
  const int dof = static_cast<int>(pts.size()) - 1;
  ODEstimate e;
  e.method = OdMethod::lorentzian_scan;
  e.iterations = lm.iterations;
  e.chi_squared_reduced = lm.objective / dof;
  const double var = lm.covariance(0, 0) * (weighted ? 1.0 : lm.objective / dof);
  e.od = {lm.params[0], std::sqrt(std::max(var, 0.0))};
  return e;
}

ODEstimate od_pulse_shape(const ProbePulse &input, const ProbePulse &output,
                          const physics::AtomSpec &atom, const fit::LmOptions &options) {
  input.validate();
  output.validate();
  atom.validate();
  if (input.size() != output.size() || input.sample_period != output.sample_period ||
      input.detuning != output.detuning)
    throw DataError("input and output traces are on different grids");

  const Propagator prop(input, atom);
  std::vector<double> target;
  for (const auto &v : output.envelope)
    target.push_back(std::abs(v));

  fit::LeastSquaresProblem prob;
  prob.n_params = 1;
  prob.lower = Eigen::VectorXd::Zero(1);
  prob.evaluate = [&](const Eigen::VectorXd &x, Eigen::VectorXd &r, Eigen::MatrixXd *j) {
    const auto m = prop.apply(x[0], false);
    const auto n = static_cast<Eigen::Index>(m.size());
    r.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      r[i] = std::abs(m[static_cast<std::size_t>(i)]) - target[static_cast<std::size_t>(i)];
    if (j) {
      const auto dm = prop.apply(x[0], true);
      j->resize(n, 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double a = std::abs(m[k]);
        (*j)(i, 0) = a > 0.0 ? std::real(std::conj(m[k]) * dm[k]) / a : 0.0;
      }
    }
  };

  double start = 1.0;
  const double e_in = input.energy();
  const double e_out = output.energy();
  if (e_in > 0.0 && e_out > 0.0)
    start = std::clamp(-std::log(e_out / e_in), 1e-2, 50.0);
  Eigen::VectorXd x0(1);
  x0 << start;
  const auto lm = fit::levenberg_marquardt(prob, x0, options);
  if (!lm.converged)
    throw ConvergenceError("pulse-shape OD fit: " + lm.stop_reason, {lm.params[0]},
                           lm.objective);
  const int dof = static_cast<int>(input.size()) - 1;
  ODEstimate e;
  e.method = OdMethod::pulse_shape;
  e.iterations = lm.iterations;
  e.chi_squared_reduced = lm.objective / dof;
  e.od = {lm.params[0], std::sqrt(std::max(lm.covariance(0, 0) * lm.objective / dof, 0.0))};
  return e;
}

void save_trace(const std::filesystem::path &path, const ProbePulse &pulse) {
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path.string());
  fmt::print(os, "time_ns,amplitude\n");
  for (std::size_t k = 0; k < pulse.size(); ++k)
    fmt::print(os, "{},{}\n", io::exact(static_cast<double>(k) * pulse.sample_period * 1e9),
               io::exact(std::abs(pulse.envelope[k])));
}

namespace {

std::vector<std::pair<double, double>> read_two_columns(const std::filesystem::path &path,
                                                        std::string_view header) {
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != header)
    throw DataError(fmt::format("{}: line 1: expected header '{}'", path.string(), header));
  std::vector<std::pair<double, double>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos)
        throw std::invalid_argument("");
      std::size_t used = 0;
      const double a = std::stod(line.substr(0, comma), &used);
      const std::string rest = line.substr(comma + 1);
      std::size_t used_b = 0;
      const double b = std::stod(rest, &used_b);
      if (used != comma || used_b != rest.size())
        throw std::invalid_argument("");
      rows.emplace_back(a, b);
    } catch (const std::exception &) {
      throw DataError(fmt::format("{}: line {}: expected two numbers", path.string(), lineno));
    }
  }
  return rows;
}

} // namespace

ProbePulse load_trace(const std::filesystem::path &path) {
  const auto rows = read_two_columns(path, "time_ns,amplitude");
  if (rows.size() < 2)
    throw DataError(path.string() + ": trace needs at least two samples");
  ProbePulse p;
  const double dt = (rows.back().first - rows.front().first) /
                    static_cast<double>(rows.size() - 1);
  if (!(dt > 0.0))
    throw DataError(path.string() + ": time axis must increase");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double expect = rows.front().first + static_cast<double>(k) * dt;
    if (std::abs(rows[k].first - expect) > 1e-6 * dt)
      throw DataError(fmt::format("{}: line {}: non-uniform time grid", path.string(), k + 2));
    p.envelope.emplace_back(rows[k].second, 0.0);
  }
  p.sample_period = dt * 1e-9;
  return p;
}

void save_scan(const std::filesystem::path &path, std::span<const ScanPoint> points) {
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path.string());
  fmt::print(os, "detuning_MHz,transmission\n");
  for (const auto &p : points)
    fmt::print(os, "{},{}\n", io::exact(p.detuning / physics::kTwoPi / 1e6),
               io::exact(p.transmission));
}

std::vector<ScanPoint> load_scan(const std::filesystem::path &path) {
  std::vector<ScanPoint> pts;
  for (const auto &[f, t] : read_two_columns(path, "detuning_MHz,transmission"))
    pts.push_back({f * 1e6 * physics::kTwoPi, t, 0.0});
  return pts;
}

} // namespace dlcz::od
