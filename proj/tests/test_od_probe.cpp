#include "dlcz/errors.hpp"
#include "dlcz/inference.hpp"
#include "dlcz/od_probe.hpp"
#include "od_bench.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace dlcz;
using namespace dlcz::od;
using testing::Rng;

namespace {

const physics::AtomSpec kCs = physics::AtomSpec::cesium_d2();

double peak_amplitude(const ProbePulse &p) {
  double m = 0.0;
  for (const auto &v : p.envelope)
    m = std::max(m, std::abs(v));
  return m;
}

} // namespace

TEST_CASE("zero optical depth returns the input unchanged") {
  const auto in = testing::short_probe();
  const auto out = propagate(in, 0.0, kCs);
  CHECK(out.envelope == in.envelope);
  CHECK(out.sample_period == in.sample_period);
}

TEST_CASE("resonant long-pulse transmission is exp(-od)") {
  for (double od : {0.5, 1.0, 2.0, 4.29, 4.8, 6.0}) {
    const double t = testing::centre_transmission(od, kCs);
    INFO("od " << od);
    CHECK(std::abs(t - std::exp(-od)) < 1e-4);
  }
  CHECK(testing::centre_transmission(4.29, kCs) == doctest::Approx(0.0137).epsilon(0.005));
}

TEST_CASE("long-pulse log ratio recovers the optical depth") {
  const auto in = testing::long_probe();
  const auto out = propagate(in, 4.8, kCs);
  const auto e = od_log_ratio(std::norm(in.envelope[2500]), std::norm(out.envelope[2500]));
  CHECK(std::abs(e.od.value - 4.8) < 1e-3);
  CHECK(e.method == OdMethod::log_ratio);
}

TEST_CASE("transfer function matches its closed form") {
  CHECK(std::abs(field_transfer(0.0, 2.0, kCs) - std::exp(-1.0)) < 1e-15);
  const double g = kCs.gamma / 2.0;
  const auto t = field_transfer(g, 2.0, kCs);
  // (g/2)/(g - i g) = (1 + i)/2
  CHECK(std::abs(t - std::exp(std::complex<double>(-0.5, -0.5))) < 1e-15);
  CHECK(std::abs(field_transfer(1e6 * kCs.gamma, 3.0, kCs) - 1.0) < 1e-5);
}

TEST_CASE("short pulse transmits more energy than exp(-od) and rings") {
  const auto in = testing::short_probe();
  for (double od : {1.0, 4.3, 6.0}) {
    const auto out = propagate(in, od, kCs);
    CHECK(out.energy() / in.energy() > std::exp(-od));
  }
  // Count local maxima of |E| after the input peak.
  const auto out = propagate(in, 6.0, kCs);
  int maxima = 0;
  for (std::size_t k = 201; k + 1 < out.size(); ++k) {
    const double a = std::abs(out.envelope[k - 1]), b = std::abs(out.envelope[k]),
                 c = std::abs(out.envelope[k + 1]);
    if (b > a && b > c && b > 1e-4 * peak_amplitude(out))
      ++maxima;
  }
  CHECK(maxima >= 2);
}

TEST_CASE("propagation equals convolution with the impulse response") {
  const double fwhm = 50e-9, center = 200e-9;
  const double sigma = fwhm / std::sqrt(8.0 * std::log(2.0)) * std::sqrt(2.0);
  auto env = [&](double t) {
    const double x = (t - center) / sigma;
    return std::exp(-0.5 * x * x);
  };
  const auto in = testing::short_probe();
  for (double od : {1.0, 4.3}) {
    const auto out = propagate(in, od, kCs);
    const double peak = peak_amplitude(out);
    double worst = 0.0;
    for (std::size_t k = 0; k < 700; k += 7) {
      const double t = static_cast<double>(k) * 1e-9;
      auto f = [&](double s) { return impulse_response_tail(s, od, kCs) * env(t - s); };
      // env(t - s) is below 1e-16 outside |t - s - center| < 8.6 sigma.
      const double lo = std::max(0.0, t - center - 8.6 * sigma);
      const double hi = std::min(t, t - center + 8.6 * sigma);
      double conv = 0.0;
      for (double a = lo; a < hi; a += 20e-9)
        conv += testing::integrate(f, a, std::min(a + 20e-9, hi), 1e-12, 6);
      const double expected = env(t) + conv;
      worst = std::max(worst, std::abs(out.envelope[k] - expected));
    }
    INFO("od " << od << " worst deviation " << worst / peak);
    CHECK(worst < 1e-4 * peak);
  }
}

TEST_CASE("impulse response is causal and starts at -od gamma / 4") {
  for (double od : {0.5, 3.0, 6.0}) {
    for (double t : {-1e-6, -1e-9, -1e-12, 0.0})
      CHECK(impulse_response_tail(t, od, kCs) == 0.0);
    const double g = kCs.gamma / 2.0;
    CHECK(impulse_response_tail(1e-15, od, kCs) ==
          doctest::Approx(-od / 2.0 * g).epsilon(1e-6));
  }
  // The causal transfer has no response before the input arrives.
  const auto in = od::gaussian_pulse(2048, 1e-9, 1200e-9, 50e-9);
  const auto out = propagate(in, 5.0, kCs);
  const double peak = peak_amplitude(out);
  for (std::size_t k = 0; k < 900; ++k)
    CHECK(std::abs(out.envelope[k]) < 1e-10 * peak + std::abs(in.envelope[k]) * 10.0);
}

TEST_CASE("propagation is linear") {
  Rng rng(51);
  const auto in = testing::short_probe();
  const auto base = propagate(in, 3.0, kCs);
  for (int i = 0; i < 5; ++i) {
    const std::complex<double> a(testing::uniform(rng, -3, 3), testing::uniform(rng, -3, 3));
    auto scaled = in;
    for (auto &v : scaled.envelope)
      v *= a;
    const auto out = propagate(scaled, 3.0, kCs);
    double worst = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k)
      worst = std::max(worst, std::abs(out.envelope[k] - a * base.envelope[k]));
    CHECK(worst < 1e-12 * std::abs(a));
  }
}

TEST_CASE("transmitted energy decreases strictly with od") {
  for (const auto &in : {testing::short_probe(), testing::long_probe(),
                         od::gaussian_pulse(1024, 1e-9, 300e-9, 10e-9, kCs.gamma)}) {
    double prev = in.energy();
    for (double od = 0.25; od <= 8.0; od += 0.25) {
      const double e = propagate(in, od, kCs).energy();
      CHECK(e < prev);
      prev = e;
    }
  }
}

TEST_CASE("propagation argument errors") {
  auto small = testing::short_probe();
  small.envelope.resize(512);
  CHECK_THROWS_AS(propagate(small, 1.0, kCs), DomainError);
  CHECK_THROWS_AS(propagate(testing::short_probe(), -1.0, kCs), DomainError);
  auto nan = testing::short_probe();
  nan.envelope[3] = std::nan("");
  CHECK_THROWS_AS(propagate(nan, 1.0, kCs), DomainError);
}

TEST_CASE("log-ratio values and errors") {
  CHECK(od_log_ratio(2.0, 2.0).od.value == 0.0);
  CHECK(od_log_ratio(1.0, std::exp(-1.0)).od.value == doctest::Approx(1.0).epsilon(1e-15));
  const auto e = od_log_ratio(Estimate{1.0, 0.01}, Estimate{0.1, 0.002});
  CHECK(e.od.error == doctest::Approx(std::hypot(0.01, 0.02)).epsilon(1e-12));
  CHECK_THROWS_AS(od_log_ratio(0.0, 0.0), DomainError);
  CHECK_THROWS_AS(od_log_ratio(1.0, -0.1), DomainError);
  CHECK_THROWS_AS(od_log_ratio(1.0, 1.5), DomainError);
}

TEST_CASE("exact Lorentzian scan returns the optical depth with zero error") {
  std::vector<ScanPoint> pts;
  const double g = kCs.gamma / 2.0;
  for (int i = -5; i <= 5; ++i) {
    const double d = i * 0.5 * kCs.gamma;
    pts.push_back({d, std::exp(-2.0 * g * g / (d * d + g * g)), 0.0});
  }
  const auto e = od_lorentzian_scan(pts, kCs);
  CHECK(e.od.value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(e.od.error < 1e-8);
  CHECK(e.method == OdMethod::lorentzian_scan);
  const auto p = od_lorentzian_profile(pts, kCs);
  CHECK(p.od.value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.od.error < 1e-10);
}

TEST_CASE("noisy Lorentzian scans cover the truth") {
  Rng rng(52);
  const double g = kCs.gamma / 2.0;
  const int reps = 300;
  int scan_ok = 0, profile_ok = 0;
  for (int r = 0; r < reps; ++r) {
    std::vector<ScanPoint> pts;
    std::normal_distribution<double> gauss(0.0, 0.05);
    for (int i = -5; i <= 5; ++i) {
      const double d = i * 0.5 * kCs.gamma;
      const double t = std::exp(-2.0 * g * g / (d * d + g * g));
      pts.push_back({d, t * (1.0 + gauss(rng)), 0.05 * t});
    }
    scan_ok += std::abs(od_lorentzian_scan(pts, kCs).od.value - 2.0) <
               3.0 * od_lorentzian_scan(pts, kCs).od.error;
    const auto p = od_lorentzian_profile(pts, kCs);
    profile_ok += std::abs(p.od.value - 2.0) < 3.0 * p.od.error;
  }
  CHECK(scan_ok >= reps * 98 / 100);
  CHECK(profile_ok >= reps * 98 / 100);
}

TEST_CASE("Lorentzian scan of a propagated medium agrees with the log ratio") {
  Rng rng(53);
  const auto a = testing::measure_log_ratio(rng, 4.29, kCs);
  const auto b = testing::measure_scan(rng, 4.29, kCs);
  CHECK(std::abs(a.od.value - b.od.value) < 2.0 * std::hypot(a.od.error, b.od.error));
}

TEST_CASE("Lorentzian scan argument errors") {
  std::vector<ScanPoint> few{{-kCs.gamma, 0.5}, {0, 0.1}, {kCs.gamma, 0.5}};
  CHECK_THROWS_AS(od_lorentzian_scan(few, kCs), DomainError);
  std::vector<ScanPoint> narrow;
  for (int i = -3; i <= 3; ++i)
    narrow.push_back({i * 0.1 * kCs.gamma, 0.5});
  CHECK_THROWS_AS(od_lorentzian_scan(narrow, kCs), DomainError);
}

TEST_CASE("pulse-shape fit recovers the generating od") {
  const auto in = testing::short_probe();
  for (double od : {0.5, 4.3, 6.0}) {
    const auto out = propagate(in, od, kCs);
    const auto e = od_pulse_shape(in, out, kCs);
    INFO("od " << od);
    CHECK(std::abs(e.od.value - od) < 1e-4);
    CHECK(e.method == OdMethod::pulse_shape);
  }
}

TEST_CASE("pulse-shape fit with 1% noise stays within 2%") {
  Rng rng(54);
  for (int r = 0; r < 20; ++r) {
    const double od = testing::uniform(rng, 0.5, 6.0);
    const auto e = testing::measure_pulse_shape(rng, od, kCs);
    INFO("od " << od << " fit " << e.od.value << " +- " << e.od.error);
    CHECK(std::abs(e.od.value - od) < 0.02 * od);
    CHECK(e.chi_squared_reduced > 0.0);
  }
}

TEST_CASE("repeated measurements at constant od show no trend") {
  Rng rng(55);
  const auto in = testing::short_probe();
  std::vector<double> t, y, s;
  // 25 estimates over 0.5 ms, each from the average of four traces.
  for (int i = 0; i < 25; ++i) {
    ProbePulse avg = in;
    std::fill(avg.envelope.begin(), avg.envelope.end(), 0.0);
    for (int k = 0; k < 4; ++k) {
      const auto out = testing::noisy_output(rng, in, 4.29, kCs, 0.01);
      for (std::size_t j = 0; j < avg.size(); ++j)
        avg.envelope[j] += 0.25 * out.envelope[j];
    }
    const auto e = od_pulse_shape(in, avg, kCs);
    t.push_back(i * 20e-6);
    y.push_back(e.od.value);
    s.push_back(e.od.error);
  }
  const auto line = fit::weighted_line_fit(t, y, s);
  const double slope_err = std::sqrt(line.covariance(1, 1));
  INFO("slope " << line.slope << " +- " << slope_err);
  CHECK(std::abs(line.slope) < 3.0 * slope_err);
  CHECK(line.intercept == doctest::Approx(4.29).epsilon(0.01));
}

TEST_CASE("the three methods agree on simulated media") {
  Rng rng(56);
  for (int r = 0; r < 6; ++r) {
    const double od = testing::uniform(rng, 0.5, 6.0);
    const auto a = testing::measure_log_ratio(rng, od, kCs);
    const auto b = testing::measure_scan(rng, od, kCs);
    const auto c = testing::measure_pulse_shape(rng, od, kCs);
    INFO("od " << od << ": " << a.od.value << " +- " << a.od.error << ", " << b.od.value
               << " +- " << b.od.error << ", " << c.od.value << " +- " << c.od.error);
    CHECK(std::abs(a.od.value - b.od.value) < 2.0 * std::hypot(a.od.error, b.od.error));
    CHECK(std::abs(a.od.value - c.od.value) < 2.0 * std::hypot(a.od.error, c.od.error));
    CHECK(std::abs(b.od.value - c.od.value) < 2.0 * std::hypot(b.od.error, c.od.error));
  }
}

TEST_CASE("pulse-shape fit rejects mismatched grids") {
  const auto in = testing::short_probe();
  auto out = propagate(in, 2.0, kCs);
  out.sample_period = 2e-9;
  CHECK_THROWS_AS(od_pulse_shape(in, out, kCs), DataError);
  auto longer = od::gaussian_pulse(2048, 1e-9, 200e-9, 50e-9);
  CHECK_THROWS_AS(od_pulse_shape(in, longer, kCs), DataError);
}

TEST_CASE("trace and scan files round trip") {
  const auto dir = testing::scratch_dir("od_io");
  const auto in = testing::short_probe();
  save_trace(dir / "trace.csv", in);
  const auto back = load_trace(dir / "trace.csv");
  REQUIRE(back.size() == in.size());
  CHECK(back.sample_period == doctest::Approx(in.sample_period).epsilon(1e-12));
  for (std::size_t k = 0; k < in.size(); ++k)
    CHECK(back.envelope[k].real() == std::abs(in.envelope[k]));

  Rng rng(57);
  const auto pts = testing::scan_points(rng, 3.0, kCs);
  save_scan(dir / "scan.csv", pts);
  const auto got = load_scan(dir / "scan.csv");
  REQUIRE(got.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(got[i].detuning == doctest::Approx(pts[i].detuning).epsilon(1e-14));
    CHECK(got[i].transmission == pts[i].transmission);
  }
}

TEST_CASE("malformed trace files are rejected") {
  const auto dir = testing::scratch_dir("od_bad");
  {
    std::ofstream os(dir / "gap.csv");
    os << "time_ns,amplitude\n0,1\n1,1\n3,1\n4,1\n";
  }
  CHECK_THROWS_AS(load_trace(dir / "gap.csv"), DataError);
  {
    std::ofstream os(dir / "header.csv");
    os << "t,a\n0,1\n1,1\n";
  }
  CHECK_THROWS_AS(load_trace(dir / "header.csv"), DataError);
  {
    std::ofstream os(dir / "text.csv");
    os << "time_ns,amplitude\n0,1\n1,x\n";
  }
  try {
    load_trace(dir / "text.csv");
    FAIL("expected DataError");
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_trace(dir / "missing.csv"), DataError);
}
