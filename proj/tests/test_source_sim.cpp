#include "dlcz/config.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/source_sim.hpp"
#include "dlcz/statistics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace dlcz;
using namespace dlcz::sim;

namespace {

ExperimentConfig base_config(std::uint64_t trials = 1000000) {
  ExperimentConfig c;
  c.ensemble.od = 4.8;
  c.readout.power = 0.3e-3;
  c.readout.alpha = 9.0;
  c.timing.n_trials = trials;
  c.seed = 99;
  return c;
}

stats::CoincidenceStats run_stats(const ExperimentConfig &c, unsigned workers = 1) {
  const auto ev = simulate(c, {workers, std::nullopt});
  return stats::accumulate(ev, c.timing);
}

// |a - b| within k joint standard errors.
bool within(const Estimate &a, double b, double k) {
  return std::abs(a.value - b) <= k * a.error;
}

} // namespace

TEST_CASE("empty source emits nothing") {
  auto c = base_config(100000);
  c.model.mean_excitation = 0.0;
  c.model.field1_noise = 0.0;
  c.model.field2_background_rate = 0.0;
  CHECK(simulate(c).empty());
}

TEST_CASE("event stream is identical for any worker count and partition") {
  auto c = base_config(60000);
  c.model.mean_excitation = 0.3;
  c.model.field2_background_rate = 0.01;
  const auto serial = simulate(c, {1, std::nullopt});
  REQUIRE(serial.size() > 1000);
  for (unsigned w : {2u, 3u, 7u, 16u})
    CHECK(simulate(c, {w, std::nullopt}) == serial);

  std::vector<DetectionEvent> pieced;
  for (auto [b, n] : {std::pair<std::uint64_t, std::uint64_t>{0, 12345}, {12345, 1},
                      {12346, 47654}}) {
    const auto part = simulate(c, {2, std::make_pair(b, n)});
    pieced.insert(pieced.end(), part.begin(), part.end());
  }
  CHECK(pieced == serial);
}

TEST_CASE("events are sorted and inside their windows") {
  auto c = base_config(50000);
  c.model.mean_excitation = 0.5;
  c.model.field2_background_rate = 0.05;
  c.model.field1_noise = 0.05;
  const auto ev = simulate(c);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto &e = ev[i];
    CHECK(e.time_ns >= 0.0);
    if (is_field1(e.channel))
      CHECK(e.time_ns <= c.timing.write_duration * 1e9);
    else
      CHECK(e.time_ns <= c.timing.read_duration * 1e9);
    if (i > 0) {
      const auto &p = ev[i - 1];
      const bool ordered = p.trial < e.trial ||
                           (p.trial == e.trial && (p.channel < e.channel ||
                                                   (p.channel == e.channel &&
                                                    p.time_ns <= e.time_ns)));
      CHECK(ordered);
    }
  }
}

TEST_CASE("emission sampler passes a Kolmogorov-Smirnov test") {
  const auto atom = physics::AtomSpec::cesium_d2();
  for (double power : {2.1e-3, 0.3e-3, 0.075e-3}) {
    physics::ReadoutSpec r;
    r.power = power;
    r.alpha = 9.0;
    r.chi = 3.8;
    const EmissionSampler sampler(r, atom);
    SplitMix64 rng(2024);
    const std::size_t n = 100000;
    std::vector<double> x(n);
    for (auto &v : x)
      v = sampler.sample(rng);
    std::sort(x.begin(), x.end());
    const double mass = 1.0 - physics::wavepacket_survival(r.read_duration, r, atom);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = (1.0 - physics::wavepacket_survival(x[i], r, atom)) / mass;
      d = std::max({d, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
    }
    INFO("power " << power << " D = " << d);
    CHECK(d < 1.63 / std::sqrt(double(n)));
  }
}

TEST_CASE("emission histogram matches quadrature bin by bin") {
  const auto atom = physics::AtomSpec::cesium_d2();
  physics::ReadoutSpec r;
  r.power = 2.1e-3;
  r.alpha = 9.0;
  r.chi = 3.8;
  const EmissionSampler sampler(r, atom);
  SplitMix64 rng(77);
  const std::size_t n = 1000000;
  const double bin = 1e-9;
  std::vector<double> counts(200, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(sampler.sample(rng) / bin);
    if (k < counts.size())
      counts[k] += 1.0;
  }
  const double mass = sampler.window_mass();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double p = testing::integrate(
        [&](double t) { return physics::wavepacket_density(t, r, atom) / r.dt; }, k * bin,
        (k + 1) * bin, 1e-10, 0);
    const double expected = n * p / mass;
    INFO("bin " << k);
    CHECK(std::abs(counts[k] - expected) <= 4.0 * std::sqrt(std::max(expected, 1.0)));
  }
}

TEST_CASE("short read window truncates samples") {
  const auto atom = physics::AtomSpec::cesium_d2();
  physics::ReadoutSpec r;
  r.power = 0.3e-3;
  r.alpha = 9.0;
  r.chi = 3.8;
  r.read_duration = 5e-9;
  const EmissionSampler sampler(r, atom);
  CHECK(sampler.window_mass() < 0.1);
  SplitMix64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double t = sampler.sample(rng);
    CHECK(t >= 0.0);
    CHECK(t <= r.read_duration);
  }
}

TEST_CASE("emission time draw is deterministic in the seed") {
  const auto atom = physics::AtomSpec::cesium_d2();
  physics::ReadoutSpec r;
  CHECK(sample_emission_time(r, atom, 5) == sample_emission_time(r, atom, 5));
  CHECK(sample_emission_time(r, atom, 5) != sample_emission_time(r, atom, 6));
}

TEST_CASE("click probabilities rise with mean excitation") {
  auto c = base_config();
  double p1 = 0.0, p2 = 0.0;
  for (double n : {0.005, 0.02, 0.08, 0.3}) {
    c.model.mean_excitation = n;
    const auto s = run_stats(c);
    CHECK(s.p1().value > p1);
    CHECK(s.p2().value > p2);
    p1 = s.p1().value;
    p2 = s.p2().value;
  }
}

TEST_CASE("retrieved photon number follows thermal statistics") {
  auto c = base_config();
  c.model.mean_excitation = 0.4;
  c.model.retrieval_efficiency = 1.0;
  c.model.chain_efficiency = 1.0;
  c.model.field1_noise = 0.0;
  c.model.field2_background_rate = 0.0;
  const auto ev = simulate(c);
  std::map<std::uint64_t, double> photons;
  for (const auto &e : ev)
    if (!is_field1(e.channel))
      photons[e.trial] += 1.0;
  const double n = double(c.timing.n_trials);
  double s1 = 0.0, s2 = 0.0;
  for (const auto &[t, k] : photons) {
    s1 += k;
    s2 += k * k;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double nbar = c.model.mean_excitation;
  CHECK(std::abs(mean - nbar) < 3.0 * std::sqrt(nbar * (1 + nbar) / n));
  // Variance of the sample variance for a geometric law, m4 - var^2.
  const double v = nbar * (1 + nbar);
  const double m4 = v * (1 + 9 * v);
  CHECK(std::abs(var - v) < 3.0 * std::sqrt((m4 - v * v) / n));
}

TEST_CASE("weak heralded source shows antibunching") {
  auto c = base_config(10000000);
  c.model.mean_excitation = 0.01;
  c.model.field1_noise = 0.0;
  c.model.field2_background_rate = 0.0;
  c.model.retrieval_efficiency = 1.0;
  c.model.chain_efficiency = 1.0;
  c.model.field1_cond_efficiency = 1.0;
  const auto s = run_stats(c, 4);
  const auto p = predict_probabilities(c);
  CHECK(p.g2c < 0.05);
  CHECK(s.g2c().value < 0.05 + 3.0 * s.g2c().error);
}

TEST_CASE("Monte Carlo agrees with the generating-function prediction") {
  auto c = base_config(2000000);
  c.model.mean_excitation = 0.1;
  c.model.field1_noise = 1e-3;
  c.model.field2_background_rate = 2e-3;
  for (auto law : {PhotonStatistics::thermal, PhotonStatistics::poisson}) {
    c.model.photon_statistics = law;
    const auto s = run_stats(c, 4);
    const auto p = predict_probabilities(c);
    CHECK(within(s.p1(), p.p1, 4.0));
    CHECK(within(s.p2(), p.p2, 4.0));
    CHECK(within(s.p12(), p.p12, 4.0));
    CHECK(within(s.p122(), p.p122, 4.0));
    CHECK(within(s.pc(), p.pc, 4.0));
    CHECK(within(s.g12(), p.g12, 4.0));
    CHECK(within(s.g2c(), p.g2c, 4.0));
  }
}

TEST_CASE("conditional probability plateaus at retrieval times chain efficiency") {
  auto c = base_config(4000000);
  c.model.retrieval_efficiency = 0.47;
  c.model.chain_efficiency = 0.19 / 0.47;
  c.model.field1_noise = 1e-6;
  c.model.field2_background_rate = 1e-6;
  for (double n : {0.003, 0.01, 0.03}) {
    c.model.mean_excitation = n;
    const auto s = run_stats(c, 4);
    INFO("mean excitation " << n);
    CHECK(std::abs(s.pc().value - 0.19) < 0.01 + 3.0 * s.pc().error);
  }
}

TEST_CASE("write-read delay reduces only the correlated part") {
  auto c = base_config(2000000);
  c.model.coherence_time = 700e-9;
  c.timing.trial_period = 5e-6;
  c.model.field2_background_rate = 1e-3;
  const auto scan = delay_scan(c, {0.0, 700e-9});
  const auto s0 = stats::accumulate(scan[0].events, c.timing);
  const auto s1 = stats::accumulate(scan[1].events, c.timing);

  auto at = [&](double d) {
    auto k = c;
    k.model.write_read_delay = d;
    return predict_probabilities(k);
  };
  CHECK(c.model.decoherence_factor() == 1.0);
  const auto p0 = at(0.0);
  const auto p1 = at(700e-9);
  CHECK(within(s0.pc(), p0.pc, 4.0));
  CHECK(within(s1.pc(), p1.pc, 4.0));
  CHECK(within(s0.p2(), p0.p2, 4.0));
  CHECK(within(s1.p2(), p1.p2, 4.0));
  // One coherence time removes a factor e from the excess correlation,
  // up to the small nonlinearity of the click model.
  CHECK((p1.pc - p1.p2) / (p0.pc - p0.p2) == doctest::Approx(std::exp(-1.0)).epsilon(0.02));

  for (auto law : {DecoherenceLaw::exponential, DecoherenceLaw::gaussian}) {
    SourceModel m;
    m.decoherence_law = law;
    m.coherence_time = 300e-9;
    m.write_read_delay = 300e-9;
    CHECK(m.decoherence_factor() == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  }
}

TEST_CASE("correlations survive the shipped delay scan") {
  const auto c = config::load_config(DLCZ_SOURCE_DIR "/presets/delay_scan.cfg");
  REQUIRE(c.sweep);
  REQUIRE(c.sweep->key == "delay");
  CHECK(c.sweep->values.back() >= 500e-9);
  const auto first = predict_probabilities(c.sweep_point(0));
  for (std::size_t i = 0; i < c.sweep->values.size(); ++i) {
    const auto p = predict_probabilities(c.sweep_point(i));
    CHECK(p.g12 > 2.0);
    // Background dominates P2, so it stays nearly flat while Pc decays.
    const double drop_p2 = 1.0 - p.p2 / first.p2;
    const double drop_pc = 1.0 - p.pc / first.pc;
    CHECK(drop_p2 <= 0.25 * drop_pc + 1e-12);
  }
  auto last = c.sweep_point(c.sweep->values.size() - 1);
  last.timing.n_trials = 1000000;
  const auto s = run_stats(last, 4);
  CHECK(s.g12().value - 3.0 * s.g12().error > 2.0);
}

TEST_CASE("saturating retrieval has a quadratic onset and a plateau") {
  SourceModel m;
  m.retrieval_law = RetrievalLaw::saturating;
  m.retrieval_od_scale = 2.5;
  CHECK(m.retrieval_at(0.02) / m.retrieval_at(0.01) == doctest::Approx(4.0).epsilon(1e-3));
  CHECK(m.retrieval_at(100.0) == doctest::Approx(m.retrieval_efficiency).epsilon(1e-3));
  m.retrieval_law = RetrievalLaw::constant;
  CHECK(m.retrieval_at(0.01) == m.retrieval_efficiency);
}

TEST_CASE("background calibration places the threshold") {
  auto c = base_config();
  c.model.retrieval_law = RetrievalLaw::saturating;
  const double rate = calibrate_background_for_threshold(c, 0.6);
  c.model.field2_background_rate = rate;
  c.ensemble.od = 0.6;
  CHECK(predict_probabilities(c).g12 == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("sweep points get distinct seeds and the swept value") {
  auto c = base_config();
  c.sweep = SweepSpec{"od", {1.0, 2.0, 3.0}};
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = c.sweep_point(i);
    CHECK(p.ensemble.od == c.sweep->values[i]);
    CHECK_FALSE(p.sweep);
    CHECK(p.readout.chi == doctest::Approx(physics::chi_from_od(p.ensemble.od, p.atom)));
    seeds.insert(p.seed);
  }
  CHECK(seeds.size() == 3);
  CHECK(c.sweep_point(1) == c.sweep_point(1));
  CHECK_THROWS_AS(c.sweep_point(3), ConfigError);
}

TEST_CASE("inconsistent timing is a configuration error") {
  auto c = base_config();
  c.timing.trial_period = 500e-9;
  CHECK_THROWS_AS(simulate(c), ConfigError);
  c = base_config();
  c.model.chain_efficiency = 1.5;
  CHECK_THROWS_AS(simulate(c), ConfigError);
}
