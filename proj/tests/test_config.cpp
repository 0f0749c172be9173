#include "dlcz/config.hpp"
#include "dlcz/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>

using namespace dlcz;
using namespace dlcz::config;
using testing::Rng;

namespace {

sim::ExperimentConfig random_config(Rng &rng) {
  sim::ExperimentConfig c;
  auto u = [&](double lo, double hi) { return testing::uniform(rng, lo, hi); };
  c.seed = rng();
  c.atom.gamma = u(1e7, 1e8);
  c.atom.wavelength = u(500e-9, 1000e-9);
  c.atom.i_sat = u(10, 100);
  c.ensemble.od = u(0, 10);
  c.ensemble.waist = u(10e-6, 500e-6);
  if (rng() % 3 == 0)
    c.ensemble.n_atoms = u(1e5, 1e8);
  c.readout.power = u(1e-5, 5e-3);
  c.readout.alpha = u(1, 30);
  c.chi_from_od = rng() % 2 == 0;
  c.readout.chi = c.chi_from_od ? 1.0 : u(1, 6);
  c.readout.dt = u(0.5e-9, 4e-9);
  c.model.mean_excitation = u(0, 0.5);
  c.model.field1_cond_efficiency = u(0, 1);
  c.model.field1_noise = u(0, 1e-3);
  c.model.retrieval_efficiency = u(0, 1);
  c.model.chain_efficiency = u(0, 1);
  c.model.field2_background_rate = u(0, 1e-3);
  c.model.coherence_time = u(1e-7, 1e-5);
  c.model.write_read_delay = u(0, 1e-6);
  c.model.photon_statistics = rng() % 2 ? sim::PhotonStatistics::thermal
                                        : sim::PhotonStatistics::poisson;
  c.model.decoherence_law = rng() % 2 ? sim::DecoherenceLaw::exponential
                                      : sim::DecoherenceLaw::gaussian;
  c.model.retrieval_law = rng() % 2 ? sim::RetrievalLaw::constant
                                    : sim::RetrievalLaw::saturating;
  c.model.retrieval_od_scale = u(0.5, 5);
  c.timing.trial_period = u(1e-6, 5e-6);
  c.timing.write_duration = u(10e-9, 100e-9);
  c.timing.read_duration = u(100e-9, 900e-9);
  c.readout.read_duration = c.timing.read_duration;
  c.timing.apd_window = u(1e-4, 1e-3);
  c.timing.n_trials = rng() % 100000000;
  if (rng() % 2) {
    static const char *keys[] = {"od", "power", "delay", "mean_excitation"};
    sim::SweepSpec s{keys[rng() % 4], {}};
    for (int i = 0, n = 1 + static_cast<int>(rng() % 6); i < n; ++i)
      s.values.push_back(u(0, 5));
    c.sweep = s;
  }
  return c;
}

std::string error_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST_CASE("emit then parse reproduces random configurations") {
  Rng rng(61);
  for (int i = 0; i < 500; ++i) {
    const auto c = random_config(rng);
    const auto text = emit_config(c);
    const auto back = parse_config(text);
    INFO(text);
    CHECK(back == c);
    CHECK(emit_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
  }
}

TEST_CASE("config hash is the FNV-1a digest of the canonical text") {
  sim::ExperimentConfig c;
  const auto text = emit_config(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  CHECK(config_hash(c) == h);
  auto d = c;
  d.seed += 1;
  CHECK(config_hash(d) != config_hash(c));
}

TEST_CASE("units convert to SI") {
  CHECK(parse_quantity("840 ns", Dimension::time) == doctest::Approx(840e-9).epsilon(1e-15));
  CHECK(parse_quantity("0.5 ms", Dimension::time) == doctest::Approx(0.5e-3).epsilon(1e-15));
  CHECK(parse_quantity("1 us", Dimension::time) == doctest::Approx(1e-6).epsilon(1e-15));
  CHECK(parse_quantity("0.3 mW", Dimension::power) == doctest::Approx(0.3e-3).epsilon(1e-15));
  CHECK(parse_quantity("852.3 nm", Dimension::length) ==
        doctest::Approx(852.3e-9).epsilon(1e-15));
  CHECK(parse_quantity("100 um", Dimension::length) == doctest::Approx(100e-6).epsilon(1e-15));
  CHECK(parse_quantity("3.5 mW/cm2", Dimension::intensity) ==
        doctest::Approx(35.0).epsilon(1e-15));
  CHECK(parse_quantity("5.2 MHz", Dimension::angular_rate) ==
        doctest::Approx(2 * std::numbers::pi * 5.2e6).epsilon(1e-15));
  CHECK(parse_quantity("9 mW^-1/2", Dimension::alpha) == 9.0);
  CHECK(parse_quantity("4.8", Dimension::none) == 4.8);
}

TEST_CASE("unit errors") {
  CHECK_THROWS_AS(parse_quantity("840", Dimension::time), ConfigError);
  CHECK_THROWS_AS(parse_quantity("840 furlongs", Dimension::time), ConfigError);
  CHECK_THROWS_AS(parse_quantity("0.3 mW", Dimension::time), ConfigError);
  CHECK_THROWS_AS(parse_quantity("4.8 ns", Dimension::none), ConfigError);
  CHECK_THROWS_AS(parse_quantity("abc ns", Dimension::time), ConfigError);
  CHECK_THROWS_AS(parse_quantity("", Dimension::none), ConfigError);
}

TEST_CASE("parse errors name the offending line") {
  CHECK(error_of("seed = 1\n\nreadout.power = 0.3\n").find("line 3") != std::string::npos);
  CHECK(error_of("# comment\nbogus.key = 1\n").find("line 2") != std::string::npos);
  CHECK(error_of("# comment\nbogus.key = 1\n").find("unknown key") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("duplicate") != std::string::npos);
  CHECK(error_of("seed 1\n").find("line 1") != std::string::npos);
  CHECK(error_of("seed =\n").find("line 1") != std::string::npos);
  CHECK(error_of("model.photon_statistics = squeezed\n").find("thermal") != std::string::npos);
  CHECK(error_of("sweep.colour = 1, 2\n").find("unknown sweep key") != std::string::npos);
  CHECK(error_of("sweep.od = 1, 2\nsweep.power = 1 mW\n").find("one sweep") != std::string::npos);
  CHECK(error_of("sweep.od = 1, , 2\n").find("empty") != std::string::npos);
}

TEST_CASE("comments, blank lines and defaults") {
  const auto c = parse_config("  # header\n\nseed = 7   # trailing\n");
  sim::ExperimentConfig d;
  d.seed = 7;
  CHECK(c == d);
  CHECK(parse_config("") == sim::ExperimentConfig{});
}

TEST_CASE("sweep lists take one trailing unit") {
  const auto c = parse_config("sweep.power = 2.1, 1.2, 0.6 mW\n");
  REQUIRE(c.sweep);
  CHECK(c.sweep->key == "power");
  REQUIRE(c.sweep->values.size() == 3);
  CHECK(c.sweep->values[0] == doctest::Approx(2.1e-3).epsilon(1e-15));
  CHECK(c.sweep->values[2] == doctest::Approx(0.6e-3).epsilon(1e-15));
  const auto d = parse_config("sweep.od = 4.8, 4.0\n");
  CHECK(d.sweep->values == std::vector<double>{4.8, 4.0});
  CHECK_THROWS_AS(parse_config("sweep.power = 2.1, 1.2\n"), ConfigError);
}

TEST_CASE("chi is auto or a number") {
  CHECK(parse_config("readout.chi = auto\n").chi_from_od);
  const auto c = parse_config("readout.chi = 2.5\n");
  CHECK_FALSE(c.chi_from_od);
  CHECK(c.readout.chi == 2.5);
}

TEST_CASE("shipped presets load and validate") {
  const auto dir = std::filesystem::path(DLCZ_SOURCE_DIR) / "presets";
  int n = 0;
  for (const auto &entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".cfg")
      continue;
    INFO(entry.path());
    const auto c = load_config(entry.path());
    CHECK_NOTHROW(c.validate());
    CHECK(parse_config(emit_config(c)) == c);
    ++n;
  }
  CHECK(n >= 5);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), ConfigError);
}
