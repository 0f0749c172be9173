#include "dlcz/errors.hpp"
#include "dlcz/event_io.hpp"
#include "dlcz/source_sim.hpp"
#include "dlcz/statistics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace dlcz;
using namespace dlcz::io;
using testing::Rng;

namespace {

EventFile random_file(Rng &rng, std::size_t n) {
  EventFile f;
  f.meta.values["n_trials"] = "1000";
  f.meta.values["read_duration_s"] = exact(840e-9);
  f.meta.values["config_hash"] = "00000000deadbeef";
  std::uint64_t trial = 0;
  for (std::size_t i = 0; i < n; ++i) {
    trial += rng() % 3;
    sim::DetectionEvent e;
    e.trial = trial;
    e.channel = static_cast<sim::Channel>(rng() % 4);
    e.time_ns = testing::uniform(rng, 0.0, 840.0);
    f.events.push_back(e);
  }
  return f;
}

std::string error_of(const std::string &text) {
  std::istringstream is(text);
  try {
    read_events_csv(is);
  } catch (const DataError &e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST_CASE("csv and binary event files round trip exactly") {
  Rng rng(71);
  for (int i = 0; i < 50; ++i) {
    const auto f = random_file(rng, rng() % 500);
    std::stringstream csv, bin;
    write_events_csv(csv, f);
    write_events_binary(bin, f);
    const auto a = read_events_csv(csv);
    const auto b = read_events_binary(bin);
    CHECK(a.events == f.events);
    CHECK(b.events == f.events);
    CHECK(a.meta.values == f.meta.values);
    CHECK(b.meta.values == f.meta.values);
  }
}

TEST_CASE("event file layout") {
  EventFile f;
  f.meta.values["n_trials"] = "4";
  f.events.push_back({0, sim::Channel::d1a, 12.25});
  f.events.push_back({3, sim::Channel::d2b, 0.5});
  std::stringstream ss;
  write_events_csv(ss, f);
  CHECK(ss.str() == "# dlcz-events v1 n_trials=4\ntrial,channel,time_ns\n0,1a,12.25\n3,2b,0.5\n");

  std::stringstream bin;
  write_events_binary(bin, f);
  const auto bytes = bin.str();
  CHECK(bytes.substr(0, 8) == "DLCZEVT1");
  CHECK(bytes.size() == 8 + 4 + std::string("n_trials=4").size() + 8 + 2 * 17);
}

TEST_CASE("metadata accessors") {
  sim::ExperimentConfig c;
  c.timing.n_trials = 1234;
  const auto m = EventMetadata::from_config(c, 0xabcdefULL);
  CHECK(m.config_hash() == 0xabcdefULL);
  CHECK(m.n_trials() == 1234);
  CHECK(m.timing().read_duration == c.timing.read_duration);
  CHECK(m.atom() == c.atom);
  CHECK(m.number("chi") == c.resolved().readout.chi);
  CHECK(EventMetadata::parse(m.serialize()).values == m.values);
  CHECK_THROWS_AS(m.number("absent"), DataError);
  CHECK_THROWS_AS(EventMetadata::parse("novalue"), DataError);
  EventMetadata bad;
  bad.values["config_hash"] = "xyz";
  CHECK_THROWS_AS(bad.config_hash(), DataError);
  CHECK_THROWS_AS(bad.n_trials(), DataError);
}

TEST_CASE("malformed event lines are rejected with their line number") {
  const std::string head = "# dlcz-events v1 n_trials=4\ntrial,channel,time_ns\n";
  CHECK(error_of(head + "0,1a,1.5\n0,1a\n").find("line 4") != std::string::npos);
  CHECK(error_of(head + "0,3c,1.5\n").find("line 3") != std::string::npos);
  CHECK(error_of(head + "0,1a,-1\n").find("line 3") != std::string::npos);
  CHECK(error_of(head + "x,1a,1\n").find("line 3") != std::string::npos);
  CHECK(error_of(head + "0,1a,1.5z\n").find("line 3") != std::string::npos);
  CHECK(error_of("").find("line 1") != std::string::npos);
  CHECK(error_of("trial,channel,time_ns\n").find("line 1") != std::string::npos);
  CHECK(error_of("# dlcz-events v1\ntrial,time\n").find("line 2") != std::string::npos);
}

TEST_CASE("malformed binary files are rejected") {
  Rng rng(72);
  std::stringstream bin;
  write_events_binary(bin, random_file(rng, 10));
  const auto bytes = bin.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_events_binary(truncated), DataError);
  std::istringstream magic("NOTDLCZ!" + bytes.substr(8));
  CHECK_THROWS_AS(read_events_binary(magic), DataError);
  auto bad = bytes;
  bad[bytes.size() - 9] = 9; // channel code of the last event
  std::istringstream code(bad);
  CHECK_THROWS_AS(read_events_binary(code), DataError);
}

TEST_CASE("save and load dispatch on the extension") {
  Rng rng(73);
  const auto dir = testing::scratch_dir("event_io");
  const auto f = random_file(rng, 100);
  save_events(dir / "e.csv", f);
  save_events(dir / "e.bin", f);
  CHECK(load_events(dir / "e.csv").events == f.events);
  CHECK(load_events(dir / "e.bin").events == f.events);
  std::ifstream is(dir / "e.bin", std::ios::binary);
  char magic[8];
  is.read(magic, 8);
  CHECK(std::string(magic, 8) == "DLCZEVT1");
  CHECK_THROWS_AS(load_events(dir / "absent.csv"), DataError);
  CHECK(file_digest(dir / "e.csv") == fnv1a64([&] {
          std::ifstream s(dir / "e.csv", std::ios::binary);
          std::ostringstream o;
          o << s.rdbuf();
          return o.str();
        }()));
}

TEST_CASE("digest and exact formatting") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  Rng rng(74);
  for (int i = 0; i < 1000; ++i) {
    const double v = testing::log_uniform(rng, 1e-300, 1e300) * (rng() % 2 ? 1 : -1);
    CHECK(std::stod(exact(v)) == v);
  }
}

TEST_CASE("tables round trip and report bad rows") {
  Table t;
  t.kind = "analysis";
  t.meta.values["od"] = "4.8";
  t.columns = {"a", "b"};
  t.rows = {{1.5, 2.0}, {0.1, 1e-300}};
  std::stringstream ss;
  write_table(ss, t);
  const auto back = read_table(ss);
  CHECK(back.kind == "analysis");
  CHECK(back.meta.values == t.meta.values);
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(back.values("b") == std::vector<double>{2.0, 1e-300});
  CHECK_THROWS_AS(back.column("c"), DataError);

  std::istringstream short_row("# dlcz-analysis v1\na,b\n1,2\n3\n");
  try {
    read_table(short_row);
    FAIL("expected DataError");
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::istringstream no_tag("a,b\n1,2\n");
  CHECK_THROWS_AS(read_table(no_tag), DataError);
}

TEST_CASE("wavepacket tables round trip") {
  sim::ExperimentConfig c;
  c.timing.n_trials = 200000;
  c.seed = 75;
  const auto ev = sim::simulate(c);
  const auto wp = stats::histogram_wavepacket(ev, c.timing, 4e-9);
  EventMetadata extra;
  extra.values["power"] = exact(c.readout.power);
  const auto t = wavepacket_table(wp, extra);
  CHECK(t.kind == "wavepacket");
  CHECK(t.meta.has("power"));
  const auto back = wavepacket_from_table(t);
  CHECK(back.n_trials == wp.n_trials);
  CHECK(back.n_heralds == wp.n_heralds);
  CHECK(back.n_coincident == wp.n_coincident);
  CHECK(back.bin_width == wp.bin_width);
  REQUIRE(back.bins.size() == wp.bins.size());
  for (std::size_t i = 0; i < wp.bins.size(); ++i) {
    CHECK(back.bins[i].heralded == wp.bins[i].heralded);
    CHECK(back.bins[i].total == wp.bins[i].total);
    CHECK(back.bins[i].t_start == doctest::Approx(wp.bins[i].t_start).epsilon(1e-14));
  }
  Table other = t;
  other.kind = "analysis";
  CHECK_THROWS_AS(wavepacket_from_table(other), DataError);
}
