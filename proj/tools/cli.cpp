#include "cli.hpp"

#include "dlcz/config.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/event_io.hpp"
#include "dlcz/inference.hpp"
#include "dlcz/od_probe.hpp"
#include "dlcz/report.hpp"
#include "dlcz/source_sim.hpp"
#include "dlcz/statistics.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace dlcz::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Manifest {
  std::string command;
  std::optional<std::uint64_t> config_hash;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  Clock::time_point start = Clock::now();
};

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

void write_manifest(const fs::path &path, const Manifest &m) {
  nlohmann::ordered_json j;
  j["tool"] = "dlcz";
  j["version"] = kToolVersion;
  j["command"] = m.command;
  if (m.config_hash)
    j["config_hash"] = hex(*m.config_hash);
  else
    j["config_hash"] = nullptr;
  auto files = [](const std::vector<fs::path> &paths) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto &p : paths)
      arr.push_back({{"path", p.generic_string()}, {"fnv1a64", hex(io::file_digest(p))}});
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  j["wall_clock_s"] = std::chrono::duration<double>(Clock::now() - m.start).count();
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw DataError("cannot write " + path.string());
  os << text;
  if (!os)
    throw DataError("write failed for " + path.string());
}

fs::path manifest_beside(const fs::path &output) {
  return fs::path(output.string() + ".manifest.json");
}

std::string joined(const std::vector<std::string> &args) {
  std::string s = "dlcz";
  for (const auto &a : args)
    s += ' ' + a;
  return s;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  unsigned workers = 1;
  bool binary = false;
};

struct PointResult {
  fs::path events;
  fs::path config;
  report::AnalysisPoint analysis;
  std::size_t n_events = 0;
};

PointResult simulate_point(const sim::ExperimentConfig &cfg, const fs::path &dir,
                           const std::string &ext, unsigned workers) {
  fs::create_directories(dir);
  const auto hash = config::config_hash(cfg);
  io::EventFile file;
  file.meta = io::EventMetadata::from_config(cfg, hash);
  file.events = sim::simulate(cfg, {workers, std::nullopt});
  PointResult r;
  r.events = dir / ("events" + ext);
  r.config = dir / "config.txt";
  io::save_events(r.events, file);
  write_text(r.config, config::emit_config(cfg));
  r.analysis = {file.meta, stats::accumulate(file.events, cfg.resolved().timing, hash)};
  r.n_events = file.events.size();
  return r;
}

int cmd_simulate(const SimulateArgs &a, const std::string &command, std::ostream &out) {
  Manifest m;
  m.command = command;
  auto cfg = config::load_config(a.config);
  if (a.seed)
    cfg.seed = *a.seed;
  if (a.trials)
    cfg.timing.n_trials = *a.trials;
  cfg.validate();
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  m.inputs.push_back(a.config);
  m.config_hash = config::config_hash(cfg);
  const std::string ext = a.binary ? ".bin" : ".csv";
  const unsigned workers = std::max(1u, a.workers);

  if (!cfg.sweep) {
    const auto r = simulate_point(cfg.resolved(), dir, ext, workers);
    m.outputs = {r.events, r.config};
    write_manifest(dir / "manifest.json", m);
    fmt::print(out, "wrote {} events to {}\n", r.n_events, r.events.string());
    return kOk;
  }

  const std::size_t n = cfg.sweep->values.size();
  std::vector<PointResult> results(n);
  for (std::size_t first = 0; first < n; first += workers) {
    std::vector<std::future<PointResult>> jobs;
    for (std::size_t i = first; i < std::min(n, first + workers); ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return simulate_point(cfg.sweep_point(i), dir / fmt::format("point_{:02}", i), ext, 1);
      }));
    for (std::size_t k = 0; k < jobs.size(); ++k)
      results[first + k] = jobs[k].get();
  }
  std::vector<report::AnalysisPoint> points;
  for (const auto &r : results) {
    m.outputs.push_back(r.events);
    m.outputs.push_back(r.config);
    points.push_back(r.analysis);
    fmt::print(out, "wrote {} events to {}\n", r.n_events, r.events.string());
  }
  auto table = report::analysis_table(points);
  table.meta.values["config_hash"] = hex(*m.config_hash);
  table.meta.values["sweep"] = cfg.sweep->key;
  io::save_table(dir / "sweep.csv", table);
  write_text(dir / "config.txt", config::emit_config(cfg));
  m.outputs.push_back(dir / "sweep.csv");
  m.outputs.push_back(dir / "config.txt");
  write_manifest(dir / "manifest.json", m);
  return kOk;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> events;
  std::string format = "text";
  std::string out;
  std::string table;
};

void print_threshold(std::ostream &os, std::span<const report::AnalysisPoint> points) {
  std::vector<fit::ThresholdPoint> tp;
  std::set<double> ods;
  for (const auto &p : points) {
    const double od = p.meta.has("od") ? p.meta.number("od") : 0.0;
    ods.insert(od);
    tp.push_back({od, p.stats.pc(), p.stats.p2()});
  }
  if (ods.size() < 2)
    return;
  try {
    const auto f = fit::fit_threshold_slope(tp);
    fmt::print(os, "threshold.slope: {} +- {}\n", io::exact(f.slope->value),
               io::exact(f.slope->error));
    fmt::print(os, "threshold.points_used: {}\n", f.used.size());
    fmt::print(os, "threshold.chi2_reduced: {}\n", io::exact(f.chi_squared_reduced));
    if (f.od_threshold)
      fmt::print(os, "threshold.od_g12_2: {}\n", io::exact(*f.od_threshold));
    else
      fmt::print(os, "threshold.od_g12_2: {}\n",
                 f.threshold_below_range ? "below range" : "not crossed");
  } catch (const DataError &e) {
    fmt::print(os, "threshold.slope: unavailable ({})\n", e.what());
  }
}

int cmd_analyze(const AnalyzeArgs &a, const std::string &command, std::ostream &out) {
  if (a.format != "text" && a.format != "csv")
    throw DomainError("--format must be text or csv");
  Manifest m;
  m.command = command;
  std::vector<report::AnalysisPoint> points;
  std::ostringstream ss;
  for (const auto &path : a.events) {
    const auto file = io::load_events(path);
    m.inputs.push_back(path);
    const auto s = stats::accumulate(file.events, file.meta.timing(), file.meta.config_hash());
    if (a.events.size() > 1)
      fmt::print(ss, a.format == "csv" ? "# {}\n" : "== {}\n", path);
    if (a.format == "csv")
      stats::write_stats_csv(ss, s);
    else
      stats::write_stats_text(ss, s);
    points.push_back({file.meta, s});
  }
  if (a.format == "text")
    print_threshold(ss, points);

  if (a.out.empty()) {
    out << ss.str();
  } else {
    write_text(a.out, ss.str());
    m.outputs.push_back(a.out);
  }
  if (!a.table.empty()) {
    io::save_table(a.table, report::analysis_table(points));
    m.outputs.push_back(a.table);
  }
  if (!m.outputs.empty())
    write_manifest(manifest_beside(m.outputs.front()), m);
  return kOk;
}

// -------------------------------------------------------------- wavepacket

struct WavepacketArgs {
  std::string events;
  double bin_ns = 1.0;
  std::string out;
};

int cmd_wavepacket(const WavepacketArgs &a, const std::string &command, std::ostream &out) {
  Manifest m;
  m.command = command;
  const auto file = io::load_events(a.events);
  m.inputs.push_back(a.events);
  if (file.meta.has("config_hash"))
    m.config_hash = file.meta.config_hash();
  const auto wp = stats::histogram_wavepacket(file.events, file.meta.timing(), a.bin_ns * 1e-9);
  io::EventMetadata extra = file.meta;
  extra.values["source_fnv1a64"] = hex(io::file_digest(a.events));
  io::save_table(a.out, io::wavepacket_table(wp, extra));
  m.outputs.push_back(a.out);
  write_manifest(manifest_beside(a.out), m);
  fmt::print(out, "wrote {} bins (P_c = {}, {} coincidences) to {}\n", wp.bins.size(),
             io::exact(wp.normalization), wp.n_coincident, a.out);
  return kOk;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  std::vector<std::string> wavepackets;
  std::string mode = "global";
  std::string out_dir;
  double low_power_mw = 0.0;
  double low_power_weight = 1.0;
  double window_mass = 0.999;
  int max_iterations = 200;
};

int cmd_fit(const FitArgs &a, const std::string &command, std::ostream &out) {
  if (a.mode != "global" && a.mode != "per-curve")
    throw DomainError("--fit-mode must be global or per-curve");
  const auto mode = a.mode == "global" ? fit::FitMode::global : fit::FitMode::per_curve;
  Manifest m;
  m.command = command;
  std::vector<fit::CurveData> curves;
  physics::AtomSpec atom;
  for (std::size_t i = 0; i < a.wavepackets.size(); ++i) {
    const auto t = io::load_table(a.wavepackets[i]);
    m.inputs.push_back(a.wavepackets[i]);
    const auto wp = io::wavepacket_from_table(t);
    if (i == 0)
      atom = t.meta.atom();
    const double od = t.meta.has("od") ? t.meta.number("od")
                                       : std::numeric_limits<double>::quiet_NaN();
    try {
      curves.push_back(fit::curve_from_wavepacket(wp, t.meta.number("read_power_w"), od));
    } catch (const DataError &e) {
      throw DataError(a.wavepackets[i] + ": " + e.what());
    }
  }

  fit::WavepacketFitSettings settings;
  settings.low_power_threshold = a.low_power_mw * 1e-3;
  settings.low_power_weight = a.low_power_weight;
  settings.window_mass = a.window_mass;
  settings.lm.max_iterations = a.max_iterations;
  const auto fits = fit::fit_wavepacket(curves, atom, mode, settings);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::string rep;
  auto kv = [&rep](const std::string &k, const std::string &v) {
    rep += fmt::format("{} = {}\n", k, v);
  };
  kv("mode", a.mode);
  kv("curves", std::to_string(curves.size()));
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto &f = fits[i];
    const std::string p = fmt::format("fit.{}.", i);
    std::string idx;
    for (auto c : f.curves)
      idx += (idx.empty() ? "" : ",") + std::to_string(c);
    kv(p + "curves", idx);
    kv(p + "chi", io::exact(f.chi.value));
    kv(p + "chi_err", io::exact(f.chi.error));
    kv(p + "alpha", io::exact(f.alpha.value));
    kv(p + "alpha_err", io::exact(f.alpha.error));
    kv(p + "cov_chi_chi", io::exact(f.covariance(0, 0)));
    kv(p + "cov_chi_alpha", io::exact(f.covariance(0, 1)));
    kv(p + "cov_alpha_alpha", io::exact(f.covariance(1, 1)));
    kv(p + "chi_squared", io::exact(f.chi_squared));
    kv(p + "chi_squared_reduced", io::exact(f.chi_squared_reduced));
    kv(p + "dof", std::to_string(f.dof));
    kv(p + "iterations", std::to_string(f.iterations));
    kv(p + "converged", f.converged ? "true" : "false");
    kv(p + "stop_reason", f.stop_reason);
  }
  if (mode == fit::FitMode::per_curve) {
    std::vector<fit::CooperativityPoint> cp;
    std::set<double> ods;
    for (const auto &f : fits) {
      const double od = curves[f.curves.front()].od;
      if (std::isfinite(od) && ods.insert(od).second)
        cp.push_back({od, f.chi});
    }
    if (cp.size() >= 2) {
      const auto sf = fit::fit_cooperativity(cp);
      kv("cooperativity.beta", io::exact(sf.beta->value));
      kv("cooperativity.beta_err", io::exact(sf.beta->error));
      kv("cooperativity.dof", std::to_string(sf.dof));
      kv("cooperativity.chi_squared_reduced", io::exact(sf.chi_squared_reduced));
      kv("cooperativity.beta_theory", io::exact(physics::beta_theory(atom)));
    }
  }
  write_text(dir / "fit_report.txt", rep);
  io::save_table(dir / "fit.csv", report::fit_table(fits, curves, atom, mode));

  io::Table res;
  res.kind = "residuals";
  res.columns = {"fit", "curve", "t_ns", "residual"};
  for (std::size_t i = 0; i < fits.size(); ++i)
    for (std::size_t j = 0; j < fits[i].curves.size(); ++j) {
      const auto &c = curves[fits[i].curves[j]];
      for (std::size_t k = 0; k < fits[i].residuals[j].size(); ++k)
        res.rows.push_back({static_cast<double>(i), static_cast<double>(fits[i].curves[j]),
                            c.t[k] * 1e9, fits[i].residuals[j][k]});
    }
  io::save_table(dir / "residuals.csv", res);
  m.outputs = {dir / "fit_report.txt", dir / "fit.csv", dir / "residuals.csv"};
  write_manifest(dir / "manifest.json", m);
  out << rep;
  return kOk;
}

// ----------------------------------------------------------------- OD probes

physics::AtomSpec atom_from_linewidth(double mhz) {
  auto atom = physics::AtomSpec::cesium_d2();
  atom.gamma = physics::kTwoPi * mhz * 1e6;
  atom.validate();
  return atom;
}

void print_od(std::ostream &os, const od::ODEstimate &e) {
  fmt::print(os, "{}.od: {} +- {}\n", od::method_name(e.method), io::exact(e.od.value),
             io::exact(e.od.error));
}

struct ScanArgs {
  std::string scan;
  bool simulate = false;
  double od = 4.29;
  double noise = 0.0;
  std::uint64_t seed = 1;
  int points = 13;
  double span_gamma = 3.0;
  double linewidth_mhz = 5.2;
  std::string out;
};

int cmd_scan_od(const ScanArgs &a, const std::string &command, std::ostream &out) {
  const auto atom = atom_from_linewidth(a.linewidth_mhz);
  Manifest m;
  m.command = command;
  if (a.simulate) {
    if (a.out.empty())
      throw DomainError("--simulate needs --out");
    if (a.points < 5)
      throw DomainError("--points must be >= 5");
    auto rng = substream(a.seed, 0);
    std::normal_distribution<double> gauss;
    std::vector<od::ScanPoint> pts;
    for (int k = 0; k < a.points; ++k) {
      const double delta =
          a.span_gamma * atom.gamma * (2.0 * k / static_cast<double>(a.points - 1) - 1.0);
      // Long flat-top probe: read the transmitted intensity mid-pulse.
      const auto in = od::flat_top_pulse(4096, 2e-9, 1e-6, 6e-6, 100e-9, delta);
      const auto prop = od::propagate(in, a.od, atom);
      const std::size_t mid = 2048;
      const double t = std::norm(prop.envelope[mid]) / std::norm(in.envelope[mid]);
      pts.push_back({delta, t * (1.0 + a.noise * gauss(rng)), 0.0});
    }
    od::save_scan(a.out, pts);
    m.outputs.push_back(a.out);
    write_manifest(manifest_beside(a.out), m);
    fmt::print(out, "wrote {} scan points to {}\n", pts.size(), a.out);
    return kOk;
  }
  if (a.scan.empty())
    throw DomainError("scan-od needs --scan FILE or --simulate");
  const auto pts = od::load_scan(a.scan);
  print_od(out, od::od_lorentzian_scan(pts, atom));
  const auto profile = od::od_lorentzian_profile(pts, atom);
  fmt::print(out, "lorentzian_profile.od: {} +- {}\n", io::exact(profile.od.value),
             io::exact(profile.od.error));
  return kOk;
}

struct PulseArgs {
  std::string input, output;
  bool simulate = false;
  double od = 4.29;
  double noise = 0.0;
  std::uint64_t seed = 1;
  double fwhm_ns = 50.0;
  double dt_ns = 0.5;
  int samples = 2048;
  double linewidth_mhz = 5.2;
  std::string out_dir;
};

int cmd_od_pulse(const PulseArgs &a, const std::string &command, std::ostream &out) {
  const auto atom = atom_from_linewidth(a.linewidth_mhz);
  Manifest m;
  m.command = command;
  if (a.simulate) {
    if (a.out_dir.empty())
      throw DomainError("--simulate needs --out-dir");
    if (a.samples < static_cast<int>(od::ProbePulse::kMinSamples))
      throw DomainError(fmt::format("--samples must be >= {}", od::ProbePulse::kMinSamples));
    const double dt = a.dt_ns * 1e-9;
    const auto in = od::gaussian_pulse(static_cast<std::size_t>(a.samples), dt,
                                       a.samples * dt / 4.0, a.fwhm_ns * 1e-9);
    auto prop = od::propagate(in, a.od, atom);
    double peak = 0.0;
    for (const auto &v : prop.envelope)
      peak = std::max(peak, std::abs(v));
    auto rng = substream(a.seed, 0);
    std::normal_distribution<double> gauss;
    for (auto &v : prop.envelope)
      v = std::abs(v) + a.noise * peak * gauss(rng);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    od::save_trace(dir / "input.csv", in);
    od::save_trace(dir / "output.csv", prop);
    m.outputs = {dir / "input.csv", dir / "output.csv"};
    write_manifest(dir / "manifest.json", m);
    fmt::print(out, "wrote input.csv and output.csv to {}\n", a.out_dir);
    return kOk;
  }
  if (a.input.empty() || a.output.empty())
    throw DomainError("od-pulse needs --input and --output, or --simulate");
  const auto in = od::load_trace(a.input);
  const auto outp = od::load_trace(a.output);
  print_od(out, od::od_pulse_shape(in, outp, atom));
  return kOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::vector<std::string> artifacts;
  std::string out_dir;
};

int cmd_report(const ReportArgs &a, const std::string &command, std::ostream &out) {
  if (a.artifacts.empty())
    throw DataError("report needs at least one artifact");
  Manifest m;
  m.command = command;
  std::vector<io::Table> tables;
  for (const auto &p : a.artifacts) {
    tables.push_back(io::load_table(p));
    m.inputs.push_back(p);
  }
  const auto files = report::build_report(tables);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  for (const auto &[name, text] : files) {
    write_text(dir / name, text);
    m.outputs.push_back(dir / name);
    fmt::print(out, "wrote {}\n", (dir / name).string());
  }
  write_manifest(dir / "manifest.json", m);
  return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Simulation and inference toolkit for collectively enhanced single-photon "
               "retrieval from atomic ensembles",
               "dlcz"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SimulateArgs sim_a;
  auto *sim_cmd = app.add_subcommand("simulate", "Generate detection events from a config");
  sim_cmd->add_option("--config", sim_a.config, "Config file")->required();
  sim_cmd->add_option("--out-dir", sim_a.out_dir, "Output directory")->required();
  sim_cmd->add_option("--seed", sim_a.seed, "Override the config seed");
  sim_cmd->add_option("--trials", sim_a.trials, "Override the config trial count");
  sim_cmd->add_option("--workers", sim_a.workers, "Worker threads")->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--binary", sim_a.binary, "Write binary event files");

  AnalyzeArgs an_a;
  auto *an_cmd = app.add_subcommand("analyze", "Coincidence statistics of event files");
  an_cmd->add_option("events", an_a.events, "Event files")->required();
  an_cmd->add_option("--format", an_a.format, "text or csv");
  an_cmd->add_option("--out", an_a.out, "Write the report here instead of stdout");
  an_cmd->add_option("--table", an_a.table, "Also write an analysis table");

  WavepacketArgs wp_a;
  auto *wp_cmd = app.add_subcommand("wavepacket", "Histogram the conditional wavepacket");
  wp_cmd->add_option("events", wp_a.events, "Event file")->required();
  wp_cmd->add_option("--bin-ns", wp_a.bin_ns, "Bin width in ns");
  wp_cmd->add_option("--out", wp_a.out, "Output wavepacket file")->required();

  FitArgs fit_a;
  auto *fit_cmd = app.add_subcommand("fit", "Fit wavepackets for chi and alpha");
  fit_cmd->add_option("wavepackets", fit_a.wavepackets, "Wavepacket files")->required();
  fit_cmd->add_option("--fit-mode", fit_a.mode, "global or per-curve");
  fit_cmd->add_option("--out-dir", fit_a.out_dir, "Output directory")->required();
  fit_cmd->add_option("--low-power-mw", fit_a.low_power_mw,
                      "Curves below this read power get --low-power-weight");
  fit_cmd->add_option("--low-power-weight", fit_a.low_power_weight, "Weight in [0, 1]");
  fit_cmd->add_option("--window-mass", fit_a.window_mass, "Fit-window wavepacket mass");
  fit_cmd->add_option("--max-iterations", fit_a.max_iterations, "Iteration limit per start")
      ->check(CLI::PositiveNumber);

  ScanArgs scan_a;
  auto *scan_cmd = app.add_subcommand("scan-od", "Lorentzian detuning-scan OD measurement");
  scan_cmd->add_option("--scan", scan_a.scan, "Scan file to fit");
  scan_cmd->add_flag("--simulate", scan_a.simulate, "Simulate a scan instead");
  scan_cmd->add_option("--od", scan_a.od, "True OD for --simulate");
  scan_cmd->add_option("--noise", scan_a.noise, "Relative transmission noise");
  scan_cmd->add_option("--seed", scan_a.seed, "Noise seed");
  scan_cmd->add_option("--points", scan_a.points, "Number of detunings");
  scan_cmd->add_option("--span-gamma", scan_a.span_gamma, "Scan half-width in units of Gamma");
  scan_cmd->add_option("--linewidth-mhz", scan_a.linewidth_mhz, "Natural linewidth, MHz");
  scan_cmd->add_option("--out", scan_a.out, "Output scan file for --simulate");

  PulseArgs pulse_a;
  auto *pulse_cmd = app.add_subcommand("od-pulse", "Pulse-shape OD measurement");
  pulse_cmd->add_option("--input", pulse_a.input, "Input trace");
  pulse_cmd->add_option("--output", pulse_a.output, "Transmitted trace");
  pulse_cmd->add_flag("--simulate", pulse_a.simulate, "Simulate traces instead");
  pulse_cmd->add_option("--od", pulse_a.od, "True OD for --simulate");
  pulse_cmd->add_option("--noise", pulse_a.noise, "Amplitude noise, fraction of output peak");
  pulse_cmd->add_option("--seed", pulse_a.seed, "Noise seed");
  pulse_cmd->add_option("--fwhm-ns", pulse_a.fwhm_ns, "Probe intensity FWHM, ns");
  pulse_cmd->add_option("--dt-ns", pulse_a.dt_ns, "Sample period, ns");
  pulse_cmd->add_option("--samples", pulse_a.samples, "Samples per trace");
  pulse_cmd->add_option("--linewidth-mhz", pulse_a.linewidth_mhz, "Natural linewidth, MHz");
  pulse_cmd->add_option("--out-dir", pulse_a.out_dir, "Output directory for --simulate");

  ReportArgs rep_a;
  auto *rep_cmd = app.add_subcommand("report", "Render SVG figures from artifacts");
  rep_cmd->add_option("artifacts", rep_a.artifacts, "Analysis, wavepacket and fit tables");
  rep_cmd->add_option("--out-dir", rep_a.out_dir, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::string command = joined(args);
  try {
    if (*sim_cmd)
      return cmd_simulate(sim_a, command, out);
    if (*an_cmd)
      return cmd_analyze(an_a, command, out);
    if (*wp_cmd)
      return cmd_wavepacket(wp_a, command, out);
    if (*fit_cmd)
      return cmd_fit(fit_a, command, out);
    if (*scan_cmd)
      return cmd_scan_od(scan_a, command, out);
    if (*pulse_cmd)
      return cmd_od_pulse(pulse_a, command, out);
    if (*rep_cmd)
      return cmd_report(rep_a, command, out);
  } catch (const ConvergenceError &e) {
    std::string best;
    for (double v : e.best_point())
      best += (best.empty() ? "" : ", ") + io::exact(v);
    fmt::print(err, "error: {} (best point: [{}], objective {})\n", e.what(), best,
               io::exact(e.best_objective()));
    return kNoConvergence;
  } catch (const ConfigError &e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kUsage;
  } catch (const DomainError &e) {
    fmt::print(err, "error: {}\n", e.what());
    return kUsage;
  } catch (const DataError &e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kData;
  } catch (const fs::filesystem_error &e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kData;
  }
  return kUsage;
}

int run_cli(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace dlcz::cli
