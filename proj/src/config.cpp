#include "dlcz/config.hpp"

#include "dlcz/errors.hpp"
#include "dlcz/event_io.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace dlcz::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(fmt::format("bad number '{}'", s));
  return v;
}

std::uint64_t to_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(fmt::format("bad non-negative integer '{}'", s));
  return v;
}

const std::map<std::string_view, double> &unit_table(Dimension dim) {
  static const std::map<std::string_view, double> none;
  static const std::map<std::string_view, double> time{
      {"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}};
  static const std::map<std::string_view, double> length{
      {"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}};
  static const std::map<std::string_view, double> power{
      {"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}};
  static const std::map<std::string_view, double> rate{
      {"rad/s", 1.0},
      {"Hz", physics::kTwoPi},
      {"kHz", physics::kTwoPi * 1e3},
      {"MHz", physics::kTwoPi * 1e6}};
  static const std::map<std::string_view, double> intensity{
      {"W/m2", 1.0}, {"mW/cm2", 10.0}};
  static const std::map<std::string_view, double> alpha{
      {"mW^-1/2", 1.0}, {"W^-1/2", 1.0 / std::sqrt(1000.0)}};
  switch (dim) {
  case Dimension::none: return none;
  case Dimension::time: return time;
  case Dimension::length: return length;
  case Dimension::power: return power;
  case Dimension::angular_rate: return rate;
  case Dimension::intensity: return intensity;
  case Dimension::alpha: return alpha;
  }
  return none;
}

// Splits "1.5 mW" into number and unit parts.
std::pair<std::string_view, std::string_view> split_unit(std::string_view s) {
  s = trim(s);
  const auto sp = s.find_first_of(" \t");
  if (sp == std::string_view::npos)
    return {s, {}};
  return {s.substr(0, sp), trim(s.substr(sp))};
}

double apply_unit(double v, std::string_view unit, Dimension dim) {
  if (dim == Dimension::none) {
    if (!unit.empty())
      throw ConfigError(fmt::format("unexpected unit '{}' on a dimensionless value", unit));
    return v;
  }
  if (unit.empty())
    throw ConfigError("missing unit");
  const auto &table = unit_table(dim);
  const auto it = table.find(unit);
  if (it == table.end())
    throw ConfigError(fmt::format("unknown unit '{}'", unit));
  // Exact pass-through for the canonical units keeps emit/parse lossless.
  return it->second == 1.0 ? v : v * it->second;
}

std::vector<double> parse_list(std::string_view text, Dimension dim) {
  std::vector<std::string_view> items;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    items.push_back(trim(text.substr(start, comma == std::string_view::npos
                                                  ? std::string_view::npos
                                                  : comma - start)));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  const auto [last_num, unit] = split_unit(items.back());
  items.back() = last_num;
  std::vector<double> out;
  for (auto item : items) {
    if (item.empty())
      throw ConfigError("empty entry in list");
    out.push_back(apply_unit(to_double(item), unit, dim));
  }
  return out;
}

template <typename E>
E parse_enum(std::string_view v, std::initializer_list<std::pair<std::string_view, E>> opts) {
  for (const auto &[name, e] : opts)
    if (v == name)
      return e;
  std::string names;
  for (const auto &[name, e] : opts)
    names += (names.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(fmt::format("'{}' is not one of {}", v, names));
}

using Setter = std::function<void(sim::ExperimentConfig &, std::string_view)>;

template <typename F> Setter number_setter(Dimension dim, F assign) {
  return [dim, assign](sim::ExperimentConfig &c, std::string_view v) {
    assign(c, parse_quantity(v, dim));
  };
}

const std::map<std::string, Setter> &setters() {
  using C = sim::ExperimentConfig;
  using D = Dimension;
  static const std::map<std::string, Setter> table{
      {"schema_version",
       [](C &c, std::string_view v) { c.schema_version = static_cast<int>(to_u64(v)); }},
      {"seed", [](C &c, std::string_view v) { c.seed = to_u64(v); }},
      {"atom.linewidth", number_setter(D::angular_rate, [](C &c, double x) { c.atom.gamma = x; })},
      {"atom.wavelength", number_setter(D::length, [](C &c, double x) { c.atom.wavelength = x; })},
      {"atom.i_sat", number_setter(D::intensity, [](C &c, double x) { c.atom.i_sat = x; })},
      {"ensemble.od", number_setter(D::none, [](C &c, double x) { c.ensemble.od = x; })},
      {"ensemble.waist", number_setter(D::length, [](C &c, double x) { c.ensemble.waist = x; })},
      {"ensemble.n_atoms",
       [](C &c, std::string_view v) {
         if (v == "none")
           c.ensemble.n_atoms.reset();
         else
           c.ensemble.n_atoms = parse_quantity(v, D::none);
       }},
      {"readout.power", number_setter(D::power, [](C &c, double x) { c.readout.power = x; })},
      {"readout.alpha", number_setter(D::alpha, [](C &c, double x) { c.readout.alpha = x; })},
      {"readout.chi",
       [](C &c, std::string_view v) {
         if (v == "auto") {
           c.chi_from_od = true;
           c.readout.chi = 1.0;
         } else {
           c.chi_from_od = false;
           c.readout.chi = parse_quantity(v, D::none);
         }
       }},
      {"readout.bin_width", number_setter(D::time, [](C &c, double x) { c.readout.dt = x; })},
      {"model.mean_excitation",
       number_setter(D::none, [](C &c, double x) { c.model.mean_excitation = x; })},
      {"model.field1_cond_efficiency",
       number_setter(D::none, [](C &c, double x) { c.model.field1_cond_efficiency = x; })},
      {"model.field1_noise",
       number_setter(D::none, [](C &c, double x) { c.model.field1_noise = x; })},
      {"model.retrieval_efficiency",
       number_setter(D::none, [](C &c, double x) { c.model.retrieval_efficiency = x; })},
      {"model.chain_efficiency",
       number_setter(D::none, [](C &c, double x) { c.model.chain_efficiency = x; })},
      {"model.field2_background",
       number_setter(D::none, [](C &c, double x) { c.model.field2_background_rate = x; })},
      {"model.coherence_time",
       number_setter(D::time, [](C &c, double x) { c.model.coherence_time = x; })},
      {"model.write_read_delay",
       number_setter(D::time, [](C &c, double x) { c.model.write_read_delay = x; })},
      {"model.retrieval_od_scale",
       number_setter(D::none, [](C &c, double x) { c.model.retrieval_od_scale = x; })},
      {"model.photon_statistics",
       [](C &c, std::string_view v) {
         c.model.photon_statistics = parse_enum<sim::PhotonStatistics>(
             v, {{"thermal", sim::PhotonStatistics::thermal},
                 {"poisson", sim::PhotonStatistics::poisson}});
       }},
      {"model.decoherence_law",
       [](C &c, std::string_view v) {
         c.model.decoherence_law = parse_enum<sim::DecoherenceLaw>(
             v, {{"exponential", sim::DecoherenceLaw::exponential},
                 {"gaussian", sim::DecoherenceLaw::gaussian}});
       }},
      {"model.retrieval_law",
       [](C &c, std::string_view v) {
         c.model.retrieval_law = parse_enum<sim::RetrievalLaw>(
             v, {{"constant", sim::RetrievalLaw::constant},
                 {"saturating", sim::RetrievalLaw::saturating}});
       }},
      {"timing.trial_period",
       number_setter(D::time, [](C &c, double x) { c.timing.trial_period = x; })},
      {"timing.write_duration",
       number_setter(D::time, [](C &c, double x) { c.timing.write_duration = x; })},
      {"timing.read_duration",
       number_setter(D::time, [](C &c, double x) {
         c.timing.read_duration = x;
         c.readout.read_duration = x;
       })},
      {"timing.apd_window",
       number_setter(D::time, [](C &c, double x) { c.timing.apd_window = x; })},
      {"timing.n_trials", [](C &c, std::string_view v) { c.timing.n_trials = to_u64(v); }},
  };
  return table;
}

const std::map<std::string, Dimension> &sweep_keys() {
  static const std::map<std::string, Dimension> keys{
      {"od", Dimension::none},
      {"power", Dimension::power},
      {"delay", Dimension::time},
      {"mean_excitation", Dimension::none}};
  return keys;
}

} // namespace

double parse_quantity(std::string_view text, Dimension dim) {
  const auto [num, unit] = split_unit(text);
  if (num.empty())
    throw ConfigError("missing value");
  return apply_unit(to_double(num), unit, dim);
}

sim::ExperimentConfig parse_config(std::string_view text) {
  sim::ExperimentConfig c;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                          : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    try {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      const auto value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError("expected 'key = value'");
      if (!seen.insert(key).second)
        throw ConfigError(fmt::format("duplicate key '{}'", key));
      if (key.rfind("sweep.", 0) == 0) {
        const std::string name = key.substr(6);
        const auto it = sweep_keys().find(name);
        if (it == sweep_keys().end())
          throw ConfigError(fmt::format("unknown sweep key '{}'", name));
        if (c.sweep)
          throw ConfigError("only one sweep key is allowed");
        c.sweep = sim::SweepSpec{name, parse_list(value, it->second)};
        continue;
      }
      const auto it = setters().find(key);
      if (it == setters().end())
        throw ConfigError(fmt::format("unknown key '{}'", key));
      it->second(c, value);
    } catch (const ConfigError &e) {
      throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  c.readout.read_duration = c.timing.read_duration;
  return c;
}

sim::ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string emit_config(const sim::ExperimentConfig &c) {
  using io::exact;
  std::string out;
  auto line = [&out](std::string_view key, const std::string &value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  line("schema_version", std::to_string(c.schema_version));
  line("seed", std::to_string(c.seed));
  line("atom.linewidth", exact(c.atom.gamma) + " rad/s");
  line("atom.wavelength", exact(c.atom.wavelength) + " m");
  line("atom.i_sat", exact(c.atom.i_sat) + " W/m2");
  line("ensemble.od", exact(c.ensemble.od));
  line("ensemble.waist", exact(c.ensemble.waist) + " m");
  line("ensemble.n_atoms", c.ensemble.n_atoms ? exact(*c.ensemble.n_atoms) : "none");
  line("readout.power", exact(c.readout.power) + " W");
  line("readout.alpha", exact(c.readout.alpha) + " mW^-1/2");
  line("readout.chi", c.chi_from_od ? "auto" : exact(c.readout.chi));
  line("readout.bin_width", exact(c.readout.dt) + " s");
  const auto &m = c.model;
  line("model.mean_excitation", exact(m.mean_excitation));
  line("model.field1_cond_efficiency", exact(m.field1_cond_efficiency));
  line("model.field1_noise", exact(m.field1_noise));
  line("model.retrieval_efficiency", exact(m.retrieval_efficiency));
  line("model.chain_efficiency", exact(m.chain_efficiency));
  line("model.field2_background", exact(m.field2_background_rate));
  line("model.coherence_time", exact(m.coherence_time) + " s");
  line("model.write_read_delay", exact(m.write_read_delay) + " s");
  line("model.photon_statistics",
       m.photon_statistics == sim::PhotonStatistics::thermal ? "thermal" : "poisson");
  line("model.decoherence_law",
       m.decoherence_law == sim::DecoherenceLaw::exponential ? "exponential" : "gaussian");
  line("model.retrieval_law",
       m.retrieval_law == sim::RetrievalLaw::constant ? "constant" : "saturating");
  line("model.retrieval_od_scale", exact(m.retrieval_od_scale));
  line("timing.trial_period", exact(c.timing.trial_period) + " s");
  line("timing.write_duration", exact(c.timing.write_duration) + " s");
  line("timing.read_duration", exact(c.timing.read_duration) + " s");
  line("timing.apd_window", exact(c.timing.apd_window) + " s");
  line("timing.n_trials", std::to_string(c.timing.n_trials));
  if (c.sweep) {
    const auto it = sweep_keys().find(c.sweep->key);
    if (it == sweep_keys().end())
      throw ConfigError("unknown sweep key '" + c.sweep->key + "'");
    std::string list;
    for (double v : c.sweep->values)
      list += (list.empty() ? "" : ", ") + exact(v);
    static const std::map<Dimension, std::string> si{
        {Dimension::none, ""}, {Dimension::power, " W"}, {Dimension::time, " s"}};
    line("sweep." + c.sweep->key, list + si.at(it->second));
  }
  return out;
}

std::uint64_t config_hash(const sim::ExperimentConfig &config) {
  return io::fnv1a64(emit_config(config));
}

} // namespace dlcz::config
