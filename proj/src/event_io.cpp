#include "dlcz/event_io.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <bit>
#include <cmath>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dlcz::io {

namespace {

constexpr char kMagic[8] = {'D', 'L', 'C', 'Z', 'E', 'V', 'T', '1'};
constexpr std::string_view kCsvTag = "# dlcz-events v1";
constexpr std::string_view kCsvHeader = "trial,channel,time_ns";

static_assert(std::endian::native == std::endian::little,
              "binary event I/O assumes a little-endian host");

template <typename T> void put(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T> T get(std::istream &is) {
  T v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw DataError("truncated binary event file");
  return v;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto *end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end)
    throw DataError(fmt::format("line {}: bad number '{}'", line, s));
  return v;
}

std::uint64_t parse_u64(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  const auto *end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end)
    throw DataError(fmt::format("line {}: bad integer '{}'", line, s));
  return v;
}

} // namespace

std::string exact(double v) { return fmt::format("{:.17g}", v); }

EventMetadata EventMetadata::from_config(const sim::ExperimentConfig &raw,
                                         std::uint64_t config_hash) {
  const auto config = raw.resolved();
  EventMetadata m;
  auto &v = m.values;
  v["config_hash"] = fmt::format("{:016x}", config_hash);
  v["n_trials"] = std::to_string(config.timing.n_trials);
  v["read_duration_s"] = exact(config.timing.read_duration);
  v["write_duration_s"] = exact(config.timing.write_duration);
  v["trial_period_s"] = exact(config.timing.trial_period);
  v["read_power_w"] = exact(config.readout.power);
  v["alpha_mw"] = exact(config.readout.alpha);
  v["chi"] = exact(config.readout.chi);
  v["od"] = exact(config.ensemble.od);
  v["write_read_delay_s"] = exact(config.model.write_read_delay);
  v["mean_excitation"] = exact(config.model.mean_excitation);
  v["seed"] = std::to_string(config.seed);
  v["gamma_rad_s"] = exact(config.atom.gamma);
  v["wavelength_m"] = exact(config.atom.wavelength);
  v["i_sat_w_m2"] = exact(config.atom.i_sat);
  return m;
}

std::uint64_t EventMetadata::config_hash() const {
  const auto it = values.find("config_hash");
  if (it == values.end())
    return 0;
  std::uint64_t h = 0;
  const auto &s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), h, 16);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("bad config_hash in event metadata");
  return h;
}

std::uint64_t EventMetadata::n_trials() const {
  const auto it = values.find("n_trials");
  if (it == values.end())
    throw DataError("event metadata lacks n_trials");
  return parse_u64(it->second, 1);
}

double EventMetadata::number(const std::string &key) const {
  const auto it = values.find(key);
  if (it == values.end())
    throw DataError("event metadata lacks " + key);
  return parse_double(it->second, 1);
}

physics::AtomSpec EventMetadata::atom() const {
  physics::AtomSpec a;
  if (has("gamma_rad_s"))
    a.gamma = number("gamma_rad_s");
  if (has("wavelength_m"))
    a.wavelength = number("wavelength_m");
  if (has("i_sat_w_m2"))
    a.i_sat = number("i_sat_w_m2");
  return a;
}

sim::TrialTiming EventMetadata::timing() const {
  sim::TrialTiming t;
  t.n_trials = n_trials();
  t.read_duration = number("read_duration_s");
  if (has("write_duration_s"))
    t.write_duration = number("write_duration_s");
  if (has("trial_period_s"))
    t.trial_period = number("trial_period_s");
  return t;
}

std::string EventMetadata::serialize() const {
  std::string out;
  for (const auto &[k, v] : values) {
    if (!out.empty())
      out += ' ';
    out += k + '=' + v;
  }
  return out;
}

EventMetadata EventMetadata::parse(const std::string &text) {
  EventMetadata m;
  std::istringstream ss(text);
  std::string token;
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
      throw DataError("bad metadata token '" + token + "'");
    m.values[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return m;
}

void write_events_csv(std::ostream &os, const EventFile &file) {
  fmt::print(os, "{} {}\n{}\n", kCsvTag, file.meta.serialize(), kCsvHeader);
  std::string buf;
  for (const auto &e : file.events) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{},{}\n", e.trial,
                   sim::channel_name(e.channel), exact(e.time_ns));
    os << buf;
  }
}

EventFile read_events_csv(std::istream &is) {
  EventFile file;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(is, line))
    throw DataError("line 1: empty event file");
  ++lineno;
  if (line.rfind(kCsvTag, 0) != 0)
    throw DataError("line 1: missing '# dlcz-events v1' tag");
  file.meta = EventMetadata::parse(line.substr(kCsvTag.size()));

  if (!std::getline(is, line) || line != kCsvHeader)
    throw DataError("line 2: expected header 'trial,channel,time_ns'");
  ++lineno;

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw DataError(fmt::format("line {}: expected 3 columns", lineno));
    const std::string_view view(line);
    sim::DetectionEvent e;
    e.trial = parse_u64(view.substr(0, c1), lineno);
    const auto ch = sim::parse_channel(view.substr(c1 + 1, c2 - c1 - 1));
    if (!ch)
      throw DataError(fmt::format("line {}: unknown channel '{}'", lineno,
                                  view.substr(c1 + 1, c2 - c1 - 1)));
    e.channel = *ch;
    e.time_ns = parse_double(view.substr(c2 + 1), lineno);
    if (!(e.time_ns >= 0.0))
      throw DataError(fmt::format("line {}: negative time", lineno));
    file.events.push_back(e);
  }
  return file;
}

void write_events_binary(std::ostream &os, const EventFile &file) {
  os.write(kMagic, sizeof(kMagic));
  const std::string meta = file.meta.serialize();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(os, file.events.size());
  for (const auto &e : file.events) {
    put<std::uint64_t>(os, e.trial);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(e.channel));
    put<double>(os, e.time_ns);
  }
}

EventFile read_events_binary(std::istream &is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a binary event file (bad magic)");
  EventFile file;
  const auto meta_len = get<std::uint32_t>(is);
  std::string meta(meta_len, '\0');
  if (!is.read(meta.data(), meta_len))
    throw DataError("truncated binary event metadata");
  file.meta = EventMetadata::parse(meta);
  const auto n = get<std::uint64_t>(is);
  file.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) {
    sim::DetectionEvent e;
    e.trial = get<std::uint64_t>(is);
    const auto code = get<std::uint8_t>(is);
    if (code > 3)
      throw DataError(fmt::format("event {}: bad channel code {}", i, code));
    e.channel = static_cast<sim::Channel>(code);
    e.time_ns = get<double>(is);
    file.events.push_back(e);
  }
  return file;
}

void save_events(const std::filesystem::path &path, const EventFile &file) {
  const bool binary = path.extension() == ".bin";
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os)
    throw DataError("cannot write " + path.string());
  if (binary)
    write_events_binary(os, file);
  else
    write_events_csv(os, file);
  if (!os)
    throw DataError("write failed for " + path.string());
}

EventFile load_events(const std::filesystem::path &path) {
  const bool binary = path.extension() == ".bin";
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is)
    throw DataError("cannot open " + path.string());
  return binary ? read_events_binary(is) : read_events_csv(is);
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name)
      return i;
  throw DataError(fmt::format("{} table lacks column '{}'", kind, name));
}

std::vector<double> Table::values(std::string_view name) const {
  const auto c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto &r : rows)
    out.push_back(r[c]);
  return out;
}

void write_table(std::ostream &os, const Table &table) {
  fmt::print(os, "# dlcz-{} v1 {}\n", table.kind, table.meta.serialize());
  std::string header;
  for (const auto &c : table.columns)
    header += (header.empty() ? "" : ",") + c;
  os << header << '\n';
  for (const auto &row : table.rows) {
    std::string line;
    for (double v : row)
      line += (line.empty() ? "" : ",") + exact(v);
    os << line << '\n';
  }
}

Table read_table(std::istream &is) {
  Table t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# dlcz-", 0) != 0)
    throw DataError("line 1: missing '# dlcz-<kind> v1' tag");
  {
    std::istringstream ss(line.substr(7));
    std::string tag, version;
    ss >> tag >> version;
    if (tag.empty() || version != "v1")
      throw DataError("line 1: bad table tag");
    t.kind = tag;
    std::string rest;
    std::getline(ss, rest);
    t.meta = EventMetadata::parse(rest);
  }
  if (!std::getline(is, line) || line.empty())
    throw DataError("line 2: missing column header");
  {
    std::istringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ','))
      t.columns.push_back(col);
  }
  std::size_t lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string_view cell =
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start);
      row.push_back(parse_double(cell, lineno));
      if (comma == std::string::npos)
        break;
      start = comma + 1;
    }
    if (row.size() != t.columns.size())
      throw DataError(fmt::format("line {}: expected {} columns, found {}", lineno,
                                  t.columns.size(), row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void save_table(const std::filesystem::path &path, const Table &table) {
  std::ofstream os(path);
  if (!os)
    throw DataError("cannot write " + path.string());
  write_table(os, table);
  if (!os)
    throw DataError("write failed for " + path.string());
}

Table load_table(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw DataError("cannot open " + path.string());
  try {
    return read_table(is);
  } catch (const DataError &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Table wavepacket_table(const stats::Wavepacket &wp, const EventMetadata &extra) {
  Table t;
  t.kind = "wavepacket";
  t.meta = extra;
  auto &m = t.meta.values;
  m["bin_width_s"] = exact(wp.bin_width);
  m["read_duration_s"] = exact(wp.read_duration);
  m["n_trials"] = std::to_string(wp.n_trials);
  m["n_heralds"] = std::to_string(wp.n_heralds);
  m["n_coincident"] = std::to_string(wp.n_coincident);
  m["normalization"] = exact(wp.normalization);
  m["p2_total"] = exact(wp.p2_total);
  t.columns = {"t_ns", "t_start_ns", "heralded", "total", "pc", "pc_err",
               "p2", "p2_err", "g12", "g12_err"};
  for (std::size_t i = 0; i < wp.bins.size(); ++i) {
    const auto &b = wp.bins[i];
    t.rows.push_back({wp.bin_center(i) * 1e9, b.t_start * 1e9,
                      static_cast<double>(b.heralded), static_cast<double>(b.total),
                      b.pc.value, b.pc.error, b.p2.value, b.p2.error, b.g12.value,
                      b.g12.error});
  }
  return t;
}

stats::Wavepacket wavepacket_from_table(const Table &t) {
  if (t.kind != "wavepacket")
    throw DataError("expected a wavepacket table, found '" + t.kind + "'");
  stats::Wavepacket wp;
  wp.bin_width = t.meta.number("bin_width_s");
  wp.read_duration = t.meta.number("read_duration_s");
  wp.n_trials = t.meta.n_trials();
  wp.n_heralds = static_cast<std::uint64_t>(t.meta.number("n_heralds"));
  wp.n_coincident = static_cast<std::uint64_t>(t.meta.number("n_coincident"));
  wp.normalization = t.meta.number("normalization");
  wp.p2_total = t.meta.number("p2_total");
  const auto ts = t.column("t_start_ns"), h = t.column("heralded"), n = t.column("total"),
             pc = t.column("pc"), pce = t.column("pc_err"), p2 = t.column("p2"),
             p2e = t.column("p2_err"), g = t.column("g12"), ge = t.column("g12_err");
  for (const auto &r : t.rows) {
    if (!(r[h] >= 0.0) || !(r[n] >= 0.0))
      throw DataError("wavepacket table has negative counts");
    stats::WavepacketBin b;
    b.t_start = r[ts] * 1e-9;
    b.heralded = static_cast<std::uint64_t>(r[h]);
    b.total = static_cast<std::uint64_t>(r[n]);
    b.pc = {r[pc], r[pce], std::isfinite(r[pc])};
    b.p2 = {r[p2], r[p2e], std::isfinite(r[p2])};
    b.g12 = std::isfinite(r[g]) ? Estimate{r[g], r[ge]} : Estimate::undefined();
    wp.bins.push_back(b);
  }
  return wp;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_digest(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return fnv1a64(ss.str());
}

} // namespace dlcz::io
