#pragma once

#include "dlcz/source_sim.hpp"
#include "dlcz/statistics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dlcz::io {

/// Run metadata carried in every event file so downstream stages need no
/// config. Keys are free-form; the accessors cover the ones the pipeline
/// relies on.
struct EventMetadata {
  std::map<std::string, std::string> values;

  static EventMetadata from_config(const sim::ExperimentConfig &config,
                                   std::uint64_t config_hash);

  std::uint64_t config_hash() const;
  std::uint64_t n_trials() const;
  sim::TrialTiming timing() const;
  /// Atom constants when recorded, cesium D2 otherwise.
  physics::AtomSpec atom() const;
  double number(const std::string &key) const; ///< throws DataError if absent
  bool has(const std::string &key) const { return values.count(key) != 0; }

  /// "key=value key=value ..." in key order.
  std::string serialize() const;
  static EventMetadata parse(const std::string &text);
};

struct EventFile {
  EventMetadata meta;
  std::vector<sim::DetectionEvent> events;
};

/// Text format:
///   # dlcz-events v1 key=value ...
///   trial,channel,time_ns
///   0,1a,12.25
void write_events_csv(std::ostream &os, const EventFile &file);
EventFile read_events_csv(std::istream &is);

/// Binary format (little-endian): "DLCZEVT1", u32 metadata length,
/// metadata text, u64 event count, then per event u64 trial, u8 channel code,
/// f64 time_ns.
void write_events_binary(std::ostream &os, const EventFile &file);
EventFile read_events_binary(std::istream &is);

/// Dispatches on the ".bin" extension.
void save_events(const std::filesystem::path &path, const EventFile &file);
EventFile load_events(const std::filesystem::path &path);

/// Tagged numeric table shared by the analysis, wavepacket and fit artifacts:
///   # dlcz-<kind> v1 key=value ...
///   col_a,col_b,...
///   1.5,2,...
struct Table {
  std::string kind;
  EventMetadata meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Column index; throws DataError if absent.
  std::size_t column(std::string_view name) const;
  std::vector<double> values(std::string_view name) const;
};

void write_table(std::ostream &os, const Table &table);
Table read_table(std::istream &is);
void save_table(const std::filesystem::path &path, const Table &table);
Table load_table(const std::filesystem::path &path);

/// Wavepacket artifact. `meta` extras (power, od, hashes) are merged in.
Table wavepacket_table(const stats::Wavepacket &wp, const EventMetadata &extra);
stats::Wavepacket wavepacket_from_table(const Table &table);

/// FNV-1a 64-bit digest of bytes or file contents.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t file_digest(const std::filesystem::path &path);

/// Round-trippable formatting of a double ("%.17g").
std::string exact(double v);

} // namespace dlcz::io
