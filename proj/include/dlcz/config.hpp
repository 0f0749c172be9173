#pragma once

#include "dlcz/source_sim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dlcz::config {

/// Line-oriented `section.key = value [unit]` format; `#` starts a comment.
///
///   seed = 7
///   atom.linewidth = 5.2 MHz        # cyclic; stored as 2*pi*5.2e6 rad/s
///   ensemble.od = 3.4
///   readout.power = 0.3 mW
///   readout.alpha = 9 mW^-1/2
///   readout.chi = auto              # 1 + beta*OD, or a number
///   timing.read_duration = 840 ns
///   sweep.od = 4.8, 4.0, 3.4        # one trailing unit applies to the list
///
/// Physical quantities require a unit suffix; unknown keys, duplicates and
/// missing units raise ConfigError naming the line.
sim::ExperimentConfig parse_config(std::string_view text);
sim::ExperimentConfig load_config(const std::filesystem::path &path);

/// Canonical text: every key, SI units, 17 significant digits, so
/// parse_config(emit_config(c)) == c.
std::string emit_config(const sim::ExperimentConfig &config);

/// FNV-1a 64 of the canonical text.
std::uint64_t config_hash(const sim::ExperimentConfig &config);

enum class Dimension { none, time, length, power, angular_rate, intensity, alpha };

/// Parses "number unit" into SI (alpha into mW^-1/2). Throws ConfigError.
double parse_quantity(std::string_view text, Dimension dim);

} // namespace dlcz::config
