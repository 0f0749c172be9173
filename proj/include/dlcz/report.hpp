#pragma once

#include "dlcz/event_io.hpp"
#include "dlcz/inference.hpp"
#include "dlcz/physics.hpp"

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlcz::report {

struct Series {
  enum class Style { points, line };
  std::string label;
  std::vector<double> x, y;
  std::vector<double> yerr; ///< empty for no error bars
  Style style = Style::points;
  std::string color = "#1f77b4";
};

struct Panel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
  std::vector<std::string> notes; ///< text lines drawn in the upper left
};

/// Static SVG with the panels laid out row-major on `columns` columns.
/// Output depends only on the inputs (fixed-precision coordinates).
std::string render_svg(std::span<const Panel> panels, std::size_t columns,
                       std::string_view title);

/// One analyzed event file.
struct AnalysisPoint {
  io::EventMetadata meta;
  stats::CoincidenceStats stats;
};

/// "analysis" table: one row per point with the run parameters (od,
/// power_w, delay_s, mean_excitation, n_trials) and every estimate with
/// its error.
io::Table analysis_table(std::span<const AnalysisPoint> points);

/// "fit" table: one row per fitted curve (global fits repeat the shared
/// parameters on every curve row).
io::Table fit_table(std::span<const fit::WavepacketFit> fits,
                    std::span<const fit::CurveData> curves,
                    const physics::AtomSpec &atom, fit::FitMode mode);

/// Output file name -> contents.
using FileSet = std::map<std::string, std::string>;

/// Builds figures and their data tables from analysis, wavepacket and fit
/// tables:
///   threshold.svg/.csv     P_c and P_2 vs OD, log-log Delta P_c with slope fit
///   regions.svg/.csv       P_c, P_2 and g2c vs P_1 (mean-excitation sweeps)
///   delay.svg/.csv         P_c and P_2 vs write-read delay
///   wavepackets.svg/.csv   normalized wavepackets with fitted theory
///   cooperativity.svg/.csv chi, alpha and tau_sp vs OD with chi = 1 + beta OD
/// Throws DataError when nothing can be drawn.
FileSet build_report(std::span<const io::Table> artifacts);

} // namespace dlcz::report
