#pragma once

#include "dlcz/estimate.hpp"
#include "dlcz/source_sim.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace dlcz::stats {

/// Half-open range of trial indices [begin, end).
struct TrialRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
  friend bool operator==(const TrialRange &, const TrialRange &) = default;
};

/// Per-trial coincidence counts. Every "detection in field i" counts a trial
/// once, however many clicks it holds.
struct CoincidenceCounts {
  std::uint64_t n_trials = 0;
  std::uint64_t n1 = 0;   ///< >= 1 click on 1a or 1b
  std::uint64_t n2 = 0;   ///< >= 1 click on 2a or 2b
  std::uint64_t n2a = 0;
  std::uint64_t n2b = 0;
  std::uint64_t n12 = 0;  ///< field 1 and field 2
  std::uint64_t n12a = 0; ///< field 1 and detector 2a
  std::uint64_t n12b = 0; ///< field 1 and detector 2b
  std::uint64_t n122 = 0; ///< field 1 and both 2a and 2b

  CoincidenceCounts &operator+=(const CoincidenceCounts &o);
  friend bool operator==(const CoincidenceCounts &, const CoincidenceCounts &) = default;
};

/// Counts over a set of disjoint trial ranges plus the derived
/// probabilities and correlation witnesses.
///
/// g2c uses the beamsplitter normalization P_cc / (P_c,2a * P_c,2b), which
/// reduces to P_cc / P_c^2 for a single detector pair split evenly into
/// channels and equals 1 for coherent light.
class CoincidenceStats {
public:
  CoincidenceStats() = default;
  CoincidenceStats(CoincidenceCounts counts, std::vector<TrialRange> ranges,
                   std::uint64_t config_hash);

  const CoincidenceCounts &counts() const { return counts_; }
  const std::vector<TrialRange> &ranges() const { return ranges_; }
  std::uint64_t config_hash() const { return config_hash_; }
  std::uint64_t n_trials() const { return counts_.n_trials; }

  Estimate p1() const;
  Estimate p2() const;
  Estimate p12() const;
  Estimate p122() const;
  Estimate pc() const;   ///< P12 / P1
  Estimate pca() const;  ///< P(2a | field 1)
  Estimate pcb() const;  ///< P(2b | field 1)
  Estimate pcc() const;  ///< P122 / P1
  Estimate g2c() const;
  Estimate g12() const;  ///< Pc / P2

  friend bool operator==(const CoincidenceStats &, const CoincidenceStats &) = default;

private:
  CoincidenceCounts counts_;
  std::vector<TrialRange> ranges_;
  std::uint64_t config_hash_ = 0;
};

/// Single pass over an event stream sorted by trial. Trials outside
/// `range` or a decreasing trial index raise DataError.
CoincidenceStats accumulate(std::span<const sim::DetectionEvent> events,
                            TrialRange range, std::uint64_t config_hash = 0);
CoincidenceStats accumulate(std::span<const sim::DetectionEvent> events,
                            const sim::TrialTiming &timing,
                            std::uint64_t config_hash = 0);

/// Exact combination of statistics over disjoint trial ranges.
/// Throws DataError on overlapping ranges or differing config hashes.
CoincidenceStats merge(const CoincidenceStats &a, const CoincidenceStats &b);

/// Wilson score half-width (z = 1) for k successes in n trials.
double wilson_half_width(std::uint64_t k, std::uint64_t n);

struct WavepacketBin {
  double t_start = 0.0;      ///< s
  std::uint64_t heralded = 0; ///< trials with field 1 whose first field-2 click falls here
  std::uint64_t total = 0;    ///< trials whose first field-2 click falls here
  Estimate pc;  ///< heralded / n1
  Estimate p2;  ///< total / n_trials
  Estimate g12; ///< pc / p2; undefined when total == 0
};

/// Time-binned conditional and unconditional field-2 wavepackets.
/// Each trial contributes its earliest field-2 click, so the bins sum to
/// P_c and P_2 exactly.
struct Wavepacket {
  double bin_width = 1e-9;
  double read_duration = 0.0;
  std::uint64_t n_trials = 0;
  std::uint64_t n_heralds = 0;    ///< n1
  std::uint64_t n_coincident = 0; ///< n12
  double normalization = 0.0;     ///< P_c
  double p2_total = 0.0;          ///< P_2
  std::vector<WavepacketBin> bins;

  double bin_center(std::size_t i) const { return bins[i].t_start + 0.5 * bin_width; }
};

/// Throws DomainError for dt <= 0 or dt > read window, DataError for
/// field-2 times outside [0, read_duration] or unsorted input.
Wavepacket histogram_wavepacket(std::span<const sim::DetectionEvent> events,
                                const sim::TrialTiming &timing, double dt);

/// Key-value text report ("name: value +- error").
void write_stats_text(std::ostream &os, const CoincidenceStats &s);
/// One metric per line: name,estimate,std_error.
void write_stats_csv(std::ostream &os, const CoincidenceStats &s);

} // namespace dlcz::stats
