#pragma once

#include "dlcz/physics.hpp"
#include "dlcz/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlcz::sim {

enum class PhotonStatistics { thermal, poisson };
enum class DecoherenceLaw { exponential, gaussian };
enum class RetrievalLaw { constant, saturating };

/// Generative model of one DLCZ trial: stored-excitation number, heralding,
/// retrieval and detection efficiencies, uncorrelated noise and ground-state
/// decoherence.
struct SourceModel {
  double mean_excitation = 0.05;          ///< mean stored excitations per trial
  double field1_cond_efficiency = 0.2;    ///< P(field-1 click | excitation)
  double field1_noise = 1e-5;             ///< uncorrelated field-1 clicks / trial
  double retrieval_efficiency = 0.47;     ///< extraction into the field-2 mode
  double chain_efficiency = 0.19;         ///< ensemble output -> click
  double field2_background_rate = 1e-4;   ///< uncorrelated field-2 clicks / trial
  double coherence_time = 700e-9;         ///< s, 1/e time of the decoherence law
  double write_read_delay = 0.0;          ///< s
  PhotonStatistics photon_statistics = PhotonStatistics::thermal;
  DecoherenceLaw decoherence_law = DecoherenceLaw::exponential;
  /// `saturating` scales retrieval with OD as x^2 / sqrt(1 + x^4),
  /// x = od / retrieval_od_scale: quadratic onset, plateau at
  /// retrieval_efficiency.
  RetrievalLaw retrieval_law = RetrievalLaw::constant;
  double retrieval_od_scale = 2.5;

  void validate() const;

  /// exp(-d/tau) or exp(-(d/tau)^2).
  double decoherence_factor() const;
  double retrieval_at(double od) const;
  /// Probability that one stored excitation produces a field-2 click.
  double field2_efficiency(double od) const;

  friend bool operator==(const SourceModel &, const SourceModel &) = default;
};

struct TrialTiming {
  double trial_period = 1e-6;    ///< s
  double write_duration = 50e-9; ///< s
  double read_duration = 840e-9; ///< s
  double apd_window = 0.5e-3;    ///< s, APD gate per MOT cycle
  std::uint64_t n_trials = 1000000;

  /// Throws ConfigError unless write + delay + read fits in one period.
  void validate(const SourceModel &model) const;

  friend bool operator==(const TrialTiming &, const TrialTiming &) = default;
};

/// A swept configuration parameter: one output directory per value.
struct SweepSpec {
  std::string key;            ///< "od", "power", "delay", "mean_excitation"
  std::vector<double> values; ///< SI units

  friend bool operator==(const SweepSpec &, const SweepSpec &) = default;
};

/// Everything needed to reproduce one simulated run.
struct ExperimentConfig {
  int schema_version = 1;
  physics::AtomSpec atom;
  physics::EnsembleSpec ensemble;
  physics::ReadoutSpec readout; ///< read_duration mirrors timing.read_duration
  bool chi_from_od = true;      ///< derive readout.chi from ensemble.od
  SourceModel model;
  TrialTiming timing;
  std::uint64_t seed = 1;
  std::optional<SweepSpec> sweep;

  /// Copy with derived quantities filled in (chi, readout.read_duration).
  ExperimentConfig resolved() const;
  /// Configuration for the i-th sweep value (resolved, sweep cleared, own seed).
  ExperimentConfig sweep_point(std::size_t index) const;
  void validate() const;

  friend bool operator==(const ExperimentConfig &, const ExperimentConfig &) = default;
};

enum class Channel : std::uint8_t { d1a = 0, d1b = 1, d2a = 2, d2b = 3 };

constexpr bool is_field1(Channel c) {
  return c == Channel::d1a || c == Channel::d1b;
}
std::string_view channel_name(Channel c);
std::optional<Channel> parse_channel(std::string_view name);

/// One detector click. Field-1 times count from write-pulse turn-on,
/// field-2 times from read-pulse turn-on.
struct DetectionEvent {
  std::uint64_t trial = 0;
  Channel channel = Channel::d1a;
  double time_ns = 0.0;

  friend bool operator==(const DetectionEvent &, const DetectionEvent &) = default;
};

/// Inverse-CDF sampler for emission times distributed per the normalized
/// wavepacket, truncated to [0, read_duration] and renormalized.
/// 2^16-point grid with linear interpolation.
class EmissionSampler {
public:
  static constexpr std::size_t kGridSize = 1u << 16;

  EmissionSampler(const physics::ReadoutSpec &readout,
                  const physics::AtomSpec &atom);

  /// Maps u in [0,1) to a time in seconds.
  double quantile(double u) const;
  double sample(SplitMix64 &rng) const { return quantile(rng.uniform()); }

  /// Untruncated mass inside the read window.
  double window_mass() const { return window_mass_; }
  double read_duration() const { return duration_; }

private:
  double duration_;
  double window_mass_;
  std::vector<double> cdf_; // normalized, nondecreasing, cdf_.back() == 1
};

/// One emission time drawn from substream (seed, 0).
double sample_emission_time(const physics::ReadoutSpec &readout,
                            const physics::AtomSpec &atom, std::uint64_t seed);

struct SimulationOptions {
  unsigned workers = 1;
  /// Only trials in [first_trial, first_trial + n) are generated when set.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> trial_range;
};

/// Monte Carlo event stream, sorted by (trial, channel, time). Identical for
/// a fixed configuration and seed regardless of `workers`.
std::vector<DetectionEvent> simulate(const ExperimentConfig &config,
                                     const SimulationOptions &options = {});

struct DelayScanPoint {
  double delay = 0.0; ///< s
  std::vector<DetectionEvent> events;
};

/// Re-runs the simulation for each write-read delay (same seed).
std::vector<DelayScanPoint> delay_scan(const ExperimentConfig &config,
                                       const std::vector<double> &delays,
                                       const SimulationOptions &options = {});

/// Exact per-trial detection probabilities implied by the model (no Monte
/// Carlo), obtained from the probability generating function of the
/// stored-excitation number.
struct PredictedProbabilities {
  double p1 = 0, p2 = 0, p12 = 0, p12a = 0, p12b = 0, p122 = 0;
  double pc = 0, pcc = 0, g2c = 0, g12 = 0;
};
PredictedProbabilities predict_probabilities(const ExperimentConfig &config);

/// Field-2 background rate that places the G12 = 2 crossing at `od`.
/// Throws ConfigError if no non-negative rate does.
double calibrate_background_for_threshold(const ExperimentConfig &config,
                                          double od);

} // namespace dlcz::sim
