#include "dlcz/source_sim.hpp"

#include "dlcz/errors.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace dlcz::sim {

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

// Excitation number for one trial. Both draws consume exactly one uniform so
// the rest of the trial's stream is aligned regardless of the outcome.
std::uint64_t draw_excitations(SplitMix64 &rng, double mean,
                               PhotonStatistics stats) {
  const double u = 1.0 - rng.uniform(); // (0, 1]
  if (mean <= 0.0)
    return 0;
  if (stats == PhotonStatistics::thermal) {
    // Geometric: P(m) = q^m (1 - q), q = mean / (1 + mean).
    const double q = mean / (1.0 + mean);
    return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log(q)));
  }
  // Poisson by sequential inversion.
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  const double target = 1.0 - u; // [0, 1)
  while (target >= cdf && k < 100000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (p == 0.0 && static_cast<double>(k) > mean)
      break;
  }
  return k;
}

struct TrialGenerator {
  const ExperimentConfig &config;
  const EmissionSampler *sampler; // null when no field-2 photons can occur
  double herald_eff;
  double photon_eff;

  void run(std::uint64_t begin, std::uint64_t end,
           std::vector<DetectionEvent> &out) const {
    const auto &model = config.model;
    const auto &timing = config.timing;
    const double write_ns = timing.write_duration * 1e9;
    const double read_ns = timing.read_duration * 1e9;
    std::vector<DetectionEvent> trial_events;

    for (std::uint64_t trial = begin; trial < end; ++trial) {
      SplitMix64 rng = substream(config.seed, trial);
      trial_events.clear();

      const std::uint64_t m =
          draw_excitations(rng, model.mean_excitation, model.photon_statistics);
      for (std::uint64_t k = 0; k < m; ++k) {
        const bool herald = rng.uniform() < herald_eff;
        const bool photon = rng.uniform() < photon_eff;
        if (herald) {
          const auto ch = rng.uniform() < 0.5 ? Channel::d1a : Channel::d1b;
          trial_events.push_back({trial, ch, rng.uniform() * write_ns});
        }
        if (photon) {
          const auto ch = rng.uniform() < 0.5 ? Channel::d2a : Channel::d2b;
          trial_events.push_back({trial, ch, sampler->sample(rng) * 1e9});
        }
      }
      if (rng.uniform() < model.field1_noise) {
        const auto ch = rng.uniform() < 0.5 ? Channel::d1a : Channel::d1b;
        trial_events.push_back({trial, ch, rng.uniform() * write_ns});
      }
      if (rng.uniform() < model.field2_background_rate) {
        const auto ch = rng.uniform() < 0.5 ? Channel::d2a : Channel::d2b;
        trial_events.push_back({trial, ch, rng.uniform() * read_ns});
      }

      std::sort(trial_events.begin(), trial_events.end(),
                [](const DetectionEvent &a, const DetectionEvent &b) {
                  if (a.channel != b.channel)
                    return a.channel < b.channel;
                  return a.time_ns < b.time_ns;
                });
      out.insert(out.end(), trial_events.begin(), trial_events.end());
    }
  }
};

} // namespace

void SourceModel::validate() const {
  if (!std::isfinite(mean_excitation) || mean_excitation < 0.0 ||
      mean_excitation > 100.0)
    throw ConfigError("model.mean_excitation must lie in [0, 100]");
  const std::pair<const char *, double> probabilities[] = {
      {"model.field1_cond_efficiency", field1_cond_efficiency},
      {"model.field1_noise", field1_noise},
      {"model.retrieval_efficiency", retrieval_efficiency},
      {"model.chain_efficiency", chain_efficiency},
      {"model.field2_background", field2_background_rate},
  };
  for (const auto &[name, p] : probabilities)
    if (!is_probability(p))
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
  if (!(coherence_time > 0.0))
    throw ConfigError("model.coherence_time must be positive");
  if (!std::isfinite(write_read_delay) || write_read_delay < 0.0)
    throw ConfigError("model.write_read_delay must be >= 0");
  if (!(retrieval_od_scale > 0.0) || !std::isfinite(retrieval_od_scale))
    throw ConfigError("model.retrieval_od_scale must be positive");
}

double SourceModel::decoherence_factor() const {
  const double x = write_read_delay / coherence_time;
  return decoherence_law == DecoherenceLaw::exponential ? std::exp(-x)
                                                        : std::exp(-x * x);
}

double SourceModel::retrieval_at(double od) const {
  if (retrieval_law == RetrievalLaw::constant)
    return retrieval_efficiency;
  const double x2 = (od / retrieval_od_scale) * (od / retrieval_od_scale);
  return retrieval_efficiency * x2 / std::sqrt(1.0 + x2 * x2);
}

double SourceModel::field2_efficiency(double od) const {
  return retrieval_at(od) * chain_efficiency * decoherence_factor();
}

void TrialTiming::validate(const SourceModel &model) const {
  if (!(trial_period > 0.0) || !(write_duration > 0.0) || !(read_duration > 0.0))
    throw ConfigError("timing durations must be positive");
  if (write_duration + model.write_read_delay + read_duration >
      trial_period * (1.0 + 1e-12))
    throw ConfigError("write + write_read_delay + read exceeds trial_period");
  if (!(apd_window > 0.0))
    throw ConfigError("timing.apd_window must be positive");
}

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig out = *this;
  out.readout.read_duration = timing.read_duration;
  if (chi_from_od)
    out.readout.chi = physics::chi_from_od(ensemble.od, atom);
  return out;
}

ExperimentConfig ExperimentConfig::sweep_point(std::size_t index) const {
  if (!sweep || index >= sweep->values.size())
    throw ConfigError("sweep index out of range");
  ExperimentConfig out = *this;
  const double v = sweep->values[index];
  const std::string &key = sweep->key;
  if (key == "od") {
    out.ensemble.od = v;
    out.ensemble.n_atoms.reset();
  } else if (key == "power") {
    out.readout.power = v;
  } else if (key == "delay") {
    out.model.write_read_delay = v;
  } else if (key == "mean_excitation") {
    out.model.mean_excitation = v;
  } else {
    throw ConfigError("unknown sweep key '" + key + "'");
  }
  out.sweep.reset();
  out.seed = mix64(seed ^ mix64(index + 0x5DEECE66DULL));
  return out.resolved();
}

void ExperimentConfig::validate() const {
  if (schema_version != 1)
    throw ConfigError("unsupported schema_version");
  atom.validate();
  ensemble.validate(atom);
  model.validate();
  timing.validate(model);
  const ExperimentConfig r = resolved();
  try {
    r.readout.validate();
  } catch (const DomainError &e) {
    throw ConfigError(e.what());
  }
  if (!(r.readout.power > 0.0))
    throw ConfigError("readout.power must be positive");
  if (sweep) {
    if (sweep->values.empty())
      throw ConfigError("sweep list is empty");
    for (std::size_t i = 0; i < sweep->values.size(); ++i)
      sweep_point(i).validate();
  }
}

std::string_view channel_name(Channel c) {
  switch (c) {
  case Channel::d1a: return "1a";
  case Channel::d1b: return "1b";
  case Channel::d2a: return "2a";
  case Channel::d2b: return "2b";
  }
  return "?";
}

std::optional<Channel> parse_channel(std::string_view name) {
  if (name == "1a") return Channel::d1a;
  if (name == "1b") return Channel::d1b;
  if (name == "2a") return Channel::d2a;
  if (name == "2b") return Channel::d2b;
  return std::nullopt;
}

EmissionSampler::EmissionSampler(const physics::ReadoutSpec &readout,
                                 const physics::AtomSpec &atom)
    : duration_(readout.read_duration), window_mass_(0.0), cdf_(kGridSize) {
  readout.validate();
  if (!(readout.rabi_frequency(atom) > 0.0))
    throw DomainError("emission sampling needs a nonzero Rabi frequency");
  const double step = duration_ / static_cast<double>(kGridSize - 1);
  double running = 0.0;
  for (std::size_t i = 0; i < kGridSize; ++i) {
    const double f =
        1.0 - physics::wavepacket_survival(step * static_cast<double>(i), readout, atom);
    running = std::max(running, f);
    cdf_[i] = running;
  }
  window_mass_ = cdf_.back();
  if (!(window_mass_ > 0.0))
    throw DomainError("no emission probability inside the read window");
  for (double &v : cdf_)
    v /= window_mass_;
  cdf_.back() = 1.0;
}

double EmissionSampler::quantile(double u) const {
  const auto it = std::upper_bound(cdf_.begin() + 1, cdf_.end(), u);
  if (it == cdf_.end())
    return duration_;
  const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  const double step = duration_ / static_cast<double>(kGridSize - 1);
  const double lo = cdf_[i - 1];
  const double hi = cdf_[i];
  const double t0 = step * static_cast<double>(i - 1);
  if (hi <= lo)
    return t0;
  return t0 + (u - lo) / (hi - lo) * step;
}

double sample_emission_time(const physics::ReadoutSpec &readout,
                            const physics::AtomSpec &atom, std::uint64_t seed) {
  EmissionSampler sampler(readout, atom);
  SplitMix64 rng = substream(seed, 0);
  return sampler.sample(rng);
}

std::vector<DetectionEvent> simulate(const ExperimentConfig &raw,
                                     const SimulationOptions &options) {
  raw.validate();
  const ExperimentConfig config = raw.resolved();

  std::uint64_t begin = 0;
  std::uint64_t end = config.timing.n_trials;
  if (options.trial_range) {
    begin = options.trial_range->first;
    end = begin + options.trial_range->second;
  }

  const double photon_eff = config.model.field2_efficiency(config.ensemble.od);
  std::optional<EmissionSampler> sampler;
  if (photon_eff > 0.0 && config.model.mean_excitation > 0.0)
    sampler.emplace(config.readout, config.atom);
  const TrialGenerator gen{config, sampler ? &*sampler : nullptr,
                           config.model.field1_cond_efficiency, photon_eff};

  const std::uint64_t total = end > begin ? end - begin : 0;
  const unsigned workers = std::max(1u, std::min<unsigned>(
      options.workers, static_cast<unsigned>(std::max<std::uint64_t>(1, total / 1000))));

  std::vector<DetectionEvent> events;
  if (workers == 1) {
    gen.run(begin, end, events);
    return events;
  }

  std::vector<std::vector<DetectionEvent>> parts(workers);
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t b = begin + total * w / workers;
    const std::uint64_t e = begin + total * (w + 1) / workers;
    threads.emplace_back([&gen, &parts, w, b, e] { gen.run(b, e, parts[w]); });
  }
  for (auto &t : threads)
    t.join();
  std::size_t n = 0;
  for (const auto &p : parts)
    n += p.size();
  events.reserve(n);
  for (auto &p : parts)
    events.insert(events.end(), p.begin(), p.end());
  return events;
}

std::vector<DelayScanPoint> delay_scan(const ExperimentConfig &config,
                                       const std::vector<double> &delays,
                                       const SimulationOptions &options) {
  std::vector<DelayScanPoint> out;
  out.reserve(delays.size());
  for (double d : delays) {
    if (!std::isfinite(d) || d < 0.0)
      throw DomainError("write-read delay must be >= 0");
    ExperimentConfig c = config;
    c.model.write_read_delay = d;
    out.push_back({d, simulate(c, options)});
  }
  return out;
}

PredictedProbabilities predict_probabilities(const ExperimentConfig &raw) {
  const ExperimentConfig config = raw.resolved();
  const auto &m = config.model;
  const double n = m.mean_excitation;
  const double h = m.field1_cond_efficiency;
  const double e = m.field2_efficiency(config.ensemble.od);
  const double n1 = m.field1_noise;
  const double nb = m.field2_background_rate;

  // E[x^m] for the excitation-number law.
  const auto pgf = [&](double x) {
    return m.photon_statistics == PhotonStatistics::thermal
               ? 1.0 / (1.0 + n * (1.0 - x))
               : std::exp(-n * (1.0 - x));
  };
  // Probabilities that none of the listed detectors fire.
  const double none_f = (1 - n1) * pgf(1 - h);
  const double none_a = (1 - nb / 2) * pgf(1 - e / 2);
  const double none_ab = (1 - nb) * pgf(1 - e);
  const double none_fa = (1 - n1) * (1 - nb / 2) * pgf((1 - h) * (1 - e / 2));
  const double none_fab = (1 - n1) * (1 - nb) * pgf((1 - h) * (1 - e));

  PredictedProbabilities p;
  p.p1 = 1 - none_f;
  p.p2 = 1 - none_ab;
  p.p12 = 1 - none_f - none_ab + none_fab;
  p.p12a = 1 - none_f - none_a + none_fa;
  p.p12b = p.p12a;
  p.p122 = 1 - none_f - 2 * none_a + 2 * none_fa + none_ab - none_fab;
  if (p.p1 > 0) {
    p.pc = p.p12 / p.p1;
    p.pcc = p.p122 / p.p1;
    p.g2c = p.p12a > 0 ? p.p122 * p.p1 / (p.p12a * p.p12b) : 0.0;
  }
  p.g12 = p.p2 > 0 ? p.pc / p.p2 : 0.0;
  return p;
}

double calibrate_background_for_threshold(const ExperimentConfig &config,
                                          double od) {
  ExperimentConfig c = config;
  c.ensemble.od = od;
  c.ensemble.n_atoms.reset();
  const auto g12_at = [&](double rate) {
    c.model.field2_background_rate = rate;
    return predict_probabilities(c).g12;
  };
  if (g12_at(0.0) <= 2.0)
    throw ConfigError("G12 stays below 2 at this OD for any background rate");
  double lo = 0.0, hi = 1.0;
  if (g12_at(hi) > 2.0)
    throw ConfigError("G12 exceeds 2 at this OD for every background rate");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g12_at(mid) > 2.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace dlcz::sim
