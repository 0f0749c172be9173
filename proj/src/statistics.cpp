#include "dlcz/statistics.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>

namespace dlcz::stats {

namespace {

Estimate ratio(std::uint64_t k, std::uint64_t n) {
  if (n == 0)
    return Estimate::undefined();
  return {static_cast<double>(k) / static_cast<double>(n), wilson_half_width(k, n)};
}

void normalize_ranges(std::vector<TrialRange> &ranges) {
  std::erase_if(ranges, [](const TrialRange &r) { return r.end <= r.begin; });
  std::sort(ranges.begin(), ranges.end(),
            [](const TrialRange &a, const TrialRange &b) { return a.begin < b.begin; });
  std::vector<TrialRange> out;
  for (const auto &r : ranges) {
    if (!out.empty() && r.begin < out.back().end)
      throw DataError(fmt::format("overlapping trial ranges [{}, {}) and [{}, {})",
                                  out.back().begin, out.back().end, r.begin, r.end));
    if (!out.empty() && r.begin == out.back().end)
      out.back().end = r.end;
    else
      out.push_back(r);
  }
  ranges = std::move(out);
}

struct TrialFlags {
  bool f1 = false, a = false, b = false;
  double first_field2_ns = 0.0;
  bool any_field2 = false;

  void add(const sim::DetectionEvent &e) {
    switch (e.channel) {
    case sim::Channel::d1a:
    case sim::Channel::d1b: f1 = true; return;
    case sim::Channel::d2a: a = true; break;
    case sim::Channel::d2b: b = true; break;
    }
    if (!any_field2 || e.time_ns < first_field2_ns)
      first_field2_ns = e.time_ns;
    any_field2 = true;
  }

  void count(CoincidenceCounts &c) const {
    c.n1 += f1;
    c.n2 += (a || b);
    c.n2a += a;
    c.n2b += b;
    c.n12 += f1 && (a || b);
    c.n12a += f1 && a;
    c.n12b += f1 && b;
    c.n122 += f1 && a && b;
  }
};

// Calls fn(flags) once per trial that has at least one event, validating
// ordering and range.
template <typename Fn>
void for_each_trial(std::span<const sim::DetectionEvent> events, TrialRange range,
                    Fn &&fn) {
  std::size_t i = 0;
  while (i < events.size()) {
    const std::uint64_t trial = events[i].trial;
    if (trial < range.begin || trial >= range.end)
      throw DataError(fmt::format("event {} has trial {} outside [{}, {})", i, trial,
                                  range.begin, range.end));
    TrialFlags flags;
    std::size_t j = i;
    for (; j < events.size() && events[j].trial == trial; ++j)
      flags.add(events[j]);
    if (j < events.size() && events[j].trial < trial)
      throw DataError(fmt::format("events not sorted by trial at index {}", j));
    fn(flags);
    i = j;
  }
}

} // namespace

CoincidenceCounts &CoincidenceCounts::operator+=(const CoincidenceCounts &o) {
  n_trials += o.n_trials;
  n1 += o.n1;
  n2 += o.n2;
  n2a += o.n2a;
  n2b += o.n2b;
  n12 += o.n12;
  n12a += o.n12a;
  n12b += o.n12b;
  n122 += o.n122;
  return *this;
}

double wilson_half_width(std::uint64_t k, std::uint64_t n) {
  if (n == 0)
    return std::numeric_limits<double>::quiet_NaN();
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  return std::sqrt(p * (1.0 - p) / nn + 0.25 / (nn * nn)) / (1.0 + 1.0 / nn);
}

CoincidenceStats::CoincidenceStats(CoincidenceCounts counts,
                                   std::vector<TrialRange> ranges,
                                   std::uint64_t config_hash)
    : counts_(counts), ranges_(std::move(ranges)), config_hash_(config_hash) {
  normalize_ranges(ranges_);
}

Estimate CoincidenceStats::p1() const { return ratio(counts_.n1, counts_.n_trials); }
Estimate CoincidenceStats::p2() const { return ratio(counts_.n2, counts_.n_trials); }
Estimate CoincidenceStats::p12() const { return ratio(counts_.n12, counts_.n_trials); }
Estimate CoincidenceStats::p122() const { return ratio(counts_.n122, counts_.n_trials); }
Estimate CoincidenceStats::pc() const { return ratio(counts_.n12, counts_.n1); }
Estimate CoincidenceStats::pca() const { return ratio(counts_.n12a, counts_.n1); }
Estimate CoincidenceStats::pcb() const { return ratio(counts_.n12b, counts_.n1); }
Estimate CoincidenceStats::pcc() const { return ratio(counts_.n122, counts_.n1); }

Estimate CoincidenceStats::g2c() const {
  const auto &c = counts_;
  if (c.n1 == 0 || c.n12a == 0 || c.n12b == 0)
    return Estimate::undefined();
  const double n1 = static_cast<double>(c.n1);
  const double na = static_cast<double>(c.n12a);
  const double nb = static_cast<double>(c.n12b);
  const double scale = n1 / (na * nb);
  const double g = static_cast<double>(c.n122) * scale;
  // Poisson error on the triple count (floored at one count) combined with
  // first-order propagation through the two pair counts.
  const double triple = std::max<double>(static_cast<double>(c.n122), 1.0);
  const double err = std::sqrt(scale * scale * triple + g * g * (1.0 / na + 1.0 / nb));
  return {g, err};
}

Estimate CoincidenceStats::g12() const {
  const Estimate c = pc();
  const Estimate q = p2();
  if (!c.defined || !q.defined || q.value == 0.0)
    return Estimate::undefined();
  const double v = c.value / q.value;
  const double err = std::hypot(c.error / q.value, c.value * q.error / (q.value * q.value));
  return {v, err};
}

CoincidenceStats accumulate(std::span<const sim::DetectionEvent> events,
                            TrialRange range, std::uint64_t config_hash) {
  if (range.end < range.begin)
    throw DataError("invalid trial range");
  CoincidenceCounts counts;
  counts.n_trials = range.size();
  for_each_trial(events, range, [&](const TrialFlags &f) { f.count(counts); });
  return CoincidenceStats(counts, {range}, config_hash);
}

CoincidenceStats accumulate(std::span<const sim::DetectionEvent> events,
                            const sim::TrialTiming &timing,
                            std::uint64_t config_hash) {
  return accumulate(events, TrialRange{0, timing.n_trials}, config_hash);
}

CoincidenceStats merge(const CoincidenceStats &a, const CoincidenceStats &b) {
  // Empty statistics are the identity; between two, keep the one with a hash.
  const auto empty = [](const CoincidenceStats &s) {
    return s.ranges().empty() && s.n_trials() == 0;
  };
  if (empty(b) && !(empty(a) && a.config_hash() == 0))
    return a;
  if (empty(a))
    return b;
  if (a.config_hash() != b.config_hash())
    throw DataError(fmt::format("cannot merge statistics from configs {:016x} and {:016x}",
                                a.config_hash(), b.config_hash()));
  std::vector<TrialRange> ranges = a.ranges();
  ranges.insert(ranges.end(), b.ranges().begin(), b.ranges().end());
  CoincidenceCounts counts = a.counts();
  counts += b.counts();
  return CoincidenceStats(counts, std::move(ranges), a.config_hash());
}

Wavepacket histogram_wavepacket(std::span<const sim::DetectionEvent> events,
                                const sim::TrialTiming &timing, double dt) {
  const double read = timing.read_duration;
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw DomainError("bin width must be positive");
  if (dt > read * (1.0 + 1e-12))
    throw DomainError("bin width exceeds the read window");

  const std::size_t n_bins =
      static_cast<std::size_t>(std::ceil(read / dt - 1e-9));
  Wavepacket wp;
  wp.bin_width = dt;
  wp.read_duration = read;
  wp.n_trials = timing.n_trials;
  wp.bins.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i)
    wp.bins[i].t_start = dt * static_cast<double>(i);

  const double read_ns = read * 1e9;
  const double dt_ns = dt * 1e9;
  std::uint64_t n2 = 0;
  for_each_trial(events, TrialRange{0, timing.n_trials}, [&](const TrialFlags &f) {
    wp.n_heralds += f.f1;
    if (!f.any_field2)
      return;
    const double t = f.first_field2_ns;
    if (!(t >= 0.0 && t <= read_ns * (1.0 + 1e-12)))
      throw DataError(fmt::format("field-2 time {} ns outside read window", t));
    const auto k = std::min(static_cast<std::size_t>(t / dt_ns), n_bins - 1);
    ++wp.bins[k].total;
    ++n2;
    if (f.f1) {
      ++wp.bins[k].heralded;
      ++wp.n_coincident;
    }
  });

  const double n1 = static_cast<double>(wp.n_heralds);
  const double nt = static_cast<double>(wp.n_trials);
  wp.normalization = wp.n_heralds ? static_cast<double>(wp.n_coincident) / n1 : 0.0;
  wp.p2_total = wp.n_trials ? static_cast<double>(n2) / nt : 0.0;
  for (auto &bin : wp.bins) {
    const double h = static_cast<double>(bin.heralded);
    const double tot = static_cast<double>(bin.total);
    bin.pc = wp.n_heralds ? Estimate{h / n1, std::sqrt(h) / n1} : Estimate::undefined();
    bin.p2 = wp.n_trials ? Estimate{tot / nt, std::sqrt(tot) / nt} : Estimate::undefined();
    if (bin.total == 0 || !bin.pc.defined) {
      bin.g12 = Estimate::undefined();
    } else {
      const double g = bin.pc.value / bin.p2.value;
      bin.g12 = {g, g * std::sqrt(1.0 / std::max(h, 1.0) + 1.0 / tot)};
    }
  }
  return wp;
}

namespace {

struct Metric {
  const char *name;
  Estimate est;
};

std::vector<Metric> metrics(const CoincidenceStats &s) {
  return {{"p1", s.p1()},   {"p2", s.p2()},   {"p12", s.p12()}, {"p122", s.p122()},
          {"pc", s.pc()},   {"pca", s.pca()}, {"pcb", s.pcb()}, {"pcc", s.pcc()},
          {"g2c", s.g2c()}, {"g12", s.g12()}};
}

std::string number(double v) {
  return std::isfinite(v) ? fmt::format("{:.10g}", v) : std::string("undefined");
}

} // namespace

void write_stats_text(std::ostream &os, const CoincidenceStats &s) {
  const auto &c = s.counts();
  fmt::print(os, "config_hash: {:016x}\n", s.config_hash());
  fmt::print(os, "n_trials: {}\n", c.n_trials);
  fmt::print(os, "counts: n1={} n2={} n2a={} n2b={} n12={} n12a={} n12b={} n122={}\n",
             c.n1, c.n2, c.n2a, c.n2b, c.n12, c.n12a, c.n12b, c.n122);
  for (const auto &m : metrics(s))
    fmt::print(os, "{}: {} +- {}\n", m.name, number(m.est.value), number(m.est.error));
}

void write_stats_csv(std::ostream &os, const CoincidenceStats &s) {
  fmt::print(os, "name,estimate,std_error\n");
  fmt::print(os, "n_trials,{},0\n", s.n_trials());
  for (const auto &m : metrics(s))
    fmt::print(os, "{},{},{}\n", m.name, number(m.est.value), number(m.est.error));
}

} // namespace dlcz::stats
