#pragma once

#include <cstdint>
#include <limits>

namespace dlcz {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Small counter-style generator (SplitMix64). Satisfies
/// UniformRandomBitGenerator so it can drive <random> distributions.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t state_;
};

/// Independent substream for one trial: depends only on (seed, index), so
/// any partition of trials across workers draws identical numbers.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(mix64(seed ^ mix64(index + 0x632BE59BD9B4E019ULL)));
}

} // namespace dlcz
