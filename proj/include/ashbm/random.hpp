#pragma once

#include <cstdint>
#include <random>

namespace ashbm {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound) by rejection, independent of the standard
/// library's distribution implementation.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for trial `index` of an experiment: splitmix64(base ^ splitmix64(index)).
/// Depends only on (base, index), so trials can run in any order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(base ^ splitmix64(index));
}

}  // namespace ashbm
