#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace s2st {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream labels into an independent seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

/// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal(Rng& rng, double stddev) {
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

}  // namespace s2st
