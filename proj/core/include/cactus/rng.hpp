#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cactus {

using Rng = std::mt19937_64;

// Derives an independent generator from a tuple of keys, e.g. (seed, epoch, episode).
// std::seed_seq is fully specified by the standard, so streams are reproducible.
inline Rng derive_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(keys.size() * 2);
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

inline double uniform_unit(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace cactus
