#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace bitecast {

// All randomness in the library flows through std::mt19937_64 (whose raw
// output sequence is pinned by the standard) plus the explicit transforms
// below. std::uniform_real_distribution and friends are implementation
// defined, so they are never used outside test oracles; this keeps every
// seeded result reproducible across standard libraries.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derived seed for independent work streams (ensembles, pipeline stages).
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
}

// Uniform double in [0, 1), 53 usable bits.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1]; safe as a log() argument.
inline double uniform_open01(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& eng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = eng();
    if (r >= threshold) return r % n;
  }
}

// Box-Muller pair from two engine draws.
inline std::pair<double, double> normal_pair(std::mt19937_64& eng) {
  const double u1 = uniform_open01(eng);
  const double u2 = uniform01(eng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 6.283185307179586477 * u2;
  return {r * std::cos(t), r * std::sin(t)};
}

inline double standard_normal(std::mt19937_64& eng) {
  return normal_pair(eng).first;
}

inline void fill_standard_normals(std::mt19937_64& eng, std::span<double> out) {
  std::size_t i = 0;
  while (i + 1 < out.size()) {
    const auto [z0, z1] = normal_pair(eng);
    out[i++] = z0;
    out[i++] = z1;
  }
  if (i < out.size()) out[i] = standard_normal(eng);
}

// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& eng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(eng, i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// First k entries of a random permutation of 0..n-1 (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::mt19937_64& eng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(eng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace bitecast
