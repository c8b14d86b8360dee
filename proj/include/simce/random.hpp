#pragma once

#include <cstdint>
#include <random>

#include "simce/common.hpp"

namespace simce {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generator for (seed, stream, index). Streams depend only on the
// counters, never on how many draws other streams made.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  const std::uint64_t b = splitmix64(a ^ splitmix64(index));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return std::mt19937_64(seq);
}

// Named stream ids so unrelated consumers of one master seed never collide.
enum class Stream : std::uint64_t {
  kRestart = 1,
  kCodebook = 2,
  kTrial = 3,
  kTest = 99,
};

inline std::mt19937_64 substream(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return substream(seed, static_cast<std::uint64_t>(stream), index);
}

// Circularly-symmetric CN(0, 1): real and imaginary parts each N(0, 1/2).
template <class Rng>
CVector complex_gaussian(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = cd(re, im);
  }
  return v;
}

}  // namespace simce
