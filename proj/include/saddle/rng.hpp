// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace saddle {

using Rng = std::mt19937_64;

/// Independent stream purposes. Every random draw in the simulator comes from a
/// stream keyed by (seed, purpose, agent, round) so results never depend on the
/// order in which agents are processed.
enum class Stream : std::uint64_t {
  init = 1,
  data = 2,
  partition = 3,
  batch = 4,
  compress = 5,
  lambda = 6,
  surface = 7,
  variance = 8,
  objective = 9,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng make_stream(std::uint64_t seed, Stream purpose, std::uint64_t agent = 0,
                       std::uint64_t round = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ agent);
  h = splitmix64(h ^ round);
  return Rng(h);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace saddle
