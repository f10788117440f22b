#pragma once

#include <cstdint>
#include <random>

namespace n2n {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream roles. Input and target corruptions of the same draw never share a stream.
enum class StreamRole : std::uint64_t {
  input = 1,
  target = 2,
  clean = 3,
  validation = 4,
  init = 5,
  aux = 6,
};

/// Deterministic generator keyed by (seed, index, role).
inline Rng make_stream(std::uint64_t seed, std::uint64_t index, StreamRole role) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ mix64(index + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(role));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace n2n
