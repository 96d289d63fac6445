#pragma once

#include <cstdint>
#include <random>

namespace mexa {

using Rng = std::mt19937_64;

/// Independent, reproducible sub-stream seed for `stream` derived from `seed`
/// (SplitMix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Named sub-streams so that every consumer of randomness is isolated.
enum class Stream : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kSelection = 3,
  kSplit = 4,
  kBootstrap = 5,
  kSynth = 6,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace mexa
