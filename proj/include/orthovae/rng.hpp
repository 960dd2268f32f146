#pragma once

#include <cstdint>
#include <random>

namespace orthovae {

using Rng = std::mt19937_64;

/// Independent stream seed from a base seed and a stream tag (splitmix64).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream tags so each consumer of a run seed draws from its own sequence.
namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kNoise = 5;
inline constexpr std::uint64_t kMetrics = 6;
inline constexpr std::uint64_t kBaseline = 7;
inline constexpr std::uint64_t kGenerator = 8;
}  // namespace stream

}  // namespace orthovae
