#pragma once

#include <cstdint>
#include <random>

namespace supsup {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-mode seed split: child `index` of stream `tag` under `master`.
/// The result for a given (master, tag, index) does not depend on how many
/// other children are drawn. Never returns 0.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t s = mix64(mix64(master ^ mix64(tag)) + index);
  return s == 0 ? 1 : s;
}

/// Stream tags used by derive_seed across the library.
namespace seed_tag {
inline constexpr std::uint64_t kWeights = 1;
inline constexpr std::uint64_t kScores = 2;
inline constexpr std::uint64_t kPermutation = 3;
inline constexpr std::uint64_t kSynthetic = 4;
inline constexpr std::uint64_t kBatches = 5;
inline constexpr std::uint64_t kFastWeights = 6;
inline constexpr std::uint64_t kReference = 7;
}  // namespace seed_tag

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace supsup
