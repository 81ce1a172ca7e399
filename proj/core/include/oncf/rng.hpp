#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oncf {

using Rng = std::mt19937_64;

// Independent streams derived from one root seed, one per purpose.
enum class SeedPurpose : std::uint64_t {
  Init = 1,
  Split = 2,
  Shuffle = 3,
  Negatives = 4,
  GradCheck = 5,
  Synthetic = 6,
  NetInit = 7,
};

// SplitMix64 finalizer over (root, purpose).
std::uint64_t derive_seed(std::uint64_t root, SeedPurpose purpose);

inline Rng make_rng(std::uint64_t root, SeedPurpose purpose) { return Rng(derive_seed(root, purpose)); }

}  // namespace oncf
