#include "oncf/rng.hpp"

namespace oncf {

std::uint64_t derive_seed(std::uint64_t root, SeedPurpose purpose) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(purpose) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace oncf
