#pragma once

#include <cstdint>
#include <iosfwd>

#include "oncf/dataset.hpp"

namespace oncf {

// Planted low-rank preference data. Each user draws its items without
// replacement with probability proportional to
// exp(signal * <x_u, y_i> / sqrt(rank) + popularity * b_i), where x_u, y_i, b_i
// are standard normal. Timestamps are a random permutation of 0..n_u-1.
struct SyntheticSpec {
  std::size_t users = 200;
  std::size_t items = 300;
  std::size_t rank = 8;
  std::size_t min_interactions = 15;
  std::size_t max_interactions = 25;
  double signal = 2.5;
  double popularity = 0.5;
  std::uint64_t seed = 7;
};

Dataset make_synthetic(const SyntheticSpec& spec);

// Same data as TSV interaction records (`u<k>`, `i<k>` raw ids).
void write_interactions(std::ostream& out, const Dataset& data);

}  // namespace oncf
