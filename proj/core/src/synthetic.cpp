#include "oncf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "oncf/error.hpp"

namespace oncf {

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.users == 0 || spec.items == 0 || spec.rank == 0) throw ConfigError("synthetic: empty dimensions");
  if (spec.min_interactions > spec.max_interactions || spec.max_interactions > spec.items) {
    throw ConfigError("synthetic: interaction range must satisfy min <= max <= items");
  }
  Rng rng = make_rng(spec.seed, SeedPurpose::Synthetic);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> user_f(spec.users * spec.rank);
  std::vector<double> item_f(spec.items * spec.rank);
  std::vector<double> bias(spec.items);
  for (auto& x : user_f) x = normal(rng);
  for (auto& x : item_f) x = normal(rng);
  for (auto& x : bias) x = normal(rng);

  std::vector<std::string> user_ids(spec.users);
  std::vector<std::string> item_ids(spec.items);
  for (std::size_t u = 0; u < spec.users; ++u) user_ids[u] = "u" + std::to_string(u);
  for (std::size_t i = 0; i < spec.items; ++i) item_ids[i] = "i" + std::to_string(i);

  const double scale = spec.signal / std::sqrt(static_cast<double>(spec.rank));
  std::uniform_int_distribution<std::size_t> count_dist(spec.min_interactions, spec.max_interactions);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<ItemEvent>> per_user(spec.users);
  std::vector<std::pair<double, ItemId>> keys(spec.items);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const double* x = user_f.data() + u * spec.rank;
    // Gumbel-top-k: sampling n items without replacement, weights exp(logit).
    for (std::size_t i = 0; i < spec.items; ++i) {
      const double* y = item_f.data() + i * spec.rank;
      double affinity = 0.0;
      for (std::size_t r = 0; r < spec.rank; ++r) affinity += x[r] * y[r];
      const double logit = scale * affinity + spec.popularity * bias[i];
      const double gumbel = -std::log(-std::log(std::max(unit(rng), 1e-300)));
      keys[i] = {logit + gumbel, static_cast<ItemId>(i)};
    }
    const std::size_t n = count_dist(rng);
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::int64_t> stamps(n);
    std::iota(stamps.begin(), stamps.end(), 0);
    std::shuffle(stamps.begin(), stamps.end(), rng);
    for (std::size_t k = 0; k < n; ++k) per_user[u].push_back({keys[k].second, stamps[k]});
  }
  return Dataset(std::move(user_ids), std::move(item_ids), std::move(per_user));
}

void write_interactions(std::ostream& out, const Dataset& data) {
  for (const auto& r : data.interactions()) {
    out << data.user_id(r.user) << '\t' << data.item_id(r.item) << '\t' << r.timestamp << '\n';
  }
}

}  // namespace oncf
