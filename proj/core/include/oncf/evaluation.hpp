#pragma once

// Leave-one-out ranking metrics. Each evaluated user's held-out item is ranked
// against that user's fixed sampled negatives; HR@k and NDCG@k are averaged over
// users.

#include <map>
#include <span>
#include <vector>

#include "oncf/dataset.hpp"
#include "oncf/model.hpp"

namespace oncf {

struct Metrics {
  double hr = 0.0;
  double ndcg = 0.0;
  bool operator==(const Metrics&) const = default;
};

struct EvalResult {
  std::map<std::size_t, Metrics> at;  // k -> metrics
  std::size_t users_evaluated = 0;
  bool operator==(const EvalResult&) const = default;
};

inline const std::vector<std::size_t> kDefaultCutoffs{5, 10, 20};

// 1 + number of candidates scoring strictly above the target (ties favour the target).
std::size_t rank_of_target(std::span<const double> scores, std::size_t target_index);

double hr_at_k(std::size_t rank, std::size_t k);

// 1 / log2(rank + 1) inside the cutoff, 0 outside.
double ndcg_at_k(std::size_t rank, std::size_t k);

// Mean HR/NDCG over the given ranks.
EvalResult summarize_ranks(std::span<const std::size_t> ranks, std::span<const std::size_t> ks = kDefaultCutoffs);

enum class EvalSplit { Validation, Test };

// One rank per evaluated user, aligned with split.test / split.validation.
// Validation candidates are scored with train-only histories, test candidates
// with train + validation histories. Per-user work fans out over `threads`;
// the result does not depend on the thread count.
std::vector<std::size_t> rank_users(const Model& model, const SplitSet& split, EvalSplit which,
                                    std::size_t threads = 1);

EvalResult evaluate(const Model& model, const SplitSet& split, EvalSplit which,
                    std::span<const std::size_t> ks = kDefaultCutoffs, std::size_t threads = 1);

// Item popularity: number of train interactions per item.
Vec itempop_scores(const Dataset& train);

// ItemPop baseline as a model (merge none, popularity head).
Model fit_itempop(const Dataset& train);

// Mean of the last min(10, n) entries, per metric.
EvalResult rolling_last10(std::span<const EvalResult> history);

// Top-k unseen items for u, best first; ties by lower item index.
std::vector<std::pair<ItemId, double>> recommend(const Model& model, const SplitSet& split, UserId u,
                                                 std::size_t k);

}  // namespace oncf
