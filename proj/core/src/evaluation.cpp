#include "oncf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include "oncf/error.hpp"

namespace oncf {

std::size_t rank_of_target(std::span<const double> scores, std::size_t target_index) {
  if (target_index >= scores.size()) throw BoundsError("rank_of_target: target index out of range");
  const double t = scores[target_index];
  std::size_t above = 0;
  for (double s : scores) above += s > t ? 1 : 0;
  return above + 1;
}

double hr_at_k(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

EvalResult summarize_ranks(std::span<const std::size_t> ranks, std::span<const std::size_t> ks) {
  EvalResult r;
  r.users_evaluated = ranks.size();
  for (std::size_t k : ks) {
    Metrics m;
    for (std::size_t rank : ranks) {
      m.hr += hr_at_k(rank, k);
      m.ndcg += ndcg_at_k(rank, k);
    }
    if (!ranks.empty()) {
      m.hr /= static_cast<double>(ranks.size());
      m.ndcg /= static_cast<double>(ranks.size());
    }
    r.at[k] = m;
  }
  return r;
}

std::vector<std::size_t> rank_users(const Model& model, const SplitSet& split, EvalSplit which,
                                    std::size_t threads) {
  const auto& cases = which == EvalSplit::Test ? split.test : split.validation;
  std::vector<std::size_t> ranks(cases.size(), 0);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<ItemId> candidates;
    for (std::size_t c = begin; c < end; ++c) {
      const HeldOut& h = cases[c];
      try {
        const auto& negatives = split.eval_negatives.at(h.user);
        candidates.assign(1, h.item);
        candidates.insert(candidates.end(), negatives.begin(), negatives.end());
        const auto history = split.user_history(h.user, which == EvalSplit::Test);
        const auto scores = score_items(model, h.user, history, candidates);
        for (double s : scores) {
          if (!std::isfinite(s)) throw std::runtime_error("non-finite score");
        }
        ranks[c] = rank_of_target(scores, 0);
      } catch (const std::exception& e) {
        throw std::runtime_error("evaluating user " + split.train.user_id(h.user) + ": " + e.what());
      }
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, cases.size()));
  if (threads == 1) {
    work(0, cases.size());
    return ranks;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (cases.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(cases.size(), begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return ranks;
}

EvalResult evaluate(const Model& model, const SplitSet& split, EvalSplit which, std::span<const std::size_t> ks,
                    std::size_t threads) {
  const auto ranks = rank_users(model, split, which, threads);
  return summarize_ranks(ranks, ks);
}

Vec itempop_scores(const Dataset& train) {
  Vec scores(train.num_items());
  for (UserId u = 0; u < train.num_users(); ++u) {
    for (const auto& e : train.history(u)) scores[e.item] += 1.0;
  }
  return scores;
}

Model fit_itempop(const Dataset& train) {
  Model m = make_model(ModelSpec::itempop(), train.num_users(), train.num_items(), 0);
  m.head = PopularityHead{itempop_scores(train)};
  return m;
}

EvalResult rolling_last10(std::span<const EvalResult> history) {
  if (history.empty()) throw std::invalid_argument("rolling_last10: empty history");
  const std::size_t n = std::min<std::size_t>(10, history.size());
  const auto window = history.subspan(history.size() - n);
  EvalResult out;
  out.users_evaluated = window.back().users_evaluated;
  for (const auto& [k, unused] : window.back().at) {
    Metrics m;
    for (const auto& r : window) {
      const Metrics& x = r.at.at(k);
      m.hr += x.hr;
      m.ndcg += x.ndcg;
    }
    m.hr /= static_cast<double>(n);
    m.ndcg /= static_cast<double>(n);
    out.at[k] = m;
  }
  return out;
}

std::vector<std::pair<ItemId, double>> recommend(const Model& model, const SplitSet& split, UserId u,
                                                 std::size_t k) {
  if (u >= split.train.num_users()) throw BoundsError("recommend: user index out of range");
  const auto history = split.user_history(u, true);
  std::vector<ItemId> candidates;
  for (ItemId i = 0; i < split.train.num_items(); ++i) {
    if (!std::binary_search(history.begin(), history.end(), i)) candidates.push_back(i);
  }
  const auto scores = score_items(model, u, history, candidates);
  std::vector<std::pair<ItemId, double>> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) ranked.emplace_back(candidates[c], scores[c]);
  const std::size_t top = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top), ranked.end(),
                    [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                    });
  ranked.resize(top);
  return ranked;
}

}  // namespace oncf
