#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "oncf/error.hpp"
#include "oncf/evaluation.hpp"
#include "oncf/synthetic.hpp"
#include "reference_values.hpp"
#include "test_support.hpp"

namespace oncf {
namespace {

SplitSet synthetic_split(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.users = 40;
  spec.items = 60;
  spec.rank = 4;
  spec.min_interactions = 5;
  spec.max_interactions = 12;
  spec.seed = seed;
  return split_leave_latest_out(make_synthetic(spec), seed, 30);
}

// Five users with three private items each and a private latest item.
Dataset private_items_fixture() {
  std::ostringstream tsv;
  for (int u = 0; u < 5; ++u)
    for (int k = 0; k < 4; ++k) tsv << "u" << u << "\tp" << u << "_" << k << '\t' << k << '\n';
  return test::dataset_from(tsv.str());
}

TEST(RankOfTarget, Examples) {
  EXPECT_EQ(rank_of_target(std::vector<double>{0.1, 5.0, 0.3}, 1), 1u);
  EXPECT_EQ(rank_of_target(std::vector<double>(1000, 0.25), 0), 1u);
  EXPECT_EQ(rank_of_target(std::vector<double>(1000, 0.25), 999), 1u);
  EXPECT_EQ(rank_of_target(std::vector<double>{3, 2, 1}, 2), 3u);
  EXPECT_THROW(rank_of_target(std::vector<double>{1, 2}, 2), BoundsError);
}

TEST(RankOfTarget, MatchesStableSortOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> scores(1000);
    // Coarse grid so that ties occur.
    for (auto& s : scores) s = static_cast<double>(rng() % 200);
    const std::size_t target = rng() % scores.size();
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    // Target first among equals, then by descending score.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a == target && b != target;
    });
    const std::size_t want = static_cast<std::size_t>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
    EXPECT_EQ(rank_of_target(scores, target), want);
  }
}

TEST(RankOfTarget, InvariantUnderIncreasingTransformsProperty) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(200), affine(200), cubic(200);
    for (std::size_t k = 0; k < s.size(); ++k) {
      // Dyadic grid values keep both transforms exact, ties included.
      s[k] = static_cast<double>(static_cast<int>(rng() % 64) - 32) / 8.0;
      affine[k] = 2.5 * s[k] + 3.0;
      cubic[k] = s[k] * s[k] * s[k];
    }
    const std::size_t t = rng() % s.size();
    EXPECT_EQ(rank_of_target(affine, t), rank_of_target(s, t));
    EXPECT_EQ(rank_of_target(cubic, t), rank_of_target(s, t));
  }
}

TEST(HitRatio, Examples) {
  EXPECT_EQ(hr_at_k(1, 5), 1.0);
  EXPECT_EQ(hr_at_k(6, 5), 0.0);
  EXPECT_EQ(hr_at_k(5, 5), 1.0);
}

TEST(Ndcg, Examples) {
  EXPECT_EQ(ndcg_at_k(1, 10), 1.0);
  EXPECT_NEAR(ndcg_at_k(2, 10), oracle::kNdcgRank2, 1e-15);
  EXPECT_NEAR(ndcg_at_k(2, 10), 0.6309298, 1e-6);
  EXPECT_NEAR(ndcg_at_k(11, 20), oracle::kNdcgRank11, 1e-15);
  EXPECT_EQ(ndcg_at_k(7, 5), 0.0);
  EXPECT_EQ(ndcg_at_k(11, 10), 0.0);
}

TEST(SummarizeRanks, TwoUserAveraging) {
  const std::vector<std::size_t> ranks{1, 11};
  const EvalResult r = summarize_ranks(ranks);
  EXPECT_EQ(r.users_evaluated, 2u);
  EXPECT_EQ(r.at.at(10).hr, 0.5);
  EXPECT_EQ(r.at.at(10).ndcg, 0.5);
  EXPECT_EQ(r.at.at(20).hr, 1.0);
  EXPECT_NEAR(r.at.at(20).ndcg, (1.0 + oracle::kNdcgRank11) / 2, 1e-15);
}

TEST(SummarizeRanks, MonotoneAndNdcgBelowHrProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> ranks(1 + rng() % 50);
    for (auto& r : ranks) r = 1 + rng() % (rng() % 2 ? 30 : 1000);
    const EvalResult e = summarize_ranks(ranks);
    const Metrics& m5 = e.at.at(5);
    const Metrics& m10 = e.at.at(10);
    const Metrics& m20 = e.at.at(20);
    EXPECT_LE(m5.hr, m10.hr);
    EXPECT_LE(m10.hr, m20.hr);
    EXPECT_LE(m5.ndcg, m10.ndcg);
    EXPECT_LE(m10.ndcg, m20.ndcg);
    for (const Metrics* m : {&m5, &m10, &m20}) {
      EXPECT_LE(m->ndcg, m->hr);
      EXPECT_GE(m->ndcg, 0.0);
      EXPECT_LE(m->hr, 1.0);
    }
  }
}

TEST(Evaluate, PerfectModelScoresOne) {
  const SplitSet split = split_leave_latest_out(private_items_fixture(), 4, 10);
  ASSERT_EQ(split.test.size(), 5u);
  Model m = make_model(ModelSpec::shallow(Variant::MF, 5), 5, split.train.num_items(), 1);
  std::fill(m.tables.P->values().begin(), m.tables.P->values().end(), 0.0);
  std::fill(m.tables.Q.values().begin(), m.tables.Q.values().end(), 0.0);
  for (const HeldOut& h : split.test) {
    (*m.tables.P)(h.user, h.user) = 1.0;
    m.tables.Q(h.item, h.user) = 1.0;
  }
  const EvalResult r = evaluate(m, split, EvalSplit::Test);
  for (const auto& [k, metrics] : r.at) {
    EXPECT_EQ(metrics.hr, 1.0) << k;
    EXPECT_EQ(metrics.ndcg, 1.0) << k;
  }
}

TEST(Evaluate, ItemPopFindsTheMostPopularUnseenItem) {
  std::ostringstream tsv;
  for (int u = 0; u < 5; ++u) {
    for (int k = 0; k < 3; ++k) tsv << "u" << u << "\town" << u << "_" << k << '\t' << k << '\n';
    tsv << "u" << u << "\tpop\t10\n";
  }
  for (int f = 0; f < 10; ++f) {
    tsv << "f" << f << "\tpop\t0\n";
    for (int k = 1; k < 4; ++k) tsv << "f" << f << "\tx" << f << "_" << k << '\t' << k << '\n';
  }
  const SplitSet split = split_leave_latest_out(test::dataset_from(tsv.str()), 5, 20);
  const Model pop = fit_itempop(split.train);
  const auto ranks = rank_users(pop, split, EvalSplit::Test);
  const auto pop_item = split.train.find_item("pop").value();
  std::size_t checked = 0;
  for (std::size_t c = 0; c < split.test.size(); ++c) {
    if (split.test[c].item != pop_item) continue;
    EXPECT_EQ(ranks[c], 1u);
    ++checked;
  }
  EXPECT_EQ(checked, 5u);
}

TEST(Evaluate, MatchesIndependentCountingOracle) {
  const SplitSet split = synthetic_split(6);
  Model m = make_model(ModelSpec::convncf(Variant::SVDPP, 8, 2), split.train.num_users(), split.train.num_items(), 6,
                       NetInit::Random, 0.5);
  for (EvalSplit which : {EvalSplit::Validation, EvalSplit::Test}) {
    const auto& cases = which == EvalSplit::Test ? split.test : split.validation;
    const auto ranks = rank_users(m, split, which);
    ASSERT_EQ(ranks.size(), cases.size());
    for (std::size_t c = 0; c < cases.size(); ++c) {
      const UserId u = cases[c].user;
      // Histories: train items, plus the validation item when ranking the test item.
      std::vector<ItemId> history(split.train.items(u).begin(), split.train.items(u).end());
      if (which == EvalSplit::Test) {
        history.push_back(split.validation[c].item);
        std::sort(history.begin(), history.end());
      }
      const double target = predict(m, u, cases[c].item, history);
      std::size_t above = 0;
      for (ItemId j : split.eval_negatives[u]) above += predict(m, u, j, history) > target;
      EXPECT_EQ(ranks[c], above + 1);
    }
  }
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  const SplitSet split = synthetic_split(7);
  const Model m = make_model(ModelSpec::convncf(Variant::FISM, 8, 4), split.train.num_users(),
                             split.train.num_items(), 7, NetInit::Random, 0.5);
  const auto base = rank_users(m, split, EvalSplit::Test, 1);
  for (std::size_t t : {2u, 3u, 7u, 64u}) EXPECT_EQ(rank_users(m, split, EvalSplit::Test, t), base);
  EXPECT_EQ(evaluate(m, split, EvalSplit::Validation), evaluate(m, split, EvalSplit::Validation, kDefaultCutoffs, 4));
}

TEST(Evaluate, NonFiniteScoreNamesTheUser) {
  const SplitSet split = split_leave_latest_out(private_items_fixture(), 4, 10);
  Model m = make_model(ModelSpec::shallow(Variant::MF, 4), 5, split.train.num_items(), 1);
  (*m.tables.P)(2, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    evaluate(m, split, EvalSplit::Test);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("evaluating user u2"), std::string::npos) << e.what();
  }
}

TEST(ItemPop, CountsMatchFrequencyPass) {
  const SplitSet split = synthetic_split(8);
  const Vec scores = itempop_scores(split.train);
  std::vector<double> counts(split.train.num_items(), 0.0);
  for (const Interaction& x : split.train.interactions()) counts[x.item] += 1.0;
  EXPECT_EQ(scores.raw(), counts);
}

TEST(ItemPop, FilteredFixtureByHand) {
  // b appears once and is dropped; then u3 keeps a single interaction and is dropped.
  const Dataset d = test::dataset_from("u1\ta\t1\nu1\tc\t2\nu2\ta\t1\nu2\tc\t3\nu3\ta\t2\nu3\tb\t3\nu4\tz\t1\nu4\tc\t2\nu5\tz\t4\n");
  const Dataset f = filter(d, 2, 2);
  const Vec s = itempop_scores(f);
  EXPECT_EQ(s[f.find_item("a").value()], 2.0);
  EXPECT_EQ(s[f.find_item("c").value()], 3.0);
  EXPECT_EQ(s[f.find_item("z").value()], 1.0);
  EXPECT_FALSE(f.find_item("b").has_value());
  const Dataset lonely = test::dataset_from("u\ta\t1\nv\tb\t1\n");
  Dataset zero(lonely.user_ids(), {"a", "b", "c"}, {{{0, 1}}, {{1, 1}}});
  EXPECT_EQ(itempop_scores(zero)[2], 0.0);
}

TEST(RollingLast10, Examples) {
  EvalResult constant;
  constant.at[10] = {0.375, 0.25};
  const std::vector<EvalResult> flat(15, constant);
  EXPECT_EQ(rolling_last10(flat).at.at(10), (Metrics{0.375, 0.25}));
  EXPECT_EQ(rolling_last10(std::span(flat).first(1)).at.at(10), (Metrics{0.375, 0.25}));

  std::vector<EvalResult> ramp;
  for (int e = 1; e <= 12; ++e) {
    EvalResult r;
    r.at[10] = {e / 100.0, e / 200.0};
    ramp.push_back(r);
  }
  // Epochs 3..12 average to 7.5.
  const Metrics m = rolling_last10(ramp).at.at(10);
  EXPECT_NEAR(m.hr, 0.075, 1e-15);
  EXPECT_NEAR(m.ndcg, 0.0375, 1e-15);
  EXPECT_THROW(rolling_last10(std::span<const EvalResult>{}), std::invalid_argument);
}

TEST(Recommend, SkipsHistoryAndBreaksTiesByIndex) {
  const SplitSet split = synthetic_split(9);
  const Model pop = fit_itempop(split.train);
  const Vec& scores = std::get<PopularityHead>(pop.head).scores;
  for (UserId u = 0; u < 5; ++u) {
    const auto recs = recommend(pop, split, u, 7);
    ASSERT_EQ(recs.size(), 7u);
    const auto history = split.user_history(u, true);
    std::vector<ItemId> unseen;
    for (ItemId i = 0; i < split.train.num_items(); ++i)
      if (!std::binary_search(history.begin(), history.end(), i)) unseen.push_back(i);
    std::stable_sort(unseen.begin(), unseen.end(), [&](ItemId a, ItemId b) { return scores[a] > scores[b]; });
    for (std::size_t r = 0; r < 7; ++r) {
      EXPECT_EQ(recs[r].first, unseen[r]);
      EXPECT_EQ(recs[r].second, scores[unseen[r]]);
    }
  }
  EXPECT_THROW(recommend(pop, split, static_cast<UserId>(split.train.num_users()), 3), BoundsError);
}

}  // namespace
}  // namespace oncf
