#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kcgn/error.hpp"
#include "kcgn/evaluation.hpp"

namespace kcgn {
namespace {

TEST(Split, ThreeEvents) {
  std::vector<InteractionRecord> r = {{0, 4, 0, 1}, {0, 5, 1, 2}, {0, 6, 0, 3}};
  auto s = leave_one_out_split(r, 1, 8, 2);
  ASSERT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.train[0].item, 4u);
  EXPECT_EQ(s.validation[0]->item, 5u);
  EXPECT_EQ(s.validation[0]->type, 1u);
  EXPECT_EQ(s.test[0]->item, 6u);
  EXPECT_EQ(s.interacted[0], (std::vector<std::uint32_t>{4, 5, 6}));
}

TEST(Split, TwoEventsHaveNoValidation) {
  std::vector<InteractionRecord> r = {{0, 1, 0, 10}, {0, 2, 0, 20}};
  auto s = leave_one_out_split(r, 1, 3, 1);
  ASSERT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.train[0].timestamp, 10);
  EXPECT_EQ(s.test[0]->item, 2u);
  EXPECT_FALSE(s.validation[0]);
}

TEST(Split, SingleEventIsTrainOnlyAndAllSingleCannotEvaluate) {
  std::vector<InteractionRecord> r = {{0, 1, 0, 10}, {1, 2, 0, 20}};
  auto s = leave_one_out_split(r, 2, 3, 1);
  EXPECT_EQ(s.train_only_users, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(s.train.size(), 2u);
  EXPECT_EQ(s.test_user_count(), 0u);
  Embeddings e{Tensor(2, 2, 0.1), Tensor(3, 2, 0.1)};
  EXPECT_THROW(evaluate(e, s, {}), EvaluationError);
}

TEST(Split, EveryEventOnHeldOutItemLeavesTraining) {
  std::vector<InteractionRecord> r = {
      {0, 7, 0, 1}, {0, 1, 0, 2}, {0, 2, 0, 3}, {0, 7, 1, 4}, {0, 3, 1, 5}, {0, 2, 1, 6}};
  auto s = leave_one_out_split(r, 1, 8, 2);
  EXPECT_EQ(s.test[0]->item, 2u);
  EXPECT_EQ(s.validation[0]->item, 3u);
  for (const auto& t : s.train) {
    EXPECT_NE(t.item, 2u);
    EXPECT_NE(t.item, 3u);
  }
  EXPECT_EQ(s.train.size(), 3u);
  EXPECT_EQ(s.train_count[0], 3u);
}

TEST(Split, EqualTimestampsFavourLaterInput) {
  std::vector<InteractionRecord> r = {{0, 1, 0, 5}, {0, 2, 0, 5}, {0, 3, 0, 5}};
  auto s = leave_one_out_split(r, 1, 4, 1);
  EXPECT_EQ(s.test[0]->item, 3u);
  EXPECT_EQ(s.validation[0]->item, 2u);
}

TEST(Negatives, DistinctAndUninteracted) {
  std::vector<std::uint32_t> seen = {0, 17, 40, 41, 199};
  Rng rng(1);
  auto n = sample_eval_negatives(seen, 200, rng);
  EXPECT_EQ(n.items.size(), 99u);
  EXPECT_FALSE(n.short_of_candidates());
  std::set<std::uint32_t> s(n.items.begin(), n.items.end());
  EXPECT_EQ(s.size(), 99u);
  for (auto x : seen) EXPECT_EQ(s.count(x), 0u);
  Rng a(7), b(7);
  EXPECT_EQ(sample_eval_negatives(seen, 200, a).items, sample_eval_negatives(seen, 200, b).items);
}

TEST(Negatives, ShortPoolReturnsEverythingWithFlag) {
  std::vector<std::uint32_t> seen;
  for (std::uint32_t i = 0; i < 10; ++i) seen.push_back(i * 3);
  Rng rng(2);
  auto n = sample_eval_negatives(seen, 100, rng);
  EXPECT_EQ(n.items.size(), 90u);
  EXPECT_TRUE(n.short_of_candidates());
}

TEST(Negatives, UniformOverPool) {
  std::vector<std::uint32_t> seen = {0};
  const std::size_t trials = 3000;
  std::vector<std::size_t> hits(120, 0);
  Rng rng(3);
  for (std::size_t t = 0; t < trials; ++t)
    for (auto x : sample_eval_negatives(seen, 120, rng, 10).items) ++hits[x];
  EXPECT_EQ(hits[0], 0u);
  const double p = 10.0 / 119.0, mean = trials * p, sigma = std::sqrt(trials * p * (1 - p));
  for (std::size_t i = 1; i < 120; ++i) EXPECT_LE(std::abs(hits[i] - mean), 4 * sigma) << i;
}

TEST(RankOf, Examples) {
  std::vector<double> top = {0.9, 0.1, 0.5};
  EXPECT_EQ(rank_of(0, top), 1u);
  std::vector<double> tie = {0.5, 0.1, 0.5};
  EXPECT_EQ(rank_of(0, tie), 2u);
  std::vector<double> low(100);
  for (std::size_t i = 0; i < 100; ++i) low[i] = static_cast<double>(i);
  EXPECT_EQ(rank_of(0, low), 100u);
  std::vector<double> flat(100, 1.0);
  EXPECT_EQ(rank_of(0, flat), 100u);  // constant model ranks last
}

TEST(RankOf, CandidateOrderIrrelevant) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(100);
    for (double& v : s) v = std::round(rng.uniform(0, 20));  // plenty of ties
    const std::size_t r = rank_of(0, s);
    auto perm = rng.permutation(100);
    std::vector<double> p(100);
    std::size_t where = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      p[i] = s[perm[i]];
      if (perm[i] == 0) where = i;
    }
    EXPECT_EQ(rank_of(where, p), r);
  }
}

TEST(HitMetrics, Examples) {
  std::vector<std::size_t> one = {1}, three = {3}, eleven = {11};
  auto a = hr_ndcg_at_n(one, 10), b = hr_ndcg_at_n(three, 10), c = hr_ndcg_at_n(eleven, 10);
  EXPECT_EQ(a.hit_ratio, 1.0);
  EXPECT_EQ(a.ndcg, 1.0);
  EXPECT_EQ(b.hit_ratio, 1.0);
  EXPECT_EQ(b.ndcg, 0.5);
  EXPECT_EQ(c.hit_ratio, 0.0);
  EXPECT_EQ(c.ndcg, 0.0);
  EXPECT_THROW(hr_ndcg_at_n({}, 10), EvaluationError);
}

TEST(HitMetrics, MonotoneInNAndNdcgBelowHr) {
  Rng rng(5);
  std::vector<std::size_t> ranks(300);
  for (auto& r : ranks) r = 1 + rng.below(100);
  HitMetrics prev{};
  for (std::size_t n = 1; n <= 100; ++n) {
    auto m = hr_ndcg_at_n(ranks, n);
    EXPECT_GE(m.hit_ratio, prev.hit_ratio);
    EXPECT_GE(m.ndcg, prev.ndcg);
    EXPECT_LE(m.ndcg, m.hit_ratio);
    EXPECT_LE(m.hit_ratio, 1.0);
    prev = m;
  }
  EXPECT_EQ(prev.hit_ratio, 1.0);
}

TEST(Buckets, HundredUsersSplitEvenly) {
  std::vector<std::size_t> counts(100);
  for (std::size_t i = 0; i < 100; ++i) counts[i] = (i * 37) % 100 + 1;
  auto b = sparsity_buckets(counts);
  std::array<std::size_t, 4> sizes{};
  for (std::size_t i = 0; i < 100; ++i) {
    ++sizes[b[i]];
    EXPECT_EQ(b[i], (counts[i] - 1) / 25);
  }
  EXPECT_EQ(sizes, (std::array<std::size_t, 4>{25, 25, 25, 25}));
}

TEST(Buckets, TiesGoToLowerBucket) {
  std::vector<std::size_t> same(40, 5);
  for (auto b : sparsity_buckets(same)) EXPECT_EQ(b, 0u);
  std::vector<std::size_t> counts = {1, 1, 2, 2, 2, 2, 3, 4};
  auto b = sparsity_buckets(counts);
  EXPECT_TRUE(std::is_sorted(b.begin(), b.end()));
  EXPECT_EQ(b[2], b[5]);  // equal counts share a bucket
}

// Metrics straight from raw scores, independent of Evaluator.
TEST(Evaluator, MatchesBruteForceRecomputation) {
  RandomOptions ro;
  ro.users = 50;
  ro.items = 160;
  ro.seed = 9;
  auto ds = random_dataset(ro);
  auto split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  Rng rng(10);
  Embeddings e{Tensor(ds.users, 6), Tensor(ds.items, 6)};
  for (double& v : e.users.values()) v = rng.uniform(-1, 1);
  for (double& v : e.items.values()) v = rng.uniform(-1, 1);
  EvalOptions o;
  o.seed = 3;
  Evaluator ev(split, o);
  auto report = ev.evaluate(e);

  double hr = 0, ndcg = 0;
  for (std::size_t k = 0; k < ev.user_count(); ++k) {
    const auto& cands = ev.candidates(k);
    const std::uint32_t user = ev.rank_users(e)[k].user;
    EXPECT_EQ(cands[0], split.test[user]->item);
    const double target = e.score(user, cands[0]);
    std::size_t above = 0;
    for (std::size_t c = 1; c < cands.size(); ++c) above += e.score(user, cands[c]) >= target;
    const std::size_t rank = above + 1;
    if (rank <= 10) {
      hr += 1;
      ndcg += 1.0 / std::log2(rank + 1.0);
    }
  }
  const double n = static_cast<double>(ev.user_count());
  EXPECT_EQ(report.overall.users, ev.user_count());
  EXPECT_NEAR(report.overall.hit_ratio, hr / n, 1e-12);
  EXPECT_NEAR(report.overall.ndcg, ndcg / n, 1e-12);
  std::size_t bucketed = 0;
  for (const auto& b : report.buckets) bucketed += b.users;
  EXPECT_EQ(bucketed, report.overall.users);
}

TEST(Evaluator, ThreadsDoNotChangeResults) {
  auto ds = random_dataset({});
  auto split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  Rng rng(11);
  Embeddings e{Tensor(ds.users, 4), Tensor(ds.items, 4)};
  for (double& v : e.users.values()) v = rng.uniform(-1, 1);
  for (double& v : e.items.values()) v = rng.uniform(-1, 1);
  EvalOptions one, many;
  many.threads = 4;
  auto a = evaluate(e, split, one), b = evaluate(e, split, many);
  EXPECT_EQ(a.overall.hit_ratio, b.overall.hit_ratio);
  EXPECT_EQ(a.overall.ndcg, b.overall.ndcg);
  EXPECT_EQ(format_report_table(a), format_report_table(b));
}

TEST(Evaluator, RandomScoresNearTenPercent) {
  RandomOptions ro;
  ro.users = 800;
  ro.items = 400;
  auto ds = random_dataset(ro);
  auto split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  Rng rng(12);
  Embeddings e{Tensor(ds.users, 8), Tensor(ds.items, 8)};
  for (double& v : e.users.values()) v = rng.uniform(-1, 1);
  for (double& v : e.items.values()) v = rng.uniform(-1, 1);
  auto r = evaluate(e, split, {});
  // hit probability 10/100 per user; 3 sigma over ~800 users is about 0.032
  EXPECT_NEAR(r.overall.hit_ratio, 0.10, 0.04);
}

TEST(Evaluator, TargetTypeRestrictsUsers) {
  auto ds = random_dataset({});
  auto split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  Embeddings e{Tensor(ds.users, 2, 0.5), Tensor(ds.items, 2, 0.5)};
  EvalOptions o;
  o.target_type = 1;
  auto r = evaluate(e, split, o);
  std::size_t expect = 0;
  for (const auto& t : split.test) expect += t && t->type == 1;
  EXPECT_EQ(r.overall.users, expect);
  EXPECT_EQ(r.per_type.size(), 1u);
  EXPECT_EQ(r.per_type.at(1).users, expect);
  EXPECT_EQ(r.overall.hit_ratio, 0.0);  // constant scores rank last

  o.split = HeldOutSplit::Validation;
  o.target_type.reset();
  EXPECT_EQ(evaluate(e, split, o).overall.users, split.validation_user_count());
}

TEST(Evaluator, ValidationAndTestUseIndependentNegatives) {
  auto ds = random_dataset({});
  auto split = leave_one_out_split(ds.records, ds.users, ds.items, ds.types);
  EvalOptions t, v;
  v.split = HeldOutSplit::Validation;
  Evaluator et(split, t), evv(split, v);
  EXPECT_NE(et.candidates(0), evv.candidates(0));
  Evaluator again(split, t);
  EXPECT_EQ(et.candidates(5), again.candidates(5));
}

TEST(Report, TextAndTable) {
  EvalReport r;
  r.overall = {0.5, 0.25, 4};
  r.per_type[0] = {1.0, 1.0, 1};
  const std::vector<std::string> names = {"click"};
  const std::string text = format_report_text(r, names);
  EXPECT_NE(text.find("hr@10 = 0.500000"), std::string::npos);
  EXPECT_NE(text.find("type.click.users = 1"), std::string::npos);
  const std::string table = format_report_table(r, names);
  EXPECT_NE(table.find('\t'), std::string::npos);
  EXPECT_NE(table.find("click"), std::string::npos);
}

}  // namespace
}  // namespace kcgn
