#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brute_metrics.hpp"
#include "dua/error.hpp"
#include "dua/evaluate.hpp"
#include "dua/metrics.hpp"
#include "dua/rng.hpp"
#include "fixtures.hpp"

namespace {

using namespace dua;
using eval::RankedGroup;

RankedGroup group(std::vector<double> scores, std::vector<int> labels) {
  RankedGroup g;
  g.scores = std::move(scores);
  g.labels = std::move(labels);
  return g;
}

// Group of n with positives at the given 1-based ranks.
RankedGroup at_ranks(std::size_t n, std::vector<std::size_t> ranks) {
  RankedGroup g;
  for (std::size_t i = 0; i < n; ++i) {
    g.scores.push_back(static_cast<double>(n - i));
    g.labels.push_back(std::find(ranks.begin(), ranks.end(), i + 1) != ranks.end());
  }
  return g;
}

TEST(Rank, Examples) {
  EXPECT_EQ(eval::rank_group(group({0.1, 0.9, 0.5}, {0, 0, 0})), (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(eval::rank_group(group({2, 2, 2, 2}, {0, 1, 0, 0})), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(eval::rank_group(group({0.1, std::nan("")}, {0, 1})), ContractError);
  EXPECT_THROW(eval::rank_group(group({}, {})), ContractError);
}

TEST(Rank, MatchesExhaustiveSortingOracle) {
  for (const auto& g : brute::random_groups(1, 500)) {
    const auto order = eval::rank_group(g);
    const auto ranks = brute::ranks(g.scores);
    for (std::size_t r = 0; r < order.size(); ++r) EXPECT_EQ(ranks[order[r]], r + 1);
  }
}

TEST(Metrics, Examples) {
  EXPECT_EQ(eval::recall_at_k(at_ranks(10, {1}), 1), 1.0);
  EXPECT_EQ(eval::recall_at_k(at_ranks(10, {3}), 2), 0.0);
  EXPECT_EQ(eval::recall_at_k(at_ranks(10, {3}), 5), 1.0);
  EXPECT_EQ(eval::recall_at_k(at_ranks(10, {2, 6}), 5), 0.5);
  const auto top = at_ranks(10, {1});
  EXPECT_EQ(eval::average_precision(top), 1.0);
  EXPECT_EQ(eval::reciprocal_rank(top), 1.0);
  EXPECT_EQ(eval::precision_at_1(top), 1.0);
  EXPECT_EQ(eval::reciprocal_rank(at_ranks(10, {4})), 0.25);
  EXPECT_NEAR(*eval::average_precision(at_ranks(10, {1, 3})), (1.0 + 2.0 / 3.0) / 2, 1e-15);
}

TEST(Metrics, NoPositiveIsSkipped) {
  const auto g = at_ranks(5, {});
  EXPECT_FALSE(eval::recall_at_k(g, 1));
  EXPECT_FALSE(eval::average_precision(g));
  EXPECT_FALSE(eval::reciprocal_rank(g));
  EXPECT_FALSE(eval::precision_at_1(g));
  EXPECT_THROW(eval::recall_at_k(g, 6), ContractError);
  EXPECT_THROW(eval::recall_at_k(g, 0), ContractError);
}

TEST(Metrics, MatchBruteForceOnRandomGroups) {
  const auto groups = brute::random_groups(2, 1000);
  std::size_t multi = 0, none = 0;
  for (const auto& g : groups) {
    multi += g.positives() > 1;
    none += g.positives() == 0;
    for (std::size_t k = 1; k <= g.size(); ++k)
      EXPECT_EQ(eval::recall_at_k(g, k), brute::recall(g.scores, g.labels, k));
    EXPECT_EQ(eval::average_precision(g), brute::ap(g.scores, g.labels));
    EXPECT_EQ(eval::reciprocal_rank(g), brute::rr(g.scores, g.labels));
    EXPECT_EQ(eval::precision_at_1(g), brute::p_at_1(g.scores, g.labels));
  }
  EXPECT_GT(multi, 100u);
  EXPECT_GT(none, 100u);
}

TEST(Metrics, SummaryMatchesBruteForceMeans) {
  const auto groups = brute::random_groups(3, 1000);
  const auto report = eval::summarize(groups);
  double map = 0, mrr = 0, p1 = 0, r1 = 0, r2 = 0, r5 = 0;
  std::size_t scored = 0;
  for (const auto& g : groups) {
    const auto ap = brute::ap(g.scores, g.labels);
    if (!ap) continue;
    ++scored;
    const std::size_t n = g.size();
    map += *ap;
    mrr += *brute::rr(g.scores, g.labels);
    p1 += *brute::p_at_1(g.scores, g.labels);
    r1 += *brute::recall(g.scores, g.labels, std::min<std::size_t>(1, n));
    r2 += *brute::recall(g.scores, g.labels, std::min<std::size_t>(2, n));
    r5 += *brute::recall(g.scores, g.labels, std::min<std::size_t>(5, n));
  }
  const double d = static_cast<double>(scored);
  EXPECT_EQ(report.map, map / d);
  EXPECT_EQ(report.mrr, mrr / d);
  EXPECT_EQ(report.p_at_1, p1 / d);
  EXPECT_EQ(report.r_at_1, r1 / d);
  EXPECT_EQ(report.r_at_2, r2 / d);
  EXPECT_EQ(report.r_at_5, r5 / d);
  EXPECT_EQ(report.total_groups, groups.size());
  EXPECT_EQ(report.scored_groups, scored);
  EXPECT_EQ(report.total_groups, report.scored_groups + report.skipped_groups);
}

TEST(Metrics, RecallIsMonotoneInK) {
  for (const auto& g : brute::random_groups(4, 300)) {
    if (g.positives() == 0) continue;
    double prev = 0;
    for (std::size_t k = 1; k <= g.size(); ++k) {
      const double r = *eval::recall_at_k(g, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
    EXPECT_EQ(prev, 1.0);
  }
  const auto report = eval::summarize(brute::random_groups(5, 300));
  EXPECT_LE(report.r_at_1, report.r_at_2);
  EXPECT_LE(report.r_at_2, report.r_at_5);
  for (double m : {report.map, report.mrr, report.p_at_1, report.r_at_1, report.r_at_5}) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
}

TEST(Metrics, InvariantUnderIncreasingTransforms) {
  auto groups = brute::random_groups(6, 500);
  const auto base = eval::summarize(groups);
  for (auto transform : {+[](double x) { return std::exp(x); }, +[](double x) { return 3 * x - 7; },
                         +[](double x) { return std::atan(x) + x * x * x; }}) {
    auto moved = groups;
    for (auto& g : moved)
      for (double& s : g.scores) s = transform(s);
    const auto r = eval::summarize(moved);
    EXPECT_EQ(r.map, base.map);
    EXPECT_EQ(r.mrr, base.mrr);
    EXPECT_EQ(r.p_at_1, base.p_at_1);
    EXPECT_EQ(r.r_at_1, base.r_at_1);
    EXPECT_EQ(r.r_at_2, base.r_at_2);
    EXPECT_EQ(r.r_at_5, base.r_at_5);
  }
}

TEST(Metrics, PerfectScorerGetsOne) {
  std::vector<RankedGroup> groups;
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    RankedGroup g;
    for (int c = 0; c < 10; ++c) {
      const int label = c == 3 || (i % 4 == 0 && c == 7);
      g.labels.push_back(label);
      g.scores.push_back(label ? 1 + rng.uniform() : rng.uniform());
    }
    groups.push_back(g);
  }
  const auto r = eval::summarize(groups);
  for (const char* m : {"MAP", "MRR", "P@1", "R@1", "R@2", "R@5"}) {
    // Two positives cannot both be within the top 1.
    if (std::string(m) == "R@1") continue;
    EXPECT_EQ(r.metric(m), 1.0) << m;
  }
  EXPECT_EQ(r.p_at_1, 1.0);
}

TEST(Metrics, RandomScoresGiveChanceRecall) {
  Rng rng(8);
  std::vector<RankedGroup> groups(10000);
  for (auto& g : groups) {
    const std::size_t pos = rng.below(10);
    for (std::size_t c = 0; c < 10; ++c) {
      g.scores.push_back(rng.uniform());
      g.labels.push_back(c == pos);
    }
  }
  EXPECT_NEAR(eval::summarize(groups).r_at_1, 0.1, 0.03);
}

TEST(Metrics, ClampsKToGroupSize) {
  const auto r = eval::summarize({at_ranks(2, {2})});
  EXPECT_EQ(r.group_size, 2u);
  EXPECT_EQ(r.r_at_1, 0.0);
  EXPECT_EQ(r.r_at_2, 1.0);
  EXPECT_EQ(r.r_at_5, 1.0);
}

TEST(Report, CategoriesAndFormats) {
  auto a = at_ranks(3, {1});
  a.category = "chat";
  auto b = at_ranks(3, {3});
  b.category = "order";
  auto c = at_ranks(3, {});
  c.category = "order";
  const auto r = eval::summarize({a, b, c});
  EXPECT_EQ(r.skipped_groups, 1u);
  ASSERT_EQ(r.per_category.size(), 2u);
  EXPECT_EQ(r.per_category.at("chat").r_at_1, 1.0);
  EXPECT_EQ(r.per_category.at("order").r_at_1, 0.0);
  EXPECT_EQ(r.per_category.at("order").skipped_groups, 1u);
  const std::string kv = r.key_values();
  EXPECT_NE(kv.find("MAP="), std::string::npos);
  EXPECT_NE(kv.find("R3@1=0.500000"), std::string::npos) << kv;
  EXPECT_NE(kv.find("category.chat.R3@1=1.000000"), std::string::npos) << kv;
  EXPECT_NE(kv.find("groups_skipped=1"), std::string::npos);
  EXPECT_NE(r.table().find("R3@5"), std::string::npos);
  EXPECT_THROW(r.metric("NDCG"), ContractError);
  EXPECT_TRUE(eval::is_metric_name("R@2"));
  EXPECT_FALSE(eval::is_metric_name("R@3"));
}

// ---- grouping and model evaluation

TEST(Grouping, ConsecutiveGroups) {
  std::vector<double> scores{1, 2, 3, 4, 5, 6};
  std::vector<int> labels{1, 0, 0, 0, 1, 0};
  std::vector<std::string> cats(6);
  const auto groups = eval::group_scores(scores, labels, cats, 3);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[1].scores, (std::vector<double>{4, 5, 6}));
  EXPECT_EQ(groups[1].labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(groups[1].context_id, 1u);
  EXPECT_THROW(eval::group_scores(scores, labels, cats, 4), ContractError);
}

TEST(Grouping, SharedContextRequired) {
  std::vector<data::RawDialogue> d{{1, {"a"}, "x", ""}, {0, {"a"}, "y", ""}, {1, {"b"}, "x", ""},
                                   {0, {"c"}, "y", ""}};
  EXPECT_THROW(eval::check_shared_context(std::span<const data::RawDialogue>(d), 2), ContractError);
  d[3].context = {"b"};
  EXPECT_NO_THROW(eval::check_shared_context(std::span<const data::RawDialogue>(d), 2));
}

TEST(Evaluate, ModelScoresAreThreadIndependentAndConsistent) {
  model::DuaConfig c = dua::testing::tiny_config();
  const ParamMap p = model::init_params(c);
  Rng rng(9);
  std::vector<EncodedSample> samples;
  for (int g = 0; g < 12; ++g) {
    const EncodedSample ctx = dua::testing::random_sample(rng, c, {3, 4}, 2);
    for (int k = 0; k < 5; ++k) {
      EncodedSample s = dua::testing::random_sample(rng, c, {3, 4}, 1 + rng.below(5), k == 0);
      s.utterance_ids = ctx.utterance_ids;
      samples.push_back(s);
    }
  }
  const auto one = eval::score_samples(c, p, samples, 1);
  const auto four = eval::score_samples(c, p, samples, 4);
  EXPECT_EQ(one, four);
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(one[i], model::score(c, p, samples[i]).score);

  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  std::vector<std::string> cats(samples.size());
  const auto want = eval::summarize(eval::group_scores(one, labels, cats, 5));
  const auto got = eval::evaluate_model(c, p, samples, 5, 3);
  EXPECT_EQ(got.map, want.map);
  EXPECT_EQ(got.r_at_1, want.r_at_1);
  EXPECT_EQ(got.total_groups, 12u);
  EXPECT_THROW(eval::evaluate_model(c, p, samples, 7), ContractError);
}

}  // namespace
