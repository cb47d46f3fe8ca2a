#include <gtest/gtest.h>

#include <cmath>

#include "lgparse/binarize.hpp"
#include "lgparse/train.hpp"
#include "support/brute_force.hpp"
#include "support/synthetic.hpp"

using namespace lgparse;

namespace {
std::size_t internal_nodes(const Tree& t) {
  if (t.is_leaf()) return 0;
  std::size_t n = 1;
  for (const auto& c : t.children) n += internal_nodes(c);
  return n;
}
}  // namespace

TEST(Em, UnsplitGrammarIsFixedPoint) {
  const Treebank bin = binarize(lgtest::synthetic_treebank(60, 21));
  const Grammar g = extract_pcfg(bin, {1, true});
  auto [next, rec] = em_round(g, bin);
  ASSERT_EQ(next.params().size(), g.params().size());
  for (std::size_t i = 0; i < g.params().size(); ++i) EXPECT_NEAR(next.params()[i], g.params()[i], 1e-12);
  EXPECT_NEAR(rec.log_likelihood, treebank_loglik(g, bin), 1e-9);
}

TEST(Em, ExpectedCountsMatchEnumeration) {
  const Treebank bin = binarize(lgtest::synthetic_treebank(30, 5));
  const Grammar g = split_symbols(extract_pcfg(bin, {1, true}), 2, 0.3, 17);
  lgtest::LatentEnumerator en(g);
  int checked = 0;
  for (std::size_t i = 0; i < bin.size() && checked < 6; ++i) {
    if (internal_nodes(bin.trees[i]) > 13) continue;
    std::vector<double> counts(g.params().size(), 0.0);
    accumulate_tree(g, compile_tree(g, bin.trees[i], i), &counts, nullptr);
    const auto oracle = en.expected_counts(bin.trees[i]);
    for (std::size_t k = 0; k < counts.size(); ++k) EXPECT_NEAR(counts[k], oracle[k], 1e-9) << k;
    ++checked;
  }
  EXPECT_GE(checked, 3);
}

TEST(Em, LikelihoodNonDecreasingAndNormalized) {
  const Treebank bin = binarize(lgtest::synthetic_treebank(60, 9));
  Grammar g = split_symbols(extract_pcfg(bin, {3, true}), 2, 0.01, 3);
  double prev = -INFINITY;
  for (int it = 0; it < 6; ++it) {
    auto [next, rec] = em_round(g, bin);
    EXPECT_GE(rec.log_likelihood, prev - 1e-6) << it;
    EXPECT_LT(next.max_normalization_error(), 1e-9);
    prev = rec.log_likelihood;
    g = std::move(next);
  }
}

TEST(Em, IndependentOfWorkerCount) {
  const Treebank bin = binarize(lgtest::synthetic_treebank(50, 12));
  const Grammar g = split_symbols(extract_pcfg(bin, {1, true}), 2, 0.05, 1);
  auto [a, ra] = em_round(g, bin, 1);
  auto [b, rb] = em_round(g, bin, 4);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(ra.log_likelihood, rb.log_likelihood);
}

TEST(Train, ScheduleAndDeterminism) {
  const Treebank raw = lgtest::synthetic_treebank(40, 13);
  TrainConfig cfg;
  cfg.rounds = 2;
  cfg.em_iters = 3;
  cfg.seed = 7;
  std::vector<TrainingRecord> seen;
  auto [g, trace] = train_latent(raw, cfg, [&](const TrainingRecord& r) { seen.push_back(r); });
  ASSERT_EQ(trace.size(), 6u);
  ASSERT_EQ(seen.size(), 6u);
  EXPECT_EQ(trace[0].n_split_rounds, 1);
  EXPECT_EQ(trace[5].n_split_rounds, 2);
  EXPECT_EQ(g.n_split_rounds, 2);
  EXPECT_EQ(g.n_sub(g.symbol("NP")), 4);
  EXPECT_EQ(g.n_sub(g.start()), 1);
  EXPECT_LT(g.max_normalization_error(), 1e-9);
  auto [g2, trace2] = train_latent(raw, cfg);
  EXPECT_EQ(save_grammar(g), save_grammar(g2));
}

TEST(Train, ZeroRoundsIsPlainPcfg) {
  const Treebank raw = lgtest::synthetic_treebank(30, 14);
  TrainConfig cfg;
  cfg.rounds = 0;
  auto [g, trace] = train_latent(raw, cfg);
  EXPECT_TRUE(trace.empty());
  EXPECT_EQ(g.n_split_symbols(), g.n_symbols());
  EXPECT_EQ(save_grammar(g), save_grammar(extract_pcfg(binarize(raw), {cfg.rare_threshold, true})));
}

TEST(Train, UnderivableTree) {
  const Treebank bin = binarize(lgtest::synthetic_treebank(20, 1));
  const Grammar g = extract_pcfg(bin, {1, true});
  try {
    compile_tree(g, parse_tree("(XP (DET le))"));
    FAIL();
  } catch (const GrammarError& e) {
    EXPECT_EQ(e.kind(), GrammarErrorKind::UnderivableTree);
  }
}

TEST(Train, RejectsBadSchedule) {
  TrainConfig cfg;
  cfg.em_iters = 0;
  EXPECT_THROW(train_latent(lgtest::synthetic_treebank(5, 1), cfg), GrammarError);
}
