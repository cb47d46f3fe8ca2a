#include <gtest/gtest.h>

#include "lgparse/experiment.hpp"
#include "support/synthetic.hpp"

using namespace lgparse;

namespace {

TrainConfig small_training() {
  TrainConfig cfg;
  cfg.rounds = 1;
  cfg.em_iters = 2;
  cfg.seed = 3;
  return cfg;
}

XvalConfig two_folds() {
  XvalConfig x;
  x.p = 2;
  x.fold_seed = 11;
  return x;
}

StrategyConfig verb_hierarchy(int level) {
  StrategyConfig cfg;
  cfg.method = Method::Hierarchy;
  cfg.level = level;
  cfg.max_ambiguity = 1;
  cfg.target_tags = default_target_tags(Category::Verb);
  return cfg;
}

}  // namespace

TEST(Xval, BaselineMeansAreFoldMeans) {
  const Treebank tb = lgtest::synthetic_treebank(40, 77);
  const auto r = cross_validate(tb, {}, small_training(), two_folds());
  ASSERT_EQ(r.folds.size(), 2u);
  EXPECT_EQ(r.name, "Baseline");
  EXPECT_EQ(r.folds[0].n_test + r.folds[1].n_test, 40u);
  EXPECT_DOUBLE_EQ(r.mean_f, (r.folds[0].score.f1 + r.folds[1].score.f1) / 2);
  EXPECT_DOUBLE_EQ(r.mean_tagging, (r.folds[0].score.tagging_accuracy + r.folds[1].score.tagging_accuracy) / 2);
  EXPECT_GT(r.mean_f, 50.0);
  EXPECT_EQ(r.tagset_size, collect_tagset(tb).size());
  EXPECT_FALSE(r.gain_f.has_value());
}

TEST(Xval, FoldMatchesManualPipeline) {
  const Treebank tb = lgtest::synthetic_treebank(40, 78);
  const auto r = cross_validate(tb, {}, small_training(), two_folds());
  const FoldSplit split = split_folds(tb, 2, 11);
  const Treebank train = subset(tb, split.complement(1));
  const Treebank test = subset(tb, split.members(1));
  auto [g, trace] = train_latent(train, small_training());
  ParserOptions ro;
  ro.relax_unknown = true;
  const Parser strict(g), relaxed(g, ro);
  Treebank pred;
  for (const auto& t : test.trees) pred.trees.push_back(parse_with_fallback(strict, relaxed, tokens_of(t)).tree);
  const auto s = parseval(test, pred);
  EXPECT_EQ(r.folds[1].score.n_match, s.n_match);
  EXPECT_EQ(r.folds[1].score.n_pred, s.n_pred);
  EXPECT_DOUBLE_EQ(r.folds[1].score.f1, s.f1);
}

TEST(Xval, AnnotatedStrategyStripsBeforeScoring) {
  const Treebank tb = lgtest::synthetic_treebank(40, 79);
  const Lexicon lex = lgtest::synthetic_lexicon();
  const Hierarchy h = lgtest::synthetic_verb_hierarchy();
  const auto base = cross_validate(tb, {}, small_training(), two_folds());
  const auto r =
      cross_validate(tb, {{verb_hierarchy(3), &lex, &h}}, small_training(), two_folds(), &base);
  EXPECT_EQ(r.name, "AnnotHierarchy");
  EXPECT_EQ(r.level_amb_label(), "3/1");
  EXPECT_GT(r.tagset_size, base.tagset_size);
  ASSERT_EQ(r.coverage.size(), 1u);
  EXPECT_GT(r.coverage[0].pct_annotated, 0.0);
  ASSERT_TRUE(r.gain_f.has_value());
  EXPECT_DOUBLE_EQ(*r.gain_f, r.mean_f - base.mean_f);
  ASSERT_EQ(r.gain_f_per_fold.size(), 2u);
  EXPECT_DOUBLE_EQ(r.gain_f_per_fold[0], r.folds[0].score.f1 - base.folds[0].score.f1);
  EXPECT_NEAR((r.gain_f_per_fold[0] + r.gain_f_per_fold[1]) / 2, *r.gain_f, 1e-12);
}

TEST(Xval, NoMatchStrategyEqualsBaseline) {
  const Treebank tb = lgtest::synthetic_treebank(40, 80);
  const Lexicon lex = lgtest::disjoint_lexicon();
  const Hierarchy h = lgtest::synthetic_verb_hierarchy();
  const auto base = cross_validate(tb, {}, small_training(), two_folds());
  const auto r = cross_validate(tb, {{verb_hierarchy(3), &lex, &h}}, small_training(), two_folds(), &base);
  EXPECT_EQ(r.mean_f, base.mean_f);
  EXPECT_EQ(r.mean_tagging, base.mean_tagging);
  EXPECT_EQ(r.tagset_size, base.tagset_size);
  EXPECT_EQ(r.coverage[0].pct_annotated, 0.0);
  EXPECT_EQ(*r.gain_f, 0.0);
}

TEST(Xval, DeterministicAndJobIndependent) {
  const Treebank tb = lgtest::synthetic_treebank(30, 81);
  XvalConfig x = two_folds();
  const auto a = cross_validate(tb, {}, small_training(), x);
  const auto b = cross_validate(tb, {}, small_training(), x);
  x.jobs = 3;
  const auto c = cross_validate(tb, {}, small_training(), x);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(to_json(a).dump(), to_json(c).dump());
}

TEST(Xval, ReportFormats) {
  const Treebank tb = lgtest::synthetic_treebank(30, 82);
  const auto r = cross_validate(tb, {}, small_training(), two_folds());
  const std::string text = format_report(r);
  for (const char* col : {"Method", "Lvl/Amb", "Tagset", "%Annot", "F/Tagging", "Gain", "max_len=40 (inclusive)",
                          "rounds=1", "h_markov=2", "v_markov=1", "fold_seed=11"})
    EXPECT_NE(text.find(col), std::string::npos) << col;
  const auto back = report_from_json(to_json(r));
  EXPECT_EQ(back.folds.size(), r.folds.size());
  EXPECT_DOUBLE_EQ(back.mean_f, r.mean_f);
  EXPECT_DOUBLE_EQ(back.mean_tagging, r.mean_tagging);
  EXPECT_EQ(back.folds[1].score.n_match, r.folds[1].score.n_match);
}

TEST(Xval, InvalidFoldCount) {
  const Treebank tb = lgtest::synthetic_treebank(5, 1);
  XvalConfig x;
  x.p = 1;
  EXPECT_THROW(cross_validate(tb, {}, small_training(), x), FoldError);
  x.p = 6;
  EXPECT_THROW(cross_validate(tb, {}, small_training(), x), FoldError);
}
