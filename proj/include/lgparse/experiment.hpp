#pragma once

// p-fold cross-validation driver and its report.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lgparse/annotate.hpp"
#include "lgparse/folds.hpp"
#include "lgparse/parser.hpp"
#include "lgparse/parseval.hpp"
#include "lgparse/train.hpp"

namespace lgparse {

struct XvalConfig {
  int p = 10;
  /// Negative: contiguous folds in corpus order.
  std::int64_t fold_seed = 0;
  EvalOptions eval;
  ParserOptions parser;
  int jobs = 1;
};

struct FoldResult {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ParsevalScore score;
  std::size_t n_relaxed = 0;
  std::size_t n_fallback = 0;
  double final_log_likelihood = 0.0;
};

struct ExperimentReport {
  std::string name = "Baseline";
  std::vector<StrategyConfig> strategies;
  TrainConfig train;
  XvalConfig xval;
  std::size_t n_trees = 0;
  std::size_t tagset_size = 0;
  std::vector<CoverageReport> coverage;
  std::vector<FoldResult> folds;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f = 0.0;
  double mean_tagging = 0.0;
  std::size_t n_relaxed = 0;
  std::size_t n_fallback = 0;

  std::optional<double> gain_f;
  std::optional<double> gain_tagging;
  /// Per-fold F differences, present when the baseline has the same folds.
  std::vector<double> gain_f_per_fold;
  std::vector<double> gain_tagging_per_fold;

  std::string level_amb_label() const {
    if (strategies.empty()) return "-/-";
    std::string s;
    for (std::size_t i = 0; i < strategies.size(); ++i) s += (i ? "+" : "") + strategies[i].level_amb_label();
    return s;
  }
};

/// Fills the mean fields from `folds`.
inline void aggregate(ExperimentReport& r) {
  r.mean_precision = r.mean_recall = r.mean_f = r.mean_tagging = 0.0;
  r.n_relaxed = r.n_fallback = 0;
  if (r.folds.empty()) return;
  for (const auto& f : r.folds) {
    r.mean_precision += f.score.precision;
    r.mean_recall += f.score.recall;
    r.mean_f += f.score.f1;
    r.mean_tagging += f.score.tagging_accuracy;
    r.n_relaxed += f.n_relaxed;
    r.n_fallback += f.n_fallback;
  }
  const double k = static_cast<double>(r.folds.size());
  r.mean_precision /= k;
  r.mean_recall /= k;
  r.mean_f /= k;
  r.mean_tagging /= k;
}

inline void apply_baseline(ExperimentReport& r, const ExperimentReport& base) {
  r.gain_f = r.mean_f - base.mean_f;
  r.gain_tagging = r.mean_tagging - base.mean_tagging;
  r.gain_f_per_fold.clear();
  r.gain_tagging_per_fold.clear();
  if (base.folds.size() != r.folds.size()) return;
  for (std::size_t k = 0; k < r.folds.size(); ++k) {
    r.gain_f_per_fold.push_back(r.folds[k].score.f1 - base.folds[k].score.f1);
    r.gain_tagging_per_fold.push_back(r.folds[k].score.tagging_accuracy - base.folds[k].score.tagging_accuracy);
  }
}

inline std::string report_name(const std::vector<AnnotationStep>& steps) {
  if (steps.empty()) return "Baseline";
  if (steps.size() > 1) return "Combination";
  return std::string(method_display_name(steps.front().config.method));
}

/// One fold: train on the complement, parse the members with gold tokens,
/// strip the refinements and score against the unannotated gold.
inline FoldResult run_fold(const Treebank& gold, const Treebank& annotated, const FoldSplit& split, int k,
                           const std::set<std::string>& targets, const TrainConfig& train_cfg,
                           const XvalConfig& cfg) {
  const auto test_idx = split.members(k);
  const Treebank train = subset(annotated, split.complement(k));
  const Treebank test_gold = subset(gold, test_idx);

  TrainConfig tc = train_cfg;
  tc.jobs = cfg.jobs;
  auto [g, trace] = train_latent(train, tc);

  ParserOptions strict_opt = cfg.parser;
  strict_opt.relax_unknown = false;
  ParserOptions relaxed_opt = cfg.parser;
  relaxed_opt.relax_unknown = true;
  const Parser strict(g, strict_opt);
  const Parser relaxed(g, relaxed_opt);

  std::vector<ParseOutcome> outcomes(test_gold.size());
  detail::run_chunks(test_gold.size(), cfg.jobs, [&](std::size_t i) {
    outcomes[i] = parse_with_fallback(strict, relaxed, tokens_of(test_gold.trees[i]));
  });

  Treebank pred;
  pred.id = test_gold.id;
  FoldResult fr;
  fr.fold = k;
  fr.n_train = train.size();
  fr.n_test = test_gold.size();
  fr.final_log_likelihood = trace.empty() ? 0.0 : trace.back().log_likelihood;
  for (auto& o : outcomes) {
    if (o.status == ParseStatus::Relaxed) ++fr.n_relaxed;
    if (o.status == ParseStatus::Fallback) ++fr.n_fallback;
    pred.trees.push_back(targets.empty() ? std::move(o.tree) : strip(o.tree, targets));
  }
  fr.score = parseval(test_gold, pred, cfg.eval);
  return fr;
}

/// An empty `steps` list is the baseline.
inline ExperimentReport cross_validate(const Treebank& tb, const std::vector<AnnotationStep>& steps,
                                       const TrainConfig& train_cfg, const XvalConfig& cfg,
                                       const ExperimentReport* baseline = nullptr) {
  const FoldSplit split = split_folds(tb, cfg.p, cfg.fold_seed);

  ExperimentReport r;
  r.name = report_name(steps);
  r.train = train_cfg;
  r.xval = cfg;
  r.n_trees = tb.size();
  for (const auto& s : steps) r.strategies.push_back(s.config);

  check_disjoint_targets(steps);
  Treebank annotated = tb;
  for (const auto& s : steps) {
    Treebank next = annotate(annotated, s);
    r.coverage.push_back(coverage(annotated, next, s.config.target_tags));
    annotated = std::move(next);
  }
  r.tagset_size = collect_tagset(annotated).size();
  const auto targets = union_targets(steps);

  for (int k = 0; k < cfg.p; ++k) r.folds.push_back(run_fold(tb, annotated, split, k, targets, train_cfg, cfg));
  aggregate(r);
  if (baseline) apply_baseline(r, *baseline);
  return r;
}

// ---------------------------------------------------------------------------
// Text report

namespace detail {

inline std::string fixed2(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << x;
  return os.str();
}

inline std::string signed2(double x) {
  return (x >= 0 ? "+" : "") + fixed2(x);
}

inline std::string coverage_cell(const ExperimentReport& r) {
  if (r.coverage.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < r.coverage.size(); ++i) s += (i ? "+" : "") + fixed2(r.coverage[i].pct_annotated);
  return s;
}

}  // namespace detail

inline std::string report_header_row() {
  std::ostringstream os;
  os << std::left << std::setw(18) << "Method" << std::setw(10) << "Lvl/Amb" << std::setw(8) << "Tagset"
     << std::setw(14) << "%Annot" << std::setw(14) << "F/Tagging" << "Gain";
  return os.str();
}

inline std::string report_row(const ExperimentReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(18) << r.name << std::setw(10) << r.level_amb_label() << std::setw(8)
     << r.tagset_size << std::setw(14) << detail::coverage_cell(r) << std::setw(14)
     << (detail::fixed2(r.mean_f) + "/" + detail::fixed2(r.mean_tagging))
     << (r.gain_f ? detail::signed2(*r.gain_f) : std::string("-"));
  return os.str();
}

inline std::string format_report(const ExperimentReport& r) {
  std::ostringstream os;
  os << report_header_row() << '\n' << report_row(r) << "\n\n";
  os << "folds: p=" << r.xval.p << " fold_seed=" << r.xval.fold_seed << " trees=" << r.n_trees << '\n';
  os << "eval: max_len=" << r.xval.eval.max_len << (r.xval.eval.max_len_inclusive ? " (inclusive)" : " (exclusive)")
     << " punct=" << (r.xval.eval.include_punct ? "include" : "exclude") << '\n';
  os << "train: rounds=" << r.train.rounds << " em_iters=" << r.train.em_iters << " noise=" << r.train.noise
     << " seed=" << r.train.seed << " rare_threshold=" << r.train.rare_threshold << " h_markov=" << r.train.h_markov
     << " v_markov=" << r.train.v_markov << '\n';
  os << "parser: max_unary_chain=" << r.xval.parser.max_unary_chain << '\n';
  os << "fallbacks: relaxed=" << r.n_relaxed << " flat=" << r.n_fallback << '\n';
  if (r.gain_tagging) os << "tagging gain: " << detail::signed2(*r.gain_tagging) << '\n';
  os << '\n'
     << std::left << std::setw(6) << "fold" << std::setw(8) << "train" << std::setw(8) << "test" << std::setw(9)
     << "P" << std::setw(9) << "R" << std::setw(9) << "F" << std::setw(9) << "Tag" << std::setw(10) << "relaxed"
     << std::setw(7) << "flat" << "gain F\n";
  for (std::size_t k = 0; k < r.folds.size(); ++k) {
    const auto& f = r.folds[k];
    os << std::left << std::setw(6) << f.fold << std::setw(8) << f.n_train << std::setw(8) << f.n_test
       << std::setw(9) << detail::fixed2(f.score.precision) << std::setw(9) << detail::fixed2(f.score.recall)
       << std::setw(9) << detail::fixed2(f.score.f1) << std::setw(9) << detail::fixed2(f.score.tagging_accuracy)
       << std::setw(10) << f.n_relaxed << std::setw(7) << f.n_fallback
       << (k < r.gain_f_per_fold.size() ? detail::signed2(r.gain_f_per_fold[k]) : std::string("-")) << '\n';
  }
  for (const auto& s : r.strategies) os << "\n[strategy]\n" << s.to_kv();
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ParsevalScore& s) {
  return {{"n_gold", s.n_gold},
          {"n_pred", s.n_pred},
          {"n_match", s.n_match},
          {"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"tagging_accuracy", s.tagging_accuracy},
          {"n_tokens", s.n_tokens},
          {"n_tags_correct", s.n_tags_correct},
          {"n_sentences_scored", s.n_sentences_scored},
          {"n_excluded_by_length", s.n_excluded_by_length}};
}

inline ParsevalScore parseval_from_json(const nlohmann::json& j) {
  ParsevalScore s;
  s.n_gold = j.at("n_gold").get<std::size_t>();
  s.n_pred = j.at("n_pred").get<std::size_t>();
  s.n_match = j.at("n_match").get<std::size_t>();
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
  s.tagging_accuracy = j.at("tagging_accuracy").get<double>();
  s.n_tokens = j.value("n_tokens", std::size_t{0});
  s.n_tags_correct = j.value("n_tags_correct", std::size_t{0});
  s.n_sentences_scored = j.at("n_sentences_scored").get<std::size_t>();
  s.n_excluded_by_length = j.at("n_excluded_by_length").get<std::size_t>();
  return s;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"rounds", c.rounds},
          {"em_iters", c.em_iters},
          {"noise", c.noise},
          {"seed", c.seed},
          {"rare_threshold", c.rare_threshold},
          {"h_markov", c.h_markov},
          {"v_markov", c.v_markov}};
}

inline nlohmann::json to_json(const StrategyConfig& c) {
  return {{"method", std::string(method_code(c.method))},
          {"category", std::string(category_code(c.category))},
          {"level", c.level},
          {"max_amb", c.max_ambiguity},
          {"targets", c.target_tags},
          {"kv", c.to_kv()}};
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["level_amb"] = r.level_amb_label();
  j["strategies"] = nlohmann::json::array();
  for (const auto& s : r.strategies) j["strategies"].push_back(to_json(s));
  j["train"] = to_json(r.train);
  j["xval"] = {{"p", r.xval.p},
               {"fold_seed", r.xval.fold_seed},
               {"max_len", r.xval.eval.max_len},
               {"max_len_inclusive", r.xval.eval.max_len_inclusive},
               {"include_punct", r.xval.eval.include_punct},
               {"punct_prefix", r.xval.eval.punct_prefix},
               {"max_unary_chain", r.xval.parser.max_unary_chain}};
  j["n_trees"] = r.n_trees;
  j["tagset_size"] = r.tagset_size;
  j["coverage"] = nlohmann::json::array();
  for (const auto& c : r.coverage) {
    j["coverage"].push_back({{"n_distinct_forms", c.n_distinct_forms},
                             {"n_annotated_forms", c.n_annotated_forms},
                             {"pct_annotated", c.pct_annotated},
                             {"tagset_size_before", c.tagset_size_before},
                             {"tagset_size_after", c.tagset_size_after}});
  }
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) {
    j["folds"].push_back({{"fold", f.fold},
                          {"n_train", f.n_train},
                          {"n_test", f.n_test},
                          {"score", to_json(f.score)},
                          {"n_relaxed", f.n_relaxed},
                          {"n_fallback", f.n_fallback},
                          {"final_log_likelihood", f.final_log_likelihood}});
  }
  j["mean_precision"] = r.mean_precision;
  j["mean_recall"] = r.mean_recall;
  j["mean_f"] = r.mean_f;
  j["mean_tagging"] = r.mean_tagging;
  j["n_relaxed"] = r.n_relaxed;
  j["n_fallback"] = r.n_fallback;
  j["gain_f"] = r.gain_f ? nlohmann::json(*r.gain_f) : nlohmann::json();
  j["gain_tagging"] = r.gain_tagging ? nlohmann::json(*r.gain_tagging) : nlohmann::json();
  j["gain_f_per_fold"] = r.gain_f_per_fold;
  j["gain_tagging_per_fold"] = r.gain_tagging_per_fold;
  return j;
}

/// Reads back the fields needed to act as a baseline (scores and means).
inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.name = j.value("name", std::string("Baseline"));
  r.n_trees = j.value("n_trees", std::size_t{0});
  r.tagset_size = j.value("tagset_size", std::size_t{0});
  if (j.contains("xval")) {
    const auto& x = j["xval"];
    r.xval.p = x.value("p", r.xval.p);
    r.xval.fold_seed = x.value("fold_seed", r.xval.fold_seed);
  }
  for (const auto& f : j.at("folds")) {
    FoldResult fr;
    fr.fold = f.at("fold").get<int>();
    fr.n_train = f.value("n_train", std::size_t{0});
    fr.n_test = f.value("n_test", std::size_t{0});
    fr.score = parseval_from_json(f.at("score"));
    fr.n_relaxed = f.value("n_relaxed", std::size_t{0});
    fr.n_fallback = f.value("n_fallback", std::size_t{0});
    r.folds.push_back(fr);
  }
  aggregate(r);
  return r;
}

}  // namespace lgparse
