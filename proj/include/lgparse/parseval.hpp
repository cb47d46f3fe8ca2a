#pragma once

// Labeled-bracket scoring.
//
// Constituents are (label, start, end) triples of every node above the
// pre-terminal level, the root included. A unary ROOT/TOP wrapper above a
// phrasal node is dropped first so either root convention scores the same.
// With punctuation excluded, punctuation tokens are removed from position
// indexing and constituents left with an empty span disappear. Matching is
// multiset intersection.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lgparse/error.hpp"
#include "lgparse/tree.hpp"

namespace lgparse {

enum class EvalErrorKind { LeafMismatch, SizeMismatch };
using EvalError = KindedError<EvalErrorKind>;

struct EvalOptions {
  /// Sentences longer than this are skipped (see `max_len_inclusive`).
  int max_len = 40;
  /// true: score length <= max_len; false: score length < max_len.
  bool max_len_inclusive = true;
  bool include_punct = true;
  /// Tags starting with this prefix count as punctuation.
  std::string punct_prefix = "PONCT";
  /// Additional explicit punctuation tags.
  std::set<std::string> punct_tags;

  bool is_punct(const std::string& tag) const {
    return (!punct_prefix.empty() && tag.rfind(punct_prefix, 0) == 0) || punct_tags.count(tag) > 0;
  }
  bool length_ok(std::size_t len) const {
    return max_len_inclusive ? len <= static_cast<std::size_t>(max_len) : len < static_cast<std::size_t>(max_len);
  }
};

struct ParsevalScore {
  std::size_t n_gold = 0;
  std::size_t n_pred = 0;
  std::size_t n_match = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tagging_accuracy = 0.0;
  std::size_t n_tokens = 0;
  std::size_t n_tags_correct = 0;
  std::size_t n_sentences_scored = 0;
  std::size_t n_excluded_by_length = 0;

  void finalize() {
    precision = n_pred ? 100.0 * static_cast<double>(n_match) / static_cast<double>(n_pred) : 0.0;
    recall = n_gold ? 100.0 * static_cast<double>(n_match) / static_cast<double>(n_gold) : 0.0;
    f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    tagging_accuracy = n_tokens ? 100.0 * static_cast<double>(n_tags_correct) / static_cast<double>(n_tokens) : 0.0;
  }
};

using Constituent = std::tuple<std::string, std::size_t, std::size_t>;

namespace detail {

inline const Tree& drop_root_wrapper(const Tree& t) {
  const Tree* cur = &t;
  while ((cur->label == "ROOT" || cur->label == "TOP") && cur->children.size() == 1 &&
         !cur->is_preterminal())
    cur = &cur->children.front();
  return *cur;
}

/// Returns the number of counted positions in the subtree.
inline std::size_t collect(const Tree& t, const EvalOptions& opt, std::size_t start,
                           std::vector<Constituent>& out) {
  if (t.is_preterminal()) return opt.include_punct || !opt.is_punct(t.label) ? 1 : 0;
  std::size_t pos = start;
  for (const auto& c : t.children) pos += collect(c, opt, pos, out);
  if (pos > start) out.emplace_back(t.label, start, pos);
  return pos - start;
}

}  // namespace detail

inline std::vector<Constituent> constituents(const Tree& t, const EvalOptions& opt = {}) {
  std::vector<Constituent> out;
  detail::collect(detail::drop_root_wrapper(t), opt, 0, out);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::size_t matched(const std::vector<Constituent>& gold, const std::vector<Constituent>& pred) {
  std::vector<Constituent> common;
  std::set_intersection(gold.begin(), gold.end(), pred.begin(), pred.end(), std::back_inserter(common));
  return common.size();
}

namespace detail {

inline void check_leaves(const Tree& gold, const Tree& pred, std::size_t index) {
  const auto g = tokens_of(gold);
  const auto p = tokens_of(pred);
  bool ok = g.size() == p.size();
  for (std::size_t i = 0; ok && i < g.size(); ++i) ok = g[i].surface == p[i].surface;
  if (!ok) {
    throw EvalError(EvalErrorKind::LeafMismatch, "sentence " + std::to_string(index) + ": leaves differ", index);
  }
}

inline void check_sizes(const Treebank& gold, const Treebank& pred) {
  if (gold.size() != pred.size()) {
    throw EvalError(EvalErrorKind::SizeMismatch, "gold has " + std::to_string(gold.size()) +
                                                     " trees, prediction " + std::to_string(pred.size()));
  }
}

}  // namespace detail

inline ParsevalScore parseval(const Treebank& gold, const Treebank& pred, const EvalOptions& opt = {}) {
  detail::check_sizes(gold, pred);
  ParsevalScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Tree& g = gold.trees[i];
    const Tree& p = pred.trees[i];
    detail::check_leaves(g, p, i);
    const auto gtags = tags_of(g);
    if (!opt.length_ok(gtags.size())) {
      ++s.n_excluded_by_length;
      continue;
    }
    ++s.n_sentences_scored;
    const auto gc = constituents(g, opt);
    const auto pc = constituents(p, opt);
    s.n_gold += gc.size();
    s.n_pred += pc.size();
    s.n_match += matched(gc, pc);
    const auto ptags = tags_of(p);
    for (std::size_t k = 0; k < gtags.size(); ++k) {
      ++s.n_tokens;
      if (gtags[k] == ptags[k]) ++s.n_tags_correct;
    }
  }
  s.finalize();
  return s;
}

inline ParsevalScore parseval(const Treebank& gold, const Treebank& pred, int max_len, bool include_punct) {
  EvalOptions opt;
  opt.max_len = max_len;
  opt.include_punct = include_punct;
  return parseval(gold, pred, opt);
}

/// Percentage of tokens with the exact gold pre-terminal label, all sentences.
inline double tagging_accuracy(const Treebank& gold, const Treebank& pred) {
  detail::check_sizes(gold, pred);
  std::size_t total = 0, correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    detail::check_leaves(gold.trees[i], pred.trees[i], i);
    const auto g = tags_of(gold.trees[i]);
    const auto p = tags_of(pred.trees[i]);
    for (std::size_t k = 0; k < g.size(); ++k) {
      ++total;
      if (g[k] == p[k]) ++correct;
    }
  }
  return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace lgparse
