#pragma once

// Right-factored binarization with horizontal/vertical markovization.
//
// A node X with children c1..cn (n > 2) becomes
//   (X c1 (@X|c2..  c2 (@X|c3.. ... (cn-1 cn))))
// where each intermediate records the labels of the first `h_markov` children
// it covers. With v_markov = v > 1 every phrasal label (and the parent part of
// intermediates) is suffixed with up to v-1 ancestor labels: NP^VP^S.
// Pre-terminals are never annotated. '@', '|' and '^' are reserved in phrasal
// labels.

#include <string>
#include <string_view>
#include <vector>

#include "lgparse/tree.hpp"

namespace lgparse {

inline constexpr char kIntermediateMark = '@';
inline constexpr char kHorizontalSep = '|';
inline constexpr char kVerticalSep = '^';

enum class BinarizeErrorKind { MalformedIntermediate };
using BinarizeError = KindedError<BinarizeErrorKind>;

inline bool is_intermediate_label(std::string_view label) {
  return !label.empty() && label.front() == kIntermediateMark;
}

namespace detail {

inline Tree binarize_node(const Tree& t, int h, int v, std::vector<std::string>& ancestors) {
  if (t.is_leaf() || t.is_preterminal()) return t;

  std::string label = t.label;
  for (int k = 0; k < v - 1 && k < static_cast<int>(ancestors.size()); ++k)
    label += kVerticalSep + ancestors[ancestors.size() - 1 - k];

  ancestors.push_back(t.label);
  std::vector<Tree> kids;
  kids.reserve(t.children.size());
  for (const auto& c : t.children) kids.push_back(binarize_node(c, h, v, ancestors));
  ancestors.pop_back();

  if (kids.size() <= 2) return Tree::node(std::move(label), std::move(kids));

  // Build right to left: the last intermediate covers the final two children.
  auto intermediate_label = [&](std::size_t first) {
    std::string s(1, kIntermediateMark);
    s += label;
    for (std::size_t i = first; i < t.children.size() && static_cast<int>(i - first) < h; ++i) {
      s += kHorizontalSep;
      s += t.children[i].label;
    }
    return s;
  };
  const std::size_t n = kids.size();
  Tree right = Tree::node(intermediate_label(n - 2), {});
  right.children.push_back(std::move(kids[n - 2]));
  right.children.push_back(std::move(kids[n - 1]));
  for (std::size_t i = n - 2; i-- > 1;) {
    Tree next = Tree::node(intermediate_label(i), {});
    next.children.push_back(std::move(kids[i]));
    next.children.push_back(std::move(right));
    right = std::move(next);
  }
  Tree out = Tree::node(std::move(label), {});
  out.children.push_back(std::move(kids[0]));
  out.children.push_back(std::move(right));
  return out;
}

inline void splice_children(const Tree& t, std::vector<Tree>& out);

inline Tree unbinarize_node(const Tree& t) {
  if (t.is_leaf() || t.is_preterminal()) return t;
  std::string label = t.label;
  if (const auto caret = label.find(kVerticalSep); caret != std::string::npos) label.resize(caret);
  std::vector<Tree> kids;
  for (const auto& c : t.children) splice_children(c, kids);
  return Tree::node(std::move(label), std::move(kids));
}

inline void splice_children(const Tree& t, std::vector<Tree>& out) {
  if (!t.is_leaf() && !t.is_preterminal() && is_intermediate_label(t.label)) {
    for (const auto& c : t.children) splice_children(c, out);
    return;
  }
  if (t.is_preterminal() && is_intermediate_label(t.label)) {
    throw BinarizeError(BinarizeErrorKind::MalformedIntermediate,
                        "intermediate symbol '" + t.label + "' dominates a word");
  }
  out.push_back(unbinarize_node(t));
}

}  // namespace detail

inline Tree binarize(const Tree& t, int h_markov = 2, int v_markov = 1) {
  std::vector<std::string> ancestors;
  return detail::binarize_node(t, h_markov, v_markov, ancestors);
}

inline Treebank binarize(const Treebank& tb, int h_markov = 2, int v_markov = 1) {
  Treebank out;
  out.id = tb.id;
  out.trees.reserve(tb.size());
  for (const auto& t : tb.trees) out.trees.push_back(binarize(t, h_markov, v_markov));
  return out;
}

/// Splices out intermediates and drops vertical annotations.
inline Tree unbinarize(const Tree& t) {
  if (!t.is_leaf() && is_intermediate_label(t.label)) {
    throw BinarizeError(BinarizeErrorKind::MalformedIntermediate,
                        "intermediate symbol '" + t.label + "' at the root");
  }
  return detail::unbinarize_node(t);
}

inline Treebank unbinarize(const Treebank& tb) {
  Treebank out;
  out.id = tb.id;
  for (const auto& t : tb.trees) out.trees.push_back(unbinarize(t));
  return out;
}

}  // namespace lgparse
