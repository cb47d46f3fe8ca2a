#pragma once

// CKY over split symbols.
//
// Each chart cell holds, per unary depth t = 0..max_unary_chain, the best
// score (or inside mass) of split symbols whose derivation over the span ends
// in exactly t unary rules above a binary or lexical rule. The derivation
// space is therefore "at most max_unary_chain unaries in a row per span", for
// both the Viterbi and the inside computation. When the grammar has a wrapped
// root, the start symbol's unary rules are applied once more on top of the
// whole-sentence cell and do not count toward the chain bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgparse/binarize.hpp"
#include "lgparse/grammar.hpp"
#include "lgparse/tree.hpp"

namespace lgparse {

enum class ParserErrorKind { NoParse, EmptySentence };
using ParserError = KindedError<ParserErrorKind>;

struct ParserOptions {
  int max_unary_chain = 2;
  /// When a token has neither a word nor a signature entry, let it take any
  /// emitting tag, scored by that tag's total signature mass or, for tags
  /// with no signatures, its smallest word probability.
  bool relax_unknown = false;
};

/// Maps split-symbol names back to base names.
class SymbolProjection {
 public:
  SymbolProjection() = default;
  explicit SymbolProjection(const Grammar& g) {
    for (int s = 0; s < g.n_symbols(); ++s)
      for (int a = 0; a < g.n_sub(s); ++a) map_.emplace(g.split_name(s, a), g.name(s));
  }
  /// Known names map through the table; others lose a trailing `_<digits>`.
  std::string operator()(const std::string& label) const {
    if (!map_.empty()) {
      auto it = map_.find(label);
      if (it != map_.end()) return it->second;
    }
    const auto us = label.rfind('_');
    if (us == std::string::npos || us + 1 == label.size()) return label;
    for (std::size_t i = us + 1; i < label.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(label[i]))) return label;
    return label.substr(0, us);
  }

 private:
  std::unordered_map<std::string, std::string> map_;
};

inline Tree project(const Tree& t, const SymbolProjection& proj) {
  if (t.is_leaf()) return t;
  Tree out = Tree::node(proj(t.label), {});
  out.children.reserve(t.children.size());
  for (const auto& c : t.children) out.children.push_back(project(c, proj));
  return out;
}

/// Removes latent indices, then splices binarization intermediates.
inline Tree project_and_unbinarize(const Tree& t, const SymbolProjection& proj = {}) {
  return unbinarize(project(t, proj));
}

struct ViterbiResult {
  /// Binarized tree labeled with split names (`NP_1`), including the start
  /// symbol.
  Tree tree;
  double log_prob = 0.0;
};

class Parser {
 public:
  explicit Parser(const Grammar& g, ParserOptions opt = {}) : g_(g), opt_(opt) {
    log_params_.resize(g.params().size());
    for (std::size_t i = 0; i < log_params_.size(); ++i)
      log_params_[i] = g.params()[i] > 0 ? std::log(g.params()[i]) : kNegInf;
    lexical_by_word_.resize(g.n_words());
    for (std::size_t i = 0; i < g.lexical().size(); ++i) lexical_by_word_[g.lexical()[i].word].push_back(static_cast<int>(i));
    binary_by_left_.resize(g.n_symbols());
    for (std::size_t i = 0; i < g.binary().size(); ++i) binary_by_left_[g.binary()[i].left].push_back(static_cast<int>(i));
    for (std::size_t i = 0; i < g.unary().size(); ++i) {
      const auto& r = g.unary()[i];
      if (g.wrapped_root() && r.parent == g.start()) root_unary_.push_back(static_cast<int>(i));
      else chain_unary_.push_back(static_cast<int>(i));
    }
    // Relaxed unknown-word distribution: per tag, the sum over signatures.
    std::vector<double> mass(g.n_split_symbols(), 0.0);
    std::vector<char> has_sig(g.n_symbols(), 0);
    for (const auto& r : g.lexical()) {
      if (!g.is_signature(r.word)) continue;
      has_sig[r.tag] = 1;
      auto p = g.probs(r);
      for (int a = 0; a < g.n_sub(r.tag); ++a) mass[g.flat(r.tag, a)] += p[a];
    }
    // Tags without signatures: their smallest word mass.
    for (const auto& r : g.lexical()) {
      if (has_sig[r.tag]) continue;
      auto p = g.probs(r);
      for (int a = 0; a < g.n_sub(r.tag); ++a) {
        double& m = mass[g.flat(r.tag, a)];
        if (p[a] > 0) m = m == 0.0 ? p[a] : std::min(m, p[a]);
      }
    }
    for (int s = 0; s < g.n_symbols(); ++s) {
      bool has = false;
      for (int a = 0; a < g.n_sub(s); ++a) has |= mass[g.flat(s, a)] > 0;
      if (has) relaxed_tags_.push_back(s);
    }
    relaxed_mass_ = std::move(mass);
  }

  const Grammar& grammar() const { return g_; }

  /// Best derivation over split symbols.
  ViterbiResult viterbi(const std::vector<Token>& tokens) const {
    const std::size_t n = check_sentence(tokens);
    Chart chart(n, levels(), g_.n_split_symbols(), kNegInf);
    fill_lexical(chart, tokens, /*log_space=*/true);
    for (std::size_t len = 1; len <= n; ++len) {
      for (std::size_t i = 0; i + len <= n; ++i) {
        const std::size_t j = i + len;
        Cell& cell = chart.at(i, j);
        if (len > 1) viterbi_binary(chart, i, j);
        viterbi_unary(cell);
        cell.finish_max();
      }
    }
    // Root.
    const Cell& top = chart.at(0, n);
    const int start_flat = g_.flat(g_.start(), 0);
    double best = kNegInf;
    Backpointer root_bp;
    int root_level = -1;
    if (g_.wrapped_root()) {
      for (int ri : root_unary_) {
        const auto& r = g_.unary()[ri];
        const int nb = g_.n_sub(r.child);
        for (int b = 0; b < nb; ++b) {
          const int child = g_.flat(r.child, b);
          const double s = log_params_[r.offset + b] + top.best[child];
          if (s > best) {
            best = s;
            root_bp = Backpointer{Backpointer::Unary, ri, 0, child, -1};
          }
        }
      }
    } else {
      best = top.best[start_flat];
      root_level = top.best_level[start_flat];
    }
    if (!(best > kNegInf)) throw ParserError(ParserErrorKind::NoParse, "no derivation covers the sentence");

    ViterbiResult res;
    res.log_prob = best;
    if (g_.wrapped_root()) {
      Tree root = Tree::node(g_.split_name(g_.start(), 0), {});
      root.children.push_back(build(chart, tokens, 0, n, root_bp.left));
      res.tree = std::move(root);
    } else {
      res.tree = build_at_level(chart, tokens, 0, n, start_flat, root_level);
    }
    return res;
  }

  /// log of the summed probability of every derivation.
  double sentence_loglik(const std::vector<Token>& tokens) const {
    const std::size_t n = check_sentence(tokens);
    Chart chart(n, levels(), g_.n_split_symbols(), 0.0);
    fill_lexical(chart, tokens, /*log_space=*/false);
    for (std::size_t len = 1; len <= n; ++len) {
      for (std::size_t i = 0; i + len <= n; ++i) {
        const std::size_t j = i + len;
        Cell& cell = chart.at(i, j);
        if (len > 1) inside_binary(chart, i, j);
        inside_unary(cell);
        cell.finish_sum();
      }
    }
    const Cell& top = chart.at(0, n);
    double val = 0.0;
    if (g_.wrapped_root()) {
      for (int ri : root_unary_) {
        const auto& r = g_.unary()[ri];
        for (int b = 0; b < g_.n_sub(r.child); ++b) val += g_.params()[r.offset + b] * top.best[g_.flat(r.child, b)];
      }
    } else {
      val = top.best[g_.flat(g_.start(), 0)];
    }
    if (!(val > 0.0)) throw ParserError(ParserErrorKind::NoParse, "no derivation covers the sentence");
    return std::log(val) + top.log_scale;
  }

  /// Viterbi tree projected to base symbols, unbinarized, start wrapper
  /// removed; leaves carry the input tokens.
  Tree parse(const std::vector<Token>& tokens) const {
    return finish(viterbi(tokens).tree);
  }

  /// Converts a split-labeled Viterbi tree into an output tree.
  Tree finish(const Tree& split_tree) const {
    Tree t = project_and_unbinarize(split_tree, SymbolProjection(g_));
    if (g_.wrapped_root() && t.children.size() == 1 && !t.is_preterminal()) {
      Tree inner = std::move(t.children.front());
      return inner;
    }
    return t;
  }

  /// Flat tree over the most probable tag of each token, under the fallback
  /// root label. Equivalent to unbinarizing a right-branching tree.
  Tree fallback(const std::vector<Token>& tokens) const {
    Tree root = Tree::node(g_.fallback_root.empty() ? g_.name(g_.start()) : g_.fallback_root, {});
    for (const auto& tok : tokens) {
      int best_tag = relaxed_tags_.empty() ? -1 : relaxed_tags_.front();
      double best = -1.0;
      const int w = g_.lexical_key(tok.surface);
      if (w >= 0) {
        for (int ri : lexical_by_word_[w]) {
          const auto& r = g_.lexical()[ri];
          for (double p : g_.probs(r))
            if (p > best) { best = p; best_tag = r.tag; }
        }
      }
      if (best < 0) {
        for (int s : relaxed_tags_)
          for (int a = 0; a < g_.n_sub(s); ++a)
            if (relaxed_mass_[g_.flat(s, a)] > best) { best = relaxed_mass_[g_.flat(s, a)]; best_tag = s; }
      }
      const std::string tag = best_tag >= 0 ? g_.name(best_tag) : std::string("X");
      root.children.push_back(Tree::preterminal(tag, tok.surface, tok.lemma));
    }
    return root;
  }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  struct Backpointer {
    enum Kind : std::uint8_t { None, Lexical, Unary, Binary } kind = None;
    int rule = -1;
    int split = 0;
    int left = -1;   // flat child (unary/binary left)
    int right = -1;  // flat right child
  };

  struct Cell {
    std::vector<std::vector<double>> level;       // [t][flat]
    std::vector<std::vector<Backpointer>> bp;     // [t][flat], Viterbi only
    std::vector<double> best;                     // max (or sum) over levels
    std::vector<std::int8_t> best_level;
    std::vector<char> active_base;                // per base symbol
    double log_scale = 0.0;                       // inside only

    void finish_max() {
      const std::size_t s = best.size();
      for (std::size_t f = 0; f < s; ++f) {
        for (std::size_t t = 0; t < level.size(); ++t) {
          if (level[t][f] > best[f]) {
            best[f] = level[t][f];
            best_level[f] = static_cast<std::int8_t>(t);
          }
        }
      }
    }
    void finish_sum() {
      double m = 0.0;
      for (std::size_t f = 0; f < best.size(); ++f) {
        double s = 0.0;
        for (const auto& lv : level) s += lv[f];
        best[f] = s;
        m = std::max(m, s);
      }
      if (m > 0.0) {
        for (auto& x : best) x /= m;
        log_scale += std::log(m);
      }
      level.clear();
    }
  };

  struct Chart {
    Chart(std::size_t n, int levels, int nsplit, double fill) : n_(n), cells_(n * (n + 1) / 2) {
      for (auto& c : cells_) {
        c.level.assign(levels, std::vector<double>(nsplit, fill));
        if (fill != 0.0) c.bp.assign(levels, std::vector<Backpointer>(nsplit));
        c.best.assign(nsplit, fill);
        c.best_level.assign(nsplit, -1);
      }
    }
    Cell& at(std::size_t i, std::size_t j) { return cells_[index(i, j)]; }
    const Cell& at(std::size_t i, std::size_t j) const { return cells_[index(i, j)]; }
    std::size_t index(std::size_t i, std::size_t j) const {
      // spans ordered by start, then end
      return i * n_ - i * (i - 1) / 2 + (j - i - 1);
    }
    std::size_t n_;
    std::vector<Cell> cells_;
  };

  int levels() const { return opt_.max_unary_chain + 1; }

  std::size_t check_sentence(const std::vector<Token>& tokens) const {
    if (tokens.empty()) throw ParserError(ParserErrorKind::EmptySentence, "empty sentence");
    return tokens.size();
  }

  void fill_lexical(Chart& chart, const std::vector<Token>& tokens, bool log_space) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      Cell& cell = chart.at(i, i + 1);
      auto& lv = cell.level[0];
      const int w = g_.lexical_key(tokens[i].surface);
      bool found = false;
      if (w >= 0) {
        for (int ri : lexical_by_word_[w]) {
          const auto& r = g_.lexical()[ri];
          for (int a = 0; a < g_.n_sub(r.tag); ++a) {
            const int f = g_.flat(r.tag, a);
            const double p = g_.params()[r.offset + a];
            if (p <= 0) continue;
            found = true;
            lv[f] = log_space ? log_params_[r.offset + a] : p;
            if (log_space) cell.bp[0][f] = Backpointer{Backpointer::Lexical, ri, 0, -1, -1};
          }
        }
      }
      if (!found && opt_.relax_unknown) {
        for (int s : relaxed_tags_) {
          for (int a = 0; a < g_.n_sub(s); ++a) {
            const int f = g_.flat(s, a);
            const double p = relaxed_mass_[f];
            if (p <= 0) continue;
            lv[f] = log_space ? std::log(p) : p;
            if (log_space) cell.bp[0][f] = Backpointer{Backpointer::Lexical, -1, 0, -1, -1};
          }
        }
      }
    }
  }

  void viterbi_binary(Chart& chart, std::size_t i, std::size_t j) const {
    Cell& cell = chart.at(i, j);
    auto& lv = cell.level[0];
    auto& bp = cell.bp[0];
    for (std::size_t k = i + 1; k < j; ++k) {
      const Cell& lc = chart.at(i, k);
      const Cell& rc = chart.at(k, j);
      if (lc.active_base.empty() || rc.active_base.empty()) continue;
      for (int left = 0; left < g_.n_symbols(); ++left) {
        if (!lc.active_base[left]) continue;
        for (int ri : binary_by_left_[left]) {
          const auto& r = g_.binary()[ri];
          if (!rc.active_base[r.right]) continue;
          const int na = g_.n_sub(r.parent), nb = g_.n_sub(r.left), nc = g_.n_sub(r.right);
          for (int b = 0; b < nb; ++b) {
            const int fb = g_.flat(r.left, b);
            const double sl = lc.best[fb];
            if (sl == kNegInf) continue;
            for (int c = 0; c < nc; ++c) {
              const int fc = g_.flat(r.right, c);
              const double sr = rc.best[fc];
              if (sr == kNegInf) continue;
              for (int a = 0; a < na; ++a) {
                const double s = log_params_[r.offset + (static_cast<std::size_t>(a) * nb + b) * nc + c] + sl + sr;
                const int fa = g_.flat(r.parent, a);
                if (s > lv[fa]) {
                  lv[fa] = s;
                  bp[fa] = Backpointer{Backpointer::Binary, ri, static_cast<int>(k), fb, fc};
                }
              }
            }
          }
        }
      }
    }
  }

  void viterbi_unary(Cell& cell) const {
    for (std::size_t t = 1; t < cell.level.size(); ++t) {
      const auto& prev = cell.level[t - 1];
      auto& cur = cell.level[t];
      auto& bp = cell.bp[t];
      for (int ri : chain_unary_) {
        const auto& r = g_.unary()[ri];
        const int na = g_.n_sub(r.parent), nb = g_.n_sub(r.child);
        for (int b = 0; b < nb; ++b) {
          const int fb = g_.flat(r.child, b);
          if (prev[fb] == kNegInf) continue;
          for (int a = 0; a < na; ++a) {
            const double s = log_params_[r.offset + static_cast<std::size_t>(a) * nb + b] + prev[fb];
            const int fa = g_.flat(r.parent, a);
            if (s > cur[fa]) {
              cur[fa] = s;
              bp[fa] = Backpointer{Backpointer::Unary, ri, 0, fb, -1};
            }
          }
        }
      }
    }
    mark_active(cell, kNegInf);
  }

  void mark_active(Cell& cell, double empty) const {
    cell.active_base.assign(g_.n_symbols(), 0);
    for (int s = 0; s < g_.n_symbols(); ++s)
      for (int a = 0; a < g_.n_sub(s); ++a)
        for (const auto& lv : cell.level)
          if (lv[g_.flat(s, a)] != empty) cell.active_base[s] = 1;
  }

  void inside_binary(Chart& chart, std::size_t i, std::size_t j) const {
    Cell& cell = chart.at(i, j);
    auto& acc = cell.level[0];
    bool have = false;
    std::vector<double> tmp(acc.size());
    for (std::size_t k = i + 1; k < j; ++k) {
      const Cell& lc = chart.at(i, k);
      const Cell& rc = chart.at(k, j);
      std::fill(tmp.begin(), tmp.end(), 0.0);
      bool any = false;
      for (int left = 0; left < g_.n_symbols(); ++left) {
        if (!lc.active_base[left]) continue;
        for (int ri : binary_by_left_[left]) {
          const auto& r = g_.binary()[ri];
          if (!rc.active_base[r.right]) continue;
          const int na = g_.n_sub(r.parent), nb = g_.n_sub(r.left), nc = g_.n_sub(r.right);
          const auto p = g_.probs(r);
          for (int a = 0; a < na; ++a) {
            double s = 0;
            for (int b = 0; b < nb; ++b) {
              const double l = lc.best[g_.flat(r.left, b)];
              if (l == 0.0) continue;
              double t = 0;
              for (int c = 0; c < nc; ++c) t += p[(static_cast<std::size_t>(a) * nb + b) * nc + c] * rc.best[g_.flat(r.right, c)];
              s += l * t;
            }
            if (s > 0) {
              tmp[g_.flat(r.parent, a)] += s;
              any = true;
            }
          }
        }
      }
      if (!any) continue;
      const double scale = lc.log_scale + rc.log_scale;
      if (!have) {
        acc = tmp;
        cell.log_scale = scale;
        have = true;
      } else if (scale > cell.log_scale) {
        const double f = std::exp(cell.log_scale - scale);
        for (std::size_t x = 0; x < acc.size(); ++x) acc[x] = acc[x] * f + tmp[x];
        cell.log_scale = scale;
      } else {
        const double f = std::exp(scale - cell.log_scale);
        for (std::size_t x = 0; x < acc.size(); ++x) acc[x] += tmp[x] * f;
      }
    }
  }

  void inside_unary(Cell& cell) const {
    for (std::size_t t = 1; t < cell.level.size(); ++t) {
      const auto& prev = cell.level[t - 1];
      auto& cur = cell.level[t];
      for (int ri : chain_unary_) {
        const auto& r = g_.unary()[ri];
        const int na = g_.n_sub(r.parent), nb = g_.n_sub(r.child);
        const auto p = g_.probs(r);
        for (int a = 0; a < na; ++a) {
          double s = 0;
          for (int b = 0; b < nb; ++b) s += p[static_cast<std::size_t>(a) * nb + b] * prev[g_.flat(r.child, b)];
          cur[g_.flat(r.parent, a)] += s;
        }
      }
    }
    mark_active(cell, 0.0);
  }

  Tree build(const Chart& chart, const std::vector<Token>& tokens, std::size_t i, std::size_t j, int flat) const {
    const Cell& cell = chart.at(i, j);
    return build_at_level(chart, tokens, i, j, flat, cell.best_level[flat]);
  }

  Tree build_at_level(const Chart& chart, const std::vector<Token>& tokens, std::size_t i, std::size_t j,
                      int flat, int level) const {
    const Cell& cell = chart.at(i, j);
    const Backpointer& bp = cell.bp[level][flat];
    Tree t = Tree::node(split_label(flat), {});
    switch (bp.kind) {
      case Backpointer::Lexical:
        t.children.push_back(Tree::leaf(tokens[i].surface, tokens[i].lemma));
        break;
      case Backpointer::Unary:
        t.children.push_back(build_at_level(chart, tokens, i, j, bp.left, level - 1));
        break;
      case Backpointer::Binary:
        t.children.push_back(build(chart, tokens, i, static_cast<std::size_t>(bp.split), bp.left));
        t.children.push_back(build(chart, tokens, static_cast<std::size_t>(bp.split), j, bp.right));
        break;
      case Backpointer::None:
        throw ParserError(ParserErrorKind::NoParse, "broken backpointer");
    }
    return t;
  }

  std::string split_label(int flat) const {
    // Binary search over symbol offsets.
    int lo = 0, hi = g_.n_symbols() - 1;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (g_.flat(mid, 0) <= flat) lo = mid;
      else hi = mid - 1;
    }
    return g_.split_name(lo, flat - g_.flat(lo, 0));
  }

  const Grammar& g_;
  ParserOptions opt_;
  std::vector<double> log_params_;
  std::vector<std::vector<int>> lexical_by_word_;
  std::vector<std::vector<int>> binary_by_left_;
  std::vector<int> chain_unary_;
  std::vector<int> root_unary_;
  std::vector<int> relaxed_tags_;
  std::vector<double> relaxed_mass_;
};

inline Tree parse(const Grammar& g, const std::vector<Token>& tokens, ParserOptions opt = {}) {
  return Parser(g, opt).parse(tokens);
}

inline double sentence_loglik(const Grammar& g, const std::vector<Token>& tokens, ParserOptions opt = {}) {
  return Parser(g, opt).sentence_loglik(tokens);
}

enum class ParseStatus { Ok, Relaxed, Fallback };

struct ParseOutcome {
  Tree tree;
  ParseStatus status = ParseStatus::Ok;
};

/// Strict parse, then relaxed unknown handling, then the flat fallback.
inline ParseOutcome parse_with_fallback(const Parser& strict, const Parser& relaxed,
                                        const std::vector<Token>& tokens) {
  try {
    return {strict.parse(tokens), ParseStatus::Ok};
  } catch (const ParserError& e) {
    if (e.kind() != ParserErrorKind::NoParse) throw;
  }
  try {
    return {relaxed.parse(tokens), ParseStatus::Relaxed};
  } catch (const ParserError& e) {
    if (e.kind() != ParserErrorKind::NoParse) throw;
  }
  return {strict.fallback(tokens), ParseStatus::Fallback};
}

}  // namespace lgparse
