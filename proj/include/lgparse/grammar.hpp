#pragma once

// Latent-annotation PCFG.
//
// Each base symbol A carries n_sub(A) latent subsymbols A_0..A_{n-1}. A base
// rule stores a dense probability tensor over its subsymbols:
//   binary  A -> B C   [a][b][c]   row-major, a outermost
//   unary   A -> B     [a][b]
//   lexical T -> w     [t]
// For every split symbol A_a the probabilities of all rules with parent A,
// restricted to row a, sum to one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lgparse/error.hpp"
#include "lgparse/tree.hpp"

namespace lgparse {

enum class GrammarErrorKind {
  EmptyTreebank,
  NonBinaryTree,
  BadFactor,
  BadNoise,
  UnderivableTree,
  ReservedSymbol,
  NameCollision,
  Malformed,
  Io,
};
using GrammarError = KindedError<GrammarErrorKind>;

inline constexpr std::string_view kStartSymbol = "ROOT";
inline constexpr int kDefaultRareThreshold = 5;

/// Signature of an unknown or rare word: capitalization, digits, hyphen and
/// the last two characters (UTF-8 code points, ASCII-lowercased).
inline std::string unknown_signature(std::string_view word) {
  std::string sig = "UNK";
  if (!word.empty() && std::isupper(static_cast<unsigned char>(word.front()))) sig += "-C";
  if (std::any_of(word.begin(), word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    sig += "-D";
  if (word.find('-') != std::string_view::npos) sig += "-H";
  // Walk back two code points.
  std::size_t cut = word.size();
  int points = 0;
  while (cut > 0 && points < 2) {
    --cut;
    while (cut > 0 && (static_cast<unsigned char>(word[cut]) & 0xC0) == 0x80) --cut;
    ++points;
  }
  if (cut < word.size()) {
    std::string suffix(word.substr(cut));
    for (auto& c : suffix) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    sig += "-s";
    sig += suffix;
  }
  return sig;
}

struct BinaryRule {
  int parent, left, right;
  std::size_t offset;
};
struct UnaryRule {
  int parent, child;
  std::size_t offset;
};
struct LexicalRule {
  int tag, word;
  std::size_t offset;
};

class Grammar {
 public:
  // -- symbols ---------------------------------------------------------------

  int add_symbol(const std::string& name, int n_sub = 1) {
    if (auto it = symbol_index_.find(name); it != symbol_index_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    n_sub_.push_back(n_sub);
    symbol_index_.emplace(name, id);
    rebuild_offsets();
    return id;
  }
  int symbol(std::string_view name) const {
    auto it = symbol_index_.find(std::string(name));
    return it == symbol_index_.end() ? -1 : it->second;
  }
  const std::string& name(int s) const { return names_[s]; }
  int n_symbols() const { return static_cast<int>(names_.size()); }
  int n_sub(int s) const { return n_sub_[s]; }
  /// Index of (symbol, sub) in the flat enumeration of split symbols.
  int flat(int s, int sub) const { return split_offset_[s] + sub; }
  int n_split_symbols() const { return split_offset_.empty() ? 0 : split_offset_.back(); }
  /// `NP_1` for split symbols, the base name when unsplit.
  std::string split_name(int s, int sub) const {
    return n_sub_[s] == 1 ? names_[s] : names_[s] + "_" + std::to_string(sub);
  }

  int start() const { return start_; }
  void set_start(int s) { start_ = s; }
  /// True when the start symbol was added above every treebank root and
  /// only rewrites by unary rules to the original root labels.
  bool wrapped_root() const { return wrapped_root_; }
  void set_wrapped_root(bool w) { wrapped_root_ = w; }

  // -- words -----------------------------------------------------------------

  int add_word(const std::string& w, bool is_signature = false) {
    auto& index = is_signature ? signature_index_ : word_index_;
    if (auto it = index.find(w); it != index.end()) return it->second;
    const int id = static_cast<int>(words_.size());
    words_.push_back(w);
    is_signature_.push_back(is_signature);
    index.emplace(w, id);
    return id;
  }
  int word(std::string_view w) const {
    auto it = word_index_.find(std::string(w));
    return it == word_index_.end() ? -1 : it->second;
  }
  int signature(std::string_view sig) const {
    auto it = signature_index_.find(std::string(sig));
    return it == signature_index_.end() ? -1 : it->second;
  }
  const std::string& word_string(int id) const { return words_[id]; }
  bool is_signature(int id) const { return is_signature_[id]; }
  int n_words() const { return static_cast<int>(words_.size()); }

  /// Lexical entry used for a surface: the word itself when known, else its
  /// signature; -1 when neither is in the grammar.
  int lexical_key(std::string_view surface) const {
    if (int w = word(surface); w >= 0) return w;
    return signature(unknown_signature(surface));
  }

  // -- rules -----------------------------------------------------------------

  int add_binary(int parent, int left, int right) {
    const auto key = pack(parent, left, right);
    if (auto it = binary_index_.find(key); it != binary_index_.end()) return it->second;
    const std::size_t size = static_cast<std::size_t>(n_sub_[parent]) * n_sub_[left] * n_sub_[right];
    binary_.push_back({parent, left, right, allocate(size)});
    binary_index_.emplace(key, static_cast<int>(binary_.size() - 1));
    return static_cast<int>(binary_.size() - 1);
  }
  int add_unary(int parent, int child) {
    const auto key = pack(parent, child, -1);
    if (auto it = unary_index_.find(key); it != unary_index_.end()) return it->second;
    unary_.push_back({parent, child, allocate(static_cast<std::size_t>(n_sub_[parent]) * n_sub_[child])});
    unary_index_.emplace(key, static_cast<int>(unary_.size() - 1));
    return static_cast<int>(unary_.size() - 1);
  }
  int add_lexical(int tag, int word) {
    const auto key = pack(tag, word, -2);
    if (auto it = lexical_index_.find(key); it != lexical_index_.end()) return it->second;
    lexical_.push_back({tag, word, allocate(static_cast<std::size_t>(n_sub_[tag]))});
    lexical_index_.emplace(key, static_cast<int>(lexical_.size() - 1));
    return static_cast<int>(lexical_.size() - 1);
  }

  int find_binary(int p, int l, int r) const { return find(binary_index_, pack(p, l, r)); }
  int find_unary(int p, int c) const { return find(unary_index_, pack(p, c, -1)); }
  int find_lexical(int t, int w) const { return find(lexical_index_, pack(t, w, -2)); }

  const std::vector<BinaryRule>& binary() const { return binary_; }
  const std::vector<UnaryRule>& unary() const { return unary_; }
  const std::vector<LexicalRule>& lexical() const { return lexical_; }

  std::span<double> probs(const BinaryRule& r) {
    return {params_.data() + r.offset, size_of(r)};
  }
  std::span<const double> probs(const BinaryRule& r) const {
    return {params_.data() + r.offset, size_of(r)};
  }
  std::span<double> probs(const UnaryRule& r) { return {params_.data() + r.offset, size_of(r)}; }
  std::span<const double> probs(const UnaryRule& r) const {
    return {params_.data() + r.offset, size_of(r)};
  }
  std::span<double> probs(const LexicalRule& r) { return {params_.data() + r.offset, size_of(r)}; }
  std::span<const double> probs(const LexicalRule& r) const {
    return {params_.data() + r.offset, size_of(r)};
  }

  std::size_t size_of(const BinaryRule& r) const {
    return static_cast<std::size_t>(n_sub_[r.parent]) * n_sub_[r.left] * n_sub_[r.right];
  }
  std::size_t size_of(const UnaryRule& r) const {
    return static_cast<std::size_t>(n_sub_[r.parent]) * n_sub_[r.child];
  }
  std::size_t size_of(const LexicalRule& r) const { return static_cast<std::size_t>(n_sub_[r.tag]); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Row sums per split symbol (indexed by `flat`). Symbols without rules
  /// report zero.
  std::vector<double> lhs_sums() const {
    std::vector<double> sums(n_split_symbols(), 0.0);
    for_each_row([&](int flat_parent, double p) { sums[flat_parent] += p; });
    return sums;
  }

  /// Rescales every row with positive mass to sum to one.
  void normalize() {
    const auto sums = lhs_sums();
    for (const auto& r : binary_) {
      auto p = probs(r);
      const std::size_t row = static_cast<std::size_t>(n_sub_[r.left]) * n_sub_[r.right];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = sums[flat(r.parent, static_cast<int>(i / row))];
        if (s > 0) p[i] /= s;
      }
    }
    for (const auto& r : unary_) {
      auto p = probs(r);
      const std::size_t row = n_sub_[r.child];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = sums[flat(r.parent, static_cast<int>(i / row))];
        if (s > 0) p[i] /= s;
      }
    }
    for (const auto& r : lexical_) {
      auto p = probs(r);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = sums[flat(r.tag, static_cast<int>(i))];
        if (s > 0) p[i] /= s;
      }
    }
  }

  /// Largest |row sum - 1| over split symbols that have rules.
  double max_normalization_error() const {
    std::vector<bool> has(n_split_symbols(), false);
    for_each_row([&](int f, double) { has[f] = true; });
    const auto sums = lhs_sums();
    double worst = 0;
    for (std::size_t i = 0; i < sums.size(); ++i)
      if (has[i]) worst = std::max(worst, std::abs(sums[i] - 1.0));
    return worst;
  }

  /// Calls fn(flat_parent, prob) for every tensor entry.
  template <typename Fn>
  void for_each_row(Fn&& fn) const {
    for (const auto& r : binary_) {
      auto p = probs(r);
      const std::size_t row = static_cast<std::size_t>(n_sub_[r.left]) * n_sub_[r.right];
      for (std::size_t i = 0; i < p.size(); ++i) fn(flat(r.parent, static_cast<int>(i / row)), p[i]);
    }
    for (const auto& r : unary_) {
      auto p = probs(r);
      const std::size_t row = n_sub_[r.child];
      for (std::size_t i = 0; i < p.size(); ++i) fn(flat(r.parent, static_cast<int>(i / row)), p[i]);
    }
    for (const auto& r : lexical_) {
      auto p = probs(r);
      for (std::size_t i = 0; i < p.size(); ++i) fn(flat(r.tag, static_cast<int>(i)), p[i]);
    }
  }

  // -- metadata --------------------------------------------------------------

  int rare_threshold = kDefaultRareThreshold;
  int h_markov = 2;
  int v_markov = 1;
  int n_split_rounds = 0;
  /// Root label emitted when a sentence has no parse.
  std::string fallback_root;
  /// Expected occupancy of each split symbol (flat index) from the last
  /// E-step; empty means uniform.
  std::vector<double> sub_weights;

  /// Returns a copy with every nonterminal except the start symbol split
  /// into `factor` subsymbols, rule mass divided evenly among the images.
  /// Used by split_symbols; exposed for tests.
  Grammar with_symbols_split(int factor) const {
    Grammar g;
    g.names_ = names_;
    g.symbol_index_ = symbol_index_;
    g.n_sub_ = n_sub_;
    for (int s = 0; s < n_symbols(); ++s)
      if (s != start_) g.n_sub_[s] *= factor;
    g.rebuild_offsets();
    g.words_ = words_;
    g.is_signature_ = is_signature_;
    g.word_index_ = word_index_;
    g.signature_index_ = signature_index_;
    g.start_ = start_;
    g.wrapped_root_ = wrapped_root_;
    g.rare_threshold = rare_threshold;
    g.h_markov = h_markov;
    g.v_markov = v_markov;
    g.n_split_rounds = n_split_rounds + 1;
    g.fallback_root = fallback_root;
    if (!sub_weights.empty()) {
      g.sub_weights.assign(g.n_split_symbols(), 0.0);
      for (int s = 0; s < n_symbols(); ++s) {
        const int k = g.n_sub_[s] / n_sub_[s];
        for (int a = 0; a < g.n_sub_[s]; ++a)
          g.sub_weights[g.flat(s, a)] = sub_weights[flat(s, a / k)] / k;
      }
    }
    auto ratio = [&](int s) { return g.n_sub_[s] / n_sub_[s]; };
    for (const auto& r : binary_) {
      const int idx = g.add_binary(r.parent, r.left, r.right);
      auto dst = g.probs(g.binary_[idx]);
      auto src = probs(r);
      const int kp = ratio(r.parent), kl = ratio(r.left), kr = ratio(r.right);
      const int na = g.n_sub_[r.parent], nb = g.n_sub_[r.left], nc = g.n_sub_[r.right];
      const int ob = n_sub_[r.left], oc = n_sub_[r.right];
      const double share = 1.0 / (static_cast<double>(kl) * kr);
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
          for (int c = 0; c < nc; ++c)
            dst[(static_cast<std::size_t>(a) * nb + b) * nc + c] =
                src[(static_cast<std::size_t>(a / kp) * ob + b / kl) * oc + c / kr] * share;
    }
    for (const auto& r : unary_) {
      const int idx = g.add_unary(r.parent, r.child);
      auto dst = g.probs(g.unary_[idx]);
      auto src = probs(r);
      const int kp = ratio(r.parent), kc = ratio(r.child);
      const int na = g.n_sub_[r.parent], nb = g.n_sub_[r.child], ob = n_sub_[r.child];
      const double share = 1.0 / kc;
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
          dst[static_cast<std::size_t>(a) * nb + b] = src[static_cast<std::size_t>(a / kp) * ob + b / kc] * share;
    }
    for (const auto& r : lexical_) {
      const int idx = g.add_lexical(r.tag, r.word);
      auto dst = g.probs(g.lexical_[idx]);
      auto src = probs(r);
      const int kp = ratio(r.tag);
      for (std::size_t a = 0; a < dst.size(); ++a) dst[a] = src[a / kp];
    }
    return g;
  }

 private:
  static std::uint64_t pack(int a, int b, int c) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 42) ^
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)) << 21) ^
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(c) & 0x1FFFFF);
  }
  static int find(const std::unordered_map<std::uint64_t, int>& m, std::uint64_t key) {
    auto it = m.find(key);
    return it == m.end() ? -1 : it->second;
  }
  std::size_t allocate(std::size_t n) {
    const std::size_t off = params_.size();
    params_.resize(off + n, 0.0);
    return off;
  }
  void rebuild_offsets() {
    split_offset_.assign(names_.size() + 1, 0);
    for (std::size_t i = 0; i < names_.size(); ++i) split_offset_[i + 1] = split_offset_[i] + n_sub_[i];
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> symbol_index_;
  std::vector<int> n_sub_;
  std::vector<int> split_offset_;
  int start_ = -1;
  bool wrapped_root_ = false;

  std::vector<std::string> words_;
  std::vector<bool> is_signature_;
  std::unordered_map<std::string, int> word_index_;
  std::unordered_map<std::string, int> signature_index_;

  std::vector<BinaryRule> binary_;
  std::vector<UnaryRule> unary_;
  std::vector<LexicalRule> lexical_;
  std::unordered_map<std::uint64_t, int> binary_index_;
  std::unordered_map<std::uint64_t, int> unary_index_;
  std::unordered_map<std::uint64_t, int> lexical_index_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Extraction

struct ExtractOptions {
  int rare_threshold = kDefaultRareThreshold;
  /// Add the synthetic start symbol above each tree. Ignored (treated as
  /// false) when every tree is already rooted in the start symbol.
  bool wrap_root = true;
};

namespace detail {

inline void count_nodes(const Tree& t, std::map<std::string, std::size_t>& labels) {
  if (t.is_leaf()) return;
  ++labels[t.label];
  for (const auto& c : t.children) count_nodes(c, labels);
}

inline void check_binary(const Tree& t, std::size_t index) {
  if (t.children.size() > 2) {
    throw GrammarError(GrammarErrorKind::NonBinaryTree,
                       "tree " + std::to_string(index) + " has a node '" + t.label + "' with " +
                           std::to_string(t.children.size()) + " children; binarize first",
                       index);
  }
  for (const auto& c : t.children) check_binary(c, index);
}

}  // namespace detail

/// Surface counts over a treebank.
inline std::unordered_map<std::string, std::size_t> word_counts(const Treebank& tb) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : tb.trees)
    for_each_preterminal(t, [&](const Tree& pt) { ++counts[pt.children.front().token.surface]; });
  return counts;
}

/// Decides whether the trees get the synthetic start symbol on top.
inline bool needs_root_wrapper(const Treebank& tb) {
  std::size_t rooted = 0;
  for (std::size_t i = 0; i < tb.size(); ++i) {
    const Tree& t = tb.trees[i];
    std::map<std::string, std::size_t> labels;
    detail::count_nodes(t, labels);
    const std::size_t uses = labels.count(std::string(kStartSymbol)) ? labels[std::string(kStartSymbol)] : 0;
    const bool root_is_start = t.label == kStartSymbol;
    if (uses > (root_is_start ? 1u : 0u)) {
      throw GrammarError(GrammarErrorKind::ReservedSymbol,
                         "tree " + std::to_string(i) + " uses '" + std::string(kStartSymbol) +
                             "' below its root",
                         i);
    }
    if (root_is_start) ++rooted;
  }
  if (rooted != 0 && rooted != tb.size()) {
    throw GrammarError(GrammarErrorKind::ReservedSymbol,
                       "some but not all trees are rooted in '" + std::string(kStartSymbol) + "'");
  }
  return rooted == 0;
}

/// Relative-frequency PCFG of a binarized treebank. Surfaces seen fewer than
/// `rare_threshold` times are replaced by their signature.
inline Grammar extract_pcfg(const Treebank& tb, const ExtractOptions& opt = {}) {
  if (tb.trees.empty()) throw GrammarError(GrammarErrorKind::EmptyTreebank, "empty treebank");
  for (std::size_t i = 0; i < tb.size(); ++i) detail::check_binary(tb.trees[i], i);
  const bool wrap = opt.wrap_root && needs_root_wrapper(tb);

  Grammar g;
  g.rare_threshold = opt.rare_threshold;
  const auto counts = word_counts(tb);
  std::map<std::string, std::size_t> root_counts;

  // counts per rule, stored directly in the parameter tensors (all unsplit)
  auto visit = [&](auto&& self, const Tree& t) -> int {
    const int sym = g.add_symbol(t.label);
    if (t.is_preterminal()) {
      const std::string& w = t.children.front().token.surface;
      const bool rare = counts.at(w) < static_cast<std::size_t>(opt.rare_threshold);
      const int wid = rare ? g.add_word(unknown_signature(w), true) : g.add_word(w);
      g.probs(g.lexical()[g.add_lexical(sym, wid)])[0] += 1.0;
      return sym;
    }
    if (t.children.size() == 1) {
      const int c = self(self, t.children[0]);
      g.probs(g.unary()[g.add_unary(sym, c)])[0] += 1.0;
    } else {
      const int l = self(self, t.children[0]);
      const int r = self(self, t.children[1]);
      g.probs(g.binary()[g.add_binary(sym, l, r)])[0] += 1.0;
    }
    return sym;
  };

  if (wrap) g.set_start(g.add_symbol(std::string(kStartSymbol)));
  for (const auto& t : tb.trees) {
    const int root = visit(visit, t);
    ++root_counts[t.label];
    if (wrap) g.probs(g.unary()[g.add_unary(g.start(), root)])[0] += 1.0;
  }
  if (!wrap) g.set_start(g.symbol(kStartSymbol));
  g.set_wrapped_root(wrap);
  if (!wrap) {
    // Trees are rooted in the start symbol: fall back to its commonest child.
    std::map<std::string, std::size_t> kids;
    for (const auto& t : tb.trees)
      if (t.children.size() == 1 && !t.is_preterminal()) ++kids[t.children.front().label];
    root_counts = kids.empty() ? root_counts : kids;
  }
  g.fallback_root = std::max_element(root_counts.begin(), root_counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; })
                        ->first;
  g.normalize();
  return g;
}

// ---------------------------------------------------------------------------
// Splitting

/// Splits every nonterminal except the start symbol in two and perturbs each
/// tensor entry by a factor (1 + e), e ~ U[-noise, noise], before
/// renormalizing.
inline Grammar split_symbols(const Grammar& g, int factor, double noise, std::uint64_t seed) {
  if (factor != 2) throw GrammarError(GrammarErrorKind::BadFactor, "split factor must be 2");
  if (!(noise >= 0.0 && noise < 0.5))
    throw GrammarError(GrammarErrorKind::BadNoise, "noise must lie in [0, 0.5)");
  Grammar out = g.with_symbols_split(factor);
  if (noise > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> eps(-noise, noise);
    for (auto& p : out.params()) p *= 1.0 + eps(rng);
  }
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline void save_grammar(const Grammar& g, std::ostream& os) {
  // Split names must be unique for the file to be loadable.
  {
    std::unordered_map<std::string, int> seen;
    for (int s = 0; s < g.n_symbols(); ++s)
      for (int a = 0; a < g.n_sub(s); ++a)
        if (!seen.emplace(g.split_name(s, a), s).second)
          throw GrammarError(GrammarErrorKind::NameCollision,
                             "split name '" + g.split_name(s, a) + "' is ambiguous");
  }
  os << std::setprecision(17);
  os << "lgparse-grammar 1\n"
     << "start " << g.name(g.start()) << '\n'
     << "wrapped_root " << (g.wrapped_root() ? 1 : 0) << '\n'
     << "rare_threshold " << g.rare_threshold << '\n'
     << "markov " << g.h_markov << ' ' << g.v_markov << '\n'
     << "split_rounds " << g.n_split_rounds << '\n'
     << "fallback_root " << (g.fallback_root.empty() ? g.name(g.start()) : g.fallback_root) << '\n';
  os << "NONTERMS\n";
  for (int s = 0; s < g.n_symbols(); ++s) {
    os << g.name(s) << ' ' << g.n_sub(s);
    if (!g.sub_weights.empty())
      for (int a = 0; a < g.n_sub(s); ++a) os << ' ' << g.sub_weights[g.flat(s, a)];
    os << '\n';
  }
  os << "BINARY\n";
  for (const auto& r : g.binary()) {
    auto p = g.probs(r);
    const int nb = g.n_sub(r.left), nc = g.n_sub(r.right);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const int a = static_cast<int>(i / (nb * nc)), b = static_cast<int>(i / nc % nb), c = static_cast<int>(i % nc);
      os << g.split_name(r.parent, a) << ' ' << g.split_name(r.left, b) << ' '
         << g.split_name(r.right, c) << ' ' << p[i] << '\n';
    }
  }
  os << "UNARY\n";
  for (const auto& r : g.unary()) {
    auto p = g.probs(r);
    const int nb = g.n_sub(r.child);
    for (std::size_t i = 0; i < p.size(); ++i)
      os << g.split_name(r.parent, static_cast<int>(i / nb)) << ' '
         << g.split_name(r.child, static_cast<int>(i % nb)) << ' ' << p[i] << '\n';
  }
  os << "LEXICAL\n";
  for (const auto& r : g.lexical()) {
    auto p = g.probs(r);
    for (std::size_t a = 0; a < p.size(); ++a)
      os << g.split_name(r.tag, static_cast<int>(a)) << ' ' << (g.is_signature(r.word) ? "sig " : "word ")
         << g.word_string(r.word) << ' ' << p[a] << '\n';
  }
  os << "END\n";
}

inline std::string save_grammar(const Grammar& g) {
  std::ostringstream os;
  save_grammar(g, os);
  return os.str();
}

inline void save_grammar_file(const Grammar& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GrammarError(GrammarErrorKind::Io, "cannot write " + path);
  save_grammar(g, out);
}

inline Grammar load_grammar(std::istream& in) {
  Grammar g;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw GrammarError(GrammarErrorKind::Malformed, "grammar line " + std::to_string(lineno) + ": " + msg,
                       lineno);
  };
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };
  if (!next() || line != "lgparse-grammar 1") fail("bad header");
  std::string start_name;
  bool wrapped = false;
  std::unordered_map<std::string, std::pair<int, int>> split;  // split name -> (symbol, sub)
  enum class Section { Header, Nonterms, Binary, Unary, Lexical, End } section = Section::Header;
  auto parse_prob = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) fail("bad probability '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad probability '" + s + "'");
    }
    return 0.0;
  };
  auto resolve = [&](const std::string& n) {
    auto it = split.find(n);
    if (it == split.end()) fail("unknown symbol '" + n + "'");
    return it->second;
  };
  while (next()) {
    if (line == "NONTERMS") { section = Section::Nonterms; continue; }
    if (line == "BINARY") { section = Section::Binary; continue; }
    if (line == "UNARY") { section = Section::Unary; continue; }
    if (line == "LEXICAL") { section = Section::Lexical; continue; }
    if (line == "END") { section = Section::End; break; }
    std::istringstream is(line);
    std::vector<std::string> f;
    for (std::string x; is >> x;) f.push_back(x);
    if (f.empty()) continue;
    switch (section) {
      case Section::Header:
        if (f.size() < 2) fail("bad header field");
        if (f[0] == "start") start_name = f[1];
        else if (f[0] == "wrapped_root") wrapped = f[1] == "1";
        else if (f[0] == "rare_threshold") g.rare_threshold = std::stoi(f[1]);
        else if (f[0] == "markov" && f.size() == 3) { g.h_markov = std::stoi(f[1]); g.v_markov = std::stoi(f[2]); }
        else if (f[0] == "split_rounds") g.n_split_rounds = std::stoi(f[1]);
        else if (f[0] == "fallback_root") g.fallback_root = f[1];
        else fail("unknown header field '" + f[0] + "'");
        break;
      case Section::Nonterms: {
        if (f.size() < 2) fail("expected 'name n_sub [weights]'");
        const int n = std::stoi(f[1]);
        if (n < 1) fail("n_sub must be positive");
        const int s = g.add_symbol(f[0], n);
        for (int a = 0; a < n; ++a) split.emplace(g.split_name(s, a), std::pair{s, a});
        if (f.size() == static_cast<std::size_t>(2 + n)) {
          for (int a = 0; a < n; ++a) g.sub_weights.push_back(parse_prob(f[2 + a]));
        } else if (f.size() != 2) {
          fail("wrong number of sub weights");
        }
        break;
      }
      case Section::Binary: {
        if (f.size() != 4) fail("expected 'A B C p'");
        const auto [pa, a] = resolve(f[0]);
        const auto [pb, b] = resolve(f[1]);
        const auto [pc, c] = resolve(f[2]);
        const auto& r = g.binary()[g.add_binary(pa, pb, pc)];
        g.probs(r)[(static_cast<std::size_t>(a) * g.n_sub(pb) + b) * g.n_sub(pc) + c] = parse_prob(f[3]);
        break;
      }
      case Section::Unary: {
        if (f.size() != 3) fail("expected 'A B p'");
        const auto [pa, a] = resolve(f[0]);
        const auto [pb, b] = resolve(f[1]);
        const auto& r = g.unary()[g.add_unary(pa, pb)];
        g.probs(r)[static_cast<std::size_t>(a) * g.n_sub(pb) + b] = parse_prob(f[2]);
        break;
      }
      case Section::Lexical: {
        if (f.size() != 4 || (f[1] != "word" && f[1] != "sig")) fail("expected 'T word|sig w p'");
        const auto [pt, t] = resolve(f[0]);
        const int w = g.add_word(f[2], f[1] == "sig");
        const auto& r = g.lexical()[g.add_lexical(pt, w)];
        g.probs(r)[t] = parse_prob(f[3]);
        break;
      }
      case Section::End: break;
    }
  }
  if (section != Section::End) fail("missing END");
  if (!g.sub_weights.empty() && static_cast<int>(g.sub_weights.size()) != g.n_split_symbols())
    fail("sub weights missing for some symbols");
  const int s = g.symbol(start_name);
  if (s < 0) fail("unknown start symbol '" + start_name + "'");
  g.set_start(s);
  g.set_wrapped_root(wrapped);
  return g;
}

inline Grammar load_grammar(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_grammar(in);
}

inline Grammar load_grammar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GrammarError(GrammarErrorKind::Io, "cannot open " + path);
  return load_grammar(in);
}

/// Collapses latent subsymbols into a base PCFG, weighting each subsymbol by
/// its expected occupancy (uniform when the grammar carries none).
inline Grammar project_to_base(const Grammar& g) {
  Grammar out;
  for (int s = 0; s < g.n_symbols(); ++s) out.add_symbol(g.name(s), 1);
  for (int w = 0; w < g.n_words(); ++w) out.add_word(g.word_string(w), g.is_signature(w));
  out.set_start(g.start());
  out.set_wrapped_root(g.wrapped_root());
  out.rare_threshold = g.rare_threshold;
  out.h_markov = g.h_markov;
  out.v_markov = g.v_markov;
  out.fallback_root = g.fallback_root;
  auto weight = [&](int s, int a) {
    return g.sub_weights.empty() ? 1.0 : g.sub_weights[g.flat(s, a)];
  };
  for (const auto& r : g.binary()) {
    auto p = g.probs(r);
    const std::size_t row = static_cast<std::size_t>(g.n_sub(r.left)) * g.n_sub(r.right);
    double total = 0;
    for (std::size_t i = 0; i < p.size(); ++i) total += weight(r.parent, static_cast<int>(i / row)) * p[i];
    out.probs(out.binary()[out.add_binary(r.parent, r.left, r.right)])[0] = total;
  }
  for (const auto& r : g.unary()) {
    auto p = g.probs(r);
    const std::size_t row = g.n_sub(r.child);
    double total = 0;
    for (std::size_t i = 0; i < p.size(); ++i) total += weight(r.parent, static_cast<int>(i / row)) * p[i];
    out.probs(out.unary()[out.add_unary(r.parent, r.child)])[0] = total;
  }
  for (const auto& r : g.lexical()) {
    auto p = g.probs(r);
    double total = 0;
    for (std::size_t a = 0; a < p.size(); ++a) total += weight(r.tag, static_cast<int>(a)) * p[a];
    out.probs(out.lexical()[out.add_lexical(r.tag, r.word)])[0] = total;
  }
  out.normalize();
  return out;
}

}  // namespace lgparse
