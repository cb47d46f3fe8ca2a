#pragma once

// Constituency trees and the bracketed treebank format.
//
// Format: a sequence of S-expressions `(LABEL child ...)`. A child is either a
// nested tree or a leaf token `surface` / `surface##lemma`. A node whose only
// child is a leaf is a pre-terminal; leaves may not appear next to other
// children.

#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lgparse/error.hpp"

namespace lgparse {

inline constexpr std::string_view kLemmaMarker = "##";

enum class TreebankErrorKind {
  UnbalancedBrackets,
  EmptyLabel,
  LeafUnderPhrase,
  ReservedMarker,
  Io,
};

using TreebankError = KindedError<TreebankErrorKind>;

/// Surface form plus optional lemma, as fed to the parser.
struct Token {
  std::string surface;
  std::optional<std::string> lemma;

  /// Key used for lexicon lookups: the lemma when present, else the surface.
  const std::string& key() const { return lemma ? *lemma : surface; }

  bool operator==(const Token&) const = default;
};

/// A node is a leaf iff it has no children; leaves carry a token and no label.
struct Tree {
  std::string label;
  std::vector<Tree> children;
  Token token;

  static Tree leaf(std::string surface, std::optional<std::string> lemma = std::nullopt) {
    Tree t;
    t.token = Token{std::move(surface), std::move(lemma)};
    return t;
  }
  static Tree node(std::string label, std::vector<Tree> children) {
    Tree t;
    t.label = std::move(label);
    t.children = std::move(children);
    return t;
  }
  static Tree preterminal(std::string tag, std::string surface,
                          std::optional<std::string> lemma = std::nullopt) {
    std::vector<Tree> kids;
    kids.push_back(leaf(std::move(surface), std::move(lemma)));
    return node(std::move(tag), std::move(kids));
  }

  bool is_leaf() const { return children.empty(); }
  bool is_preterminal() const { return children.size() == 1 && children.front().is_leaf(); }

  bool operator==(const Tree&) const = default;
};

struct Treebank {
  std::string id;
  std::vector<Tree> trees;

  std::size_t size() const { return trees.size(); }
  bool operator==(const Treebank& o) const { return trees == o.trees; }
};

// ---------------------------------------------------------------------------
// Traversal helpers

template <typename Fn>
void for_each_preterminal(const Tree& t, Fn&& fn) {
  if (t.is_preterminal()) {
    fn(t);
    return;
  }
  for (const auto& c : t.children) for_each_preterminal(c, fn);
}

template <typename Fn>
void for_each_preterminal(Tree& t, Fn&& fn) {
  if (t.is_preterminal()) {
    fn(t);
    return;
  }
  for (auto& c : t.children) for_each_preterminal(c, fn);
}

inline std::vector<Token> tokens_of(const Tree& t) {
  std::vector<Token> out;
  for_each_preterminal(t, [&](const Tree& pt) { out.push_back(pt.children.front().token); });
  return out;
}

inline std::vector<std::string> tags_of(const Tree& t) {
  std::vector<std::string> out;
  for_each_preterminal(t, [&](const Tree& pt) { out.push_back(pt.label); });
  return out;
}

/// Distinct pre-terminal labels.
inline std::set<std::string> collect_tagset(const Treebank& tb) {
  std::set<std::string> tags;
  for (const auto& t : tb.trees) for_each_preterminal(t, [&](const Tree& pt) { tags.insert(pt.label); });
  return tags;
}

// ---------------------------------------------------------------------------
// Reading

namespace detail {

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  Treebank read_all() {
    Treebank tb;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) break;
      if (text_[pos_] != '(') {
        throw TreebankError(TreebankErrorKind::UnbalancedBrackets,
                            "expected '(' at offset " + std::to_string(pos_), pos_);
      }
      tb.trees.push_back(read_node());
    }
    return tb;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view read_atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) break;
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  Tree read_leaf() {
    const std::size_t at = pos_;
    const std::string_view atom = read_atom();
    const std::size_t mark = atom.find(kLemmaMarker);
    if (mark == std::string_view::npos) return Tree::leaf(std::string(atom));
    const std::string_view surface = atom.substr(0, mark);
    const std::string_view lemma = atom.substr(mark + kLemmaMarker.size());
    if (surface.empty() || lemma.empty()) {
      throw TreebankError(TreebankErrorKind::EmptyLabel,
                          "empty surface or lemma in leaf at offset " + std::to_string(at), at);
    }
    if (lemma.find(kLemmaMarker) != std::string_view::npos) {
      throw TreebankError(TreebankErrorKind::ReservedMarker,
                          "repeated '##' in leaf at offset " + std::to_string(at), at);
    }
    return Tree::leaf(std::string(surface), std::string(lemma));
  }

  Tree read_node() {
    const std::size_t open = pos_;
    ++pos_;  // '('
    skip_space();
    const std::size_t label_at = pos_;
    const std::string_view label = read_atom();
    if (label.empty()) {
      if (pos_ >= text_.size()) {
        throw TreebankError(TreebankErrorKind::UnbalancedBrackets,
                            "unterminated tree opened at offset " + std::to_string(open), open);
      }
      throw TreebankError(TreebankErrorKind::EmptyLabel,
                          "empty label at offset " + std::to_string(label_at), label_at);
    }
    if (label.find(kLemmaMarker) != std::string_view::npos) {
      throw TreebankError(TreebankErrorKind::ReservedMarker,
                          "'##' is reserved and not allowed in label at offset " +
                              std::to_string(label_at),
                          label_at);
    }
    Tree t = Tree::node(std::string(label), {});
    bool saw_leaf = false;
    std::size_t leaf_at = 0;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) {
        throw TreebankError(TreebankErrorKind::UnbalancedBrackets,
                            "unterminated tree opened at offset " + std::to_string(open), open);
      }
      const char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        t.children.push_back(read_node());
      } else {
        if (!saw_leaf) leaf_at = pos_;
        saw_leaf = true;
        t.children.push_back(read_leaf());
      }
    }
    if (t.children.empty()) {
      throw TreebankError(TreebankErrorKind::EmptyLabel,
                          "node without children at offset " + std::to_string(open), open);
    }
    if (saw_leaf && t.children.size() > 1) {
      throw TreebankError(TreebankErrorKind::LeafUnderPhrase,
                          "leaf mixed with other children at offset " + std::to_string(leaf_at),
                          leaf_at);
    }
    return t;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void write_tree(std::ostream& os, const Tree& t) {
  if (t.is_leaf()) {
    os << t.token.surface;
    if (t.token.lemma) os << kLemmaMarker << *t.token.lemma;
    return;
  }
  os << '(' << t.label;
  for (const auto& c : t.children) {
    os << ' ';
    write_tree(os, c);
  }
  os << ')';
}

}  // namespace detail

inline Treebank parse_bracketed(std::string_view text) {
  return detail::BracketReader(text).read_all();
}

inline Tree parse_tree(std::string_view text) {
  Treebank tb = parse_bracketed(text);
  if (tb.trees.size() != 1) {
    throw TreebankError(TreebankErrorKind::UnbalancedBrackets,
                        "expected exactly one tree, got " + std::to_string(tb.trees.size()));
  }
  return std::move(tb.trees.front());
}

inline std::string to_string(const Tree& t) {
  std::ostringstream os;
  detail::write_tree(os, t);
  return os.str();
}

/// One tree per line, each newline-terminated; empty bank gives "".
inline std::string serialize(const Treebank& tb) {
  std::ostringstream os;
  for (const auto& t : tb.trees) {
    detail::write_tree(os, t);
    os << '\n';
  }
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TreebankError(TreebankErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Treebank load_treebank(const std::string& path) {
  Treebank tb = parse_bracketed(read_file(path));
  tb.id = path;
  return tb;
}

inline void save_treebank(const Treebank& tb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TreebankError(TreebankErrorKind::Io, "cannot write " + path);
  out << serialize(tb);
}

/// Parses one whitespace-tokenized sentence of `surface` / `surface##lemma`.
inline std::vector<Token> parse_token_line(std::string_view line) {
  std::vector<Token> out;
  std::istringstream is{std::string(line)};
  std::string atom;
  while (is >> atom) {
    const auto mark = atom.find(kLemmaMarker);
    if (mark == std::string::npos) {
      out.push_back(Token{atom, std::nullopt});
    } else {
      out.push_back(Token{atom.substr(0, mark), atom.substr(mark + kLemmaMarker.size())});
    }
  }
  return out;
}

inline std::string format_token_line(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
    if (tokens[i].lemma) {
      out += kLemmaMarker;
      out += *tokens[i].lemma;
    }
  }
  return out;
}

}  // namespace lgparse
