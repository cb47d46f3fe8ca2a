#pragma once

// Syntactic lexicon (lemma -> table ids) and the table hierarchy.
//
// Lexicon file: UTF-8 TSV, one `lemma<TAB>V|N<TAB>table_id` per line; blank
// lines and lines starting with '#' are ignored.
//
// Hierarchy file:
//
//     # comment
//     category: V
//     tables: 4 6 12 ...          (may repeat; ids accumulate)
//     level 1:
//     4<TAB>QTD2
//     6<TAB>QTD2
//     level 2:
//     ...
//
// Level 0 is implicit (identity over the `tables:` universe). Each level k>=1
// maps a subset of the universe to class names; the mapped set of level k+1
// must be contained in that of level k, and classes must nest (two tables
// sharing a class at level k share one at level k+1).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lgparse/error.hpp"

namespace lgparse {

enum class Category { Verb, Noun };

inline std::string_view category_code(Category c) { return c == Category::Verb ? "V" : "N"; }

inline std::optional<Category> parse_category(std::string_view s) {
  if (s == "V") return Category::Verb;
  if (s == "N") return Category::Noun;
  return std::nullopt;
}

/// Maximum hierarchy level per category.
inline int max_level(Category c) { return c == Category::Verb ? 3 : 1; }

/// Orders strings with embedded digit runs compared numerically, so that
/// table "6" sorts before "12" and "35LR" after "35".
struct NaturalLess {
  bool operator()(std::string_view a, std::string_view b) const {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
      const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
      if (da && db) {
        std::size_t ie = i, je = j;
        while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
        while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
        std::string_view na = a.substr(i, ie - i), nb = b.substr(j, je - j);
        while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
        while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
        if (na.size() != nb.size()) return na.size() < nb.size();
        if (na != nb) return na < nb;
        // Equal value: fewer leading zeros first keeps the order total.
        if (ie - i != je - j) return ie - i < je - j;
        i = ie;
        j = je;
      } else {
        if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) < static_cast<unsigned char>(b[j]);
        ++i;
        ++j;
      }
    }
    return a.size() - i < b.size() - j;
  }
};

using ClassSet = std::set<std::string, NaturalLess>;

inline std::string join(const ClassSet& s, std::string_view sep) {
  std::string out;
  for (const auto& x : s) {
    if (!out.empty()) out += sep;
    out += x;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

enum class LexiconErrorKind { BadCategory, MalformedLine, Io };
using LexiconError = KindedError<LexiconErrorKind>;

struct LexEntry {
  std::string lemma;
  Category category;
  std::string table_id;

  auto operator<=>(const LexEntry&) const = default;
};

class Lexicon {
 public:
  using Key = std::pair<std::string, Category>;

  /// Adds an entry; duplicate triples are stored once.
  void add(LexEntry e) {
    if (e.lemma.empty() || e.table_id.empty())
      throw LexiconError(LexiconErrorKind::MalformedLine, "empty lemma or table id");
    index_[{e.lemma, e.category}].insert(e.table_id);
  }

  /// Table ids of (lemma, category); empty when unknown.
  const ClassSet& tables(const std::string& lemma, Category c) const {
    static const ClassSet kEmpty;
    auto it = index_.find({lemma, c});
    return it == index_.end() ? kEmpty : it->second;
  }

  bool contains(const std::string& lemma, Category c) const { return index_.count({lemma, c}) > 0; }

  /// Distinct (lemma, category) pairs of the given category.
  std::size_t n_forms(Category c) const {
    std::size_t n = 0;
    for (const auto& [k, v] : index_)
      if (k.second == c) ++n;
    return n;
  }
  /// Distinct (lemma, category, table) triples of the given category.
  std::size_t n_entries(Category c) const {
    std::size_t n = 0;
    for (const auto& [k, v] : index_)
      if (k.second == c) n += v.size();
    return n;
  }

  const std::map<Key, ClassSet>& index() const { return index_; }

  std::vector<LexEntry> entries() const {
    std::vector<LexEntry> out;
    for (const auto& [k, v] : index_)
      for (const auto& t : v) out.push_back({k.first, k.second, t});
    return out;
  }

 private:
  std::map<Key, ClassSet> index_;
};

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline Lexicon parse_lexicon(std::istream& in) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line.front() == '#') continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[2].empty()) {
      throw LexiconError(LexiconErrorKind::MalformedLine,
                         "line " + std::to_string(lineno) + ": expected lemma<TAB>V|N<TAB>table",
                         lineno);
    }
    const auto cat = parse_category(fields[1]);
    if (!cat) {
      throw LexiconError(LexiconErrorKind::BadCategory,
                         "line " + std::to_string(lineno) + ": bad category '" + fields[1] + "'",
                         lineno);
    }
    lex.add({fields[0], *cat, fields[2]});
  }
  return lex;
}

inline Lexicon parse_lexicon(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_lexicon(in);
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError(LexiconErrorKind::Io, "cannot open " + path);
  return parse_lexicon(in);
}

// ---------------------------------------------------------------------------
// Hierarchy

enum class HierarchyErrorKind {
  UnknownTableAtLevel,
  EmptyLevel,
  BadLevel,
  NotNested,
  Malformed,
  CategoryMismatch,
  Io,
};
using HierarchyError = KindedError<HierarchyErrorKind>;

class Hierarchy {
 public:
  Hierarchy() = default;

  /// `levels[k-1]` is the level-k map. Validates every invariant.
  Hierarchy(Category category, ClassSet tables,
            std::vector<std::map<std::string, std::string, NaturalLess>> levels)
      : category_(category), tables_(std::move(tables)) {
    if (static_cast<int>(levels.size()) > max_level(category_)) {
      throw HierarchyError(HierarchyErrorKind::BadLevel,
                           "category " + std::string(category_code(category_)) + " allows at most " +
                               std::to_string(max_level(category_)) + " levels above 0");
    }
    std::map<std::string, std::string, NaturalLess> identity;
    for (const auto& t : tables_) identity.emplace(t, t);
    levels_.push_back(std::move(identity));
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const int level = static_cast<int>(k) + 1;
      if (levels[k].empty()) {
        throw HierarchyError(HierarchyErrorKind::EmptyLevel,
                             "level " + std::to_string(level) + " is empty", level);
      }
      for (const auto& [table, cls] : levels[k]) {
        if (!tables_.count(table)) {
          throw HierarchyError(HierarchyErrorKind::UnknownTableAtLevel,
                               "level " + std::to_string(level) + " references unknown table '" +
                                   table + "'",
                               level);
        }
        if (cls.empty()) {
          throw HierarchyError(HierarchyErrorKind::Malformed,
                               "empty class name for table '" + table + "' at level " +
                                   std::to_string(level),
                               level);
        }
      }
      check_nested(levels_.back(), levels[k], level);
      levels_.push_back(std::move(levels[k]));
    }
  }

  Category category() const { return category_; }
  int n_levels() const { return static_cast<int>(levels_.size()); }
  const ClassSet& tables() const { return tables_; }

  const std::map<std::string, std::string, NaturalLess>& level(int k) const {
    check_level(k);
    return levels_[k];
  }

  /// Class of a table at level k, or nullptr when the level does not map it.
  const std::string* class_of(const std::string& table, int k) const {
    check_level(k);
    auto it = levels_[k].find(table);
    return it == levels_[k].end() ? nullptr : &it->second;
  }

  void check_level(int k) const {
    if (k < 0 || k >= n_levels()) {
      throw HierarchyError(HierarchyErrorKind::BadLevel,
                           "level " + std::to_string(k) + " outside [0, " +
                               std::to_string(n_levels()) + ")",
                           static_cast<std::size_t>(k < 0 ? 0 : k));
    }
  }

 private:
  static void check_nested(const std::map<std::string, std::string, NaturalLess>& lower,
                           const std::map<std::string, std::string, NaturalLess>& upper,
                           int level) {
    std::map<std::string, std::string> lower_to_upper;
    for (const auto& [table, cls] : upper) {
      auto lo = lower.find(table);
      if (lo == lower.end()) {
        throw HierarchyError(HierarchyErrorKind::NotNested,
                             "table '" + table + "' mapped at level " + std::to_string(level) +
                                 " but not at level " + std::to_string(level - 1),
                             level);
      }
      auto [it, inserted] = lower_to_upper.emplace(lo->second, cls);
      if (!inserted && it->second != cls) {
        throw HierarchyError(HierarchyErrorKind::NotNested,
                             "class '" + lo->second + "' of level " + std::to_string(level - 1) +
                                 " is split between '" + it->second + "' and '" + cls +
                                 "' at level " + std::to_string(level),
                             level);
      }
    }
    // Every table of a lower class that reaches level `level` must bring all
    // of its siblings with it.
    for (const auto& [table, cls] : lower) {
      if (lower_to_upper.count(cls) && !upper.count(table)) {
        throw HierarchyError(HierarchyErrorKind::NotNested,
                             "table '" + table + "' of class '" + cls + "' unmapped at level " +
                                 std::to_string(level) + " while its siblings are mapped",
                             level);
      }
    }
  }

  Category category_ = Category::Verb;
  ClassSet tables_;
  std::vector<std::map<std::string, std::string, NaturalLess>> levels_;
};

inline Hierarchy parse_hierarchy(std::istream& in) {
  std::optional<Category> category;
  ClassSet tables;
  std::vector<std::map<std::string, std::string, NaturalLess>> levels;
  int current = 0;
  std::string raw;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw HierarchyError(HierarchyErrorKind::Malformed,
                         "hierarchy line " + std::to_string(lineno) + ": " + msg, lineno);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.rfind("category:", 0) == 0) {
      category = parse_category(detail::trim(line.substr(9)));
      if (!category) fail("category must be V or N");
    } else if (line.rfind("tables:", 0) == 0) {
      std::istringstream ids{std::string(line.substr(7))};
      std::string id;
      while (ids >> id) tables.insert(id);
    } else if (line.rfind("level", 0) == 0 && line.back() == ':') {
      const std::string_view num = detail::trim(line.substr(5, line.size() - 6));
      int k = 0;
      auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), k);
      if (ec != std::errc() || p != num.data() + num.size()) fail("bad level header");
      if (k != current + 1) fail("levels must appear in order 1, 2, ...");
      current = k;
      levels.emplace_back();
    } else {
      if (current == 0) fail("mapping line before any 'level k:' header");
      const auto fields = detail::split_tabs(line);
      if (fields.size() != 2) fail("expected table_id<TAB>class_name");
      const std::string table(detail::trim(fields[0]));
      const std::string cls(detail::trim(fields[1]));
      if (table.empty()) fail("empty table id");
      auto [it, inserted] = levels.back().emplace(table, cls);
      if (!inserted && it->second != cls) fail("table '" + table + "' mapped twice");
    }
  }
  if (!category) {
    throw HierarchyError(HierarchyErrorKind::Malformed, "missing 'category:' header");
  }
  if (tables.empty()) {
    throw HierarchyError(HierarchyErrorKind::Malformed, "missing or empty 'tables:' list");
  }
  return Hierarchy(*category, std::move(tables), std::move(levels));
}

inline Hierarchy parse_hierarchy(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_hierarchy(in);
}

inline Hierarchy load_hierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw HierarchyError(HierarchyErrorKind::Io, "cannot open " + path);
  return parse_hierarchy(in);
}

// ---------------------------------------------------------------------------
// Queries

/// Classes at `level` of every table of (lemma, category). Tables outside the
/// hierarchy universe, or unmapped at that level, contribute nothing.
inline ClassSet classes_for(const Lexicon& lex, const Hierarchy& h, const std::string& lemma,
                            Category category, int level) {
  h.check_level(level);
  ClassSet out;
  if (category != h.category()) return out;
  for (const auto& t : lex.tables(lemma, category))
    if (const std::string* cls = h.class_of(t, level)) out.insert(*cls);
  return out;
}

inline std::size_t ambiguity_of(const Lexicon& lex, const Hierarchy& h, const std::string& lemma,
                                Category category, int level) {
  return classes_for(lex, h, lemma, category, level).size();
}

struct HierarchyStats {
  int level = 0;
  std::size_t n_classes = 0;
  /// Distinct forms with at least one class at this level.
  std::size_t n_forms = 0;
  /// Distinct (lemma, class) pairs at this level.
  std::size_t n_entries = 0;
  double avg1 = 0.0;
  double avg2 = 0.0;
};

inline HierarchyStats hierarchy_stats(const Lexicon& lex, const Hierarchy& h, int level) {
  h.check_level(level);
  HierarchyStats s;
  s.level = level;
  std::set<std::string> classes;
  for (const auto& [key, tables] : lex.index()) {
    if (key.second != h.category()) continue;
    const ClassSet c = classes_for(lex, h, key.first, key.second, level);
    if (c.empty()) continue;
    ++s.n_forms;
    s.n_entries += c.size();
    classes.insert(c.begin(), c.end());
  }
  s.n_classes = classes.size();
  s.avg1 = s.n_classes ? static_cast<double>(s.n_entries) / static_cast<double>(s.n_classes) : 0.0;
  s.avg2 = s.n_forms ? static_cast<double>(s.n_entries) / static_cast<double>(s.n_forms) : 0.0;
  return s;
}

}  // namespace lgparse
