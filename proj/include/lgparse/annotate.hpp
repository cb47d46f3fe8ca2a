#pragma once

// Lexicon-driven refinement of pre-terminal tags.
//
// Three strategies rewrite a target tag T of a token whose lookup key (lemma,
// else surface) is in the lexicon:
//   table   T_<t1>_<t2>...   table ids of the lemma, if 1 <= count <= max_amb
//   hier    T_<c1>_<c2>...   hierarchy classes at `level`, same bound
//   member  T_IN             lemma present in any table of the category
// Ids and classes are joined in natural order, so "6" precedes "12".

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lgparse/error.hpp"
#include "lgparse/lexicon.hpp"
#include "lgparse/tree.hpp"

namespace lgparse {

inline constexpr std::string_view kSuffixSeparator = "_";
inline constexpr std::string_view kMembershipSuffix = "IN";

enum class AnnotateErrorKind {
  MissingHierarchy,
  ReservedSeparator,
  OverlappingTargets,
  AmbiguousStrip,
  MisalignedTreebanks,
  InvalidConfig,
};
using AnnotateError = KindedError<AnnotateErrorKind>;

enum class Method { Table, Hierarchy, Membership };

inline std::string_view method_code(Method m) {
  switch (m) {
    case Method::Table: return "table";
    case Method::Hierarchy: return "hier";
    case Method::Membership: return "member";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "table") return Method::Table;
  if (s == "hier") return Method::Hierarchy;
  if (s == "member") return Method::Membership;
  return std::nullopt;
}

inline std::string_view method_display_name(Method m) {
  switch (m) {
    case Method::Table: return "AnnotTable";
    case Method::Hierarchy: return "AnnotHierarchy";
    case Method::Membership: return "AnnotMembership";
  }
  return "?";
}

/// The six mood-bearing verb tags and two noun tags of the usual French
/// Treebank tagset.
inline std::set<std::string> default_target_tags(Category c) {
  if (c == Category::Verb) return {"V", "VIMP", "VINF", "VPP", "VPR", "VS"};
  return {"NC", "NPP"};
}

struct StrategyConfig {
  Method method = Method::Hierarchy;
  Category category = Category::Verb;
  int level = 0;
  int max_ambiguity = 1;
  std::set<std::string> target_tags;

  /// Throws InvalidConfig when the fields are inconsistent.
  void validate(const Hierarchy* h = nullptr) const {
    if (max_ambiguity < 1)
      throw AnnotateError(AnnotateErrorKind::InvalidConfig, "max_amb must be >= 1");
    if (target_tags.empty())
      throw AnnotateError(AnnotateErrorKind::InvalidConfig, "target tag set is empty");
    if (method == Method::Hierarchy) {
      if (level < 0 || level > max_level(category)) {
        throw AnnotateError(AnnotateErrorKind::InvalidConfig,
                            "level " + std::to_string(level) + " invalid for category " +
                                std::string(category_code(category)));
      }
      if (h && h->category() != category) {
        throw AnnotateError(AnnotateErrorKind::InvalidConfig,
                            "hierarchy category does not match strategy category");
      }
      if (h && level >= h->n_levels()) {
        throw AnnotateError(AnnotateErrorKind::InvalidConfig,
                            "hierarchy has no level " + std::to_string(level));
      }
    }
  }

  /// Flat key=value block, one pair per line.
  std::string to_kv() const {
    std::ostringstream os;
    os << "method=" << method_code(method) << '\n'
       << "category=" << category_code(category) << '\n'
       << "level=" << level << '\n'
       << "max_amb=" << max_ambiguity << '\n'
       << "targets=";
    bool first = true;
    for (const auto& t : target_tags) {
      os << (first ? "" : ",") << t;
      first = false;
    }
    os << '\n';
    return os.str();
  }

  /// Short label such as "3/1" (level/ambiguity) or "-/1".
  std::string level_amb_label() const {
    if (method == Method::Membership) return "-/-";
    const std::string lvl = method == Method::Hierarchy ? std::to_string(level) : "-";
    return lvl + "/" + std::to_string(max_ambiguity);
  }

  bool operator==(const StrategyConfig&) const = default;
};

/// Parses the key=value form produced by `to_kv`. Unknown keys are returned
/// in `extra` when provided (used by the CLI for file paths), else rejected.
inline StrategyConfig parse_strategy_kv(std::string_view text,
                                        std::map<std::string, std::string>* extra = nullptr) {
  StrategyConfig cfg;
  bool have_targets = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view l = detail::trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos)
      throw AnnotateError(AnnotateErrorKind::InvalidConfig, "expected key=value: " + line);
    const std::string key(detail::trim(l.substr(0, eq)));
    const std::string value(detail::trim(l.substr(eq + 1)));
    try {
      if (key == "method") {
        auto m = parse_method(value);
        if (!m) throw AnnotateError(AnnotateErrorKind::InvalidConfig, "bad method '" + value + "'");
        cfg.method = *m;
      } else if (key == "category") {
        auto c = parse_category(value);
        if (!c) throw AnnotateError(AnnotateErrorKind::InvalidConfig, "bad category '" + value + "'");
        cfg.category = *c;
      } else if (key == "level") {
        cfg.level = std::stoi(value);
      } else if (key == "max_amb") {
        cfg.max_ambiguity = std::stoi(value);
      } else if (key == "targets") {
        have_targets = true;
        std::istringstream ts(value);
        std::string tag;
        while (std::getline(ts, tag, ','))
          if (!tag.empty()) cfg.target_tags.insert(tag);
      } else if (extra) {
        (*extra)[key] = value;
      } else {
        throw AnnotateError(AnnotateErrorKind::InvalidConfig, "unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw AnnotateError(AnnotateErrorKind::InvalidConfig, "bad integer for '" + key + "'");
    }
  }
  if (!have_targets) cfg.target_tags = default_target_tags(cfg.category);
  return cfg;
}

/// One annotation pass: a strategy plus the resources it reads.
struct AnnotationStep {
  StrategyConfig config;
  const Lexicon* lexicon = nullptr;
  const Hierarchy* hierarchy = nullptr;
};

/// Suffix the strategy assigns to a lookup key, or "" when the tag stays.
inline std::string annotation_suffix(const StrategyConfig& cfg, const Lexicon& lex,
                                     const Hierarchy* h, const std::string& key) {
  switch (cfg.method) {
    case Method::Table: {
      const ClassSet& tables = lex.tables(key, cfg.category);
      if (tables.empty() || tables.size() > static_cast<std::size_t>(cfg.max_ambiguity)) return {};
      return join(tables, kSuffixSeparator);
    }
    case Method::Hierarchy: {
      const ClassSet classes = classes_for(lex, *h, key, cfg.category, cfg.level);
      if (classes.empty() || classes.size() > static_cast<std::size_t>(cfg.max_ambiguity)) return {};
      return join(classes, kSuffixSeparator);
    }
    case Method::Membership:
      return lex.contains(key, cfg.category) ? std::string(kMembershipSuffix) : std::string{};
  }
  return {};
}

namespace detail {

inline bool has_prefix_with_separator(std::string_view tag, std::string_view base) {
  return tag.size() > base.size() + kSuffixSeparator.size() &&
         tag.substr(0, base.size()) == base &&
         tag.substr(base.size(), kSuffixSeparator.size()) == kSuffixSeparator;
}

}  // namespace detail

inline Treebank annotate(const Treebank& tb, const Lexicon& lex, const Hierarchy* h,
                         const StrategyConfig& cfg) {
  if (cfg.method == Method::Hierarchy && !h) {
    throw AnnotateError(AnnotateErrorKind::MissingHierarchy,
                        "hierarchy strategy requires a hierarchy");
  }
  cfg.validate(h);
  for (const auto& tag : collect_tagset(tb)) {
    for (const auto& base : cfg.target_tags) {
      if (detail::has_prefix_with_separator(tag, base)) {
        throw AnnotateError(AnnotateErrorKind::ReservedSeparator,
                            "tag '" + tag + "' already extends target tag '" + base +
                                "' with '_'; stripping would be ambiguous");
      }
    }
  }
  Treebank out = tb;
  std::map<std::string, std::string> memo;
  for (auto& t : out.trees) {
    for_each_preterminal(t, [&](Tree& pt) {
      if (!cfg.target_tags.count(pt.label)) return;
      const std::string& key = pt.children.front().token.key();
      auto it = memo.find(key);
      if (it == memo.end()) it = memo.emplace(key, annotation_suffix(cfg, lex, h, key)).first;
      if (!it->second.empty()) pt.label += std::string(kSuffixSeparator) + it->second;
    });
  }
  return out;
}

inline Treebank annotate(const Treebank& tb, const AnnotationStep& step) {
  return annotate(tb, *step.lexicon, step.hierarchy, step.config);
}

inline void check_disjoint_targets(const std::vector<AnnotationStep>& steps) {
  std::set<std::string> seen;
  for (const auto& s : steps) {
    for (const auto& t : s.config.target_tags) {
      if (!seen.insert(t).second) {
        throw AnnotateError(AnnotateErrorKind::OverlappingTargets,
                            "target tag '" + t + "' is claimed by two strategies");
      }
    }
  }
}

/// Applies each step in turn; target tag sets must be pairwise disjoint.
inline Treebank combine(const Treebank& tb, const std::vector<AnnotationStep>& steps) {
  check_disjoint_targets(steps);
  Treebank out = tb;
  for (const auto& s : steps) out = annotate(out, s);
  return out;
}

inline Treebank combine(const Treebank& tb, const Lexicon& lex_v, const Hierarchy* h_v,
                        const StrategyConfig& cfg_v, const Lexicon& lex_n,
                        const Hierarchy* h_n, const StrategyConfig& cfg_n) {
  return combine(tb, {{cfg_v, &lex_v, h_v}, {cfg_n, &lex_n, h_n}});
}

inline std::set<std::string> union_targets(const std::vector<AnnotationStep>& steps) {
  std::set<std::string> out;
  for (const auto& s : steps) out.insert(s.config.target_tags.begin(), s.config.target_tags.end());
  return out;
}

/// Reverts `T_<anything>` to T for each base tag T.
inline std::string strip_tag(const std::string& tag, const std::set<std::string>& base_tags) {
  const std::string* match = nullptr;
  for (const auto& base : base_tags) {
    if (!detail::has_prefix_with_separator(tag, base)) continue;
    if (match) {
      throw AnnotateError(AnnotateErrorKind::AmbiguousStrip,
                          "tag '" + tag + "' extends both '" + *match + "' and '" + base + "'");
    }
    match = &base;
  }
  return match ? *match : tag;
}

inline Tree strip(const Tree& t, const std::set<std::string>& base_tags) {
  Tree out = t;
  for_each_preterminal(out, [&](Tree& pt) { pt.label = strip_tag(pt.label, base_tags); });
  return out;
}

inline Treebank strip(const Treebank& tb, const std::set<std::string>& base_tags) {
  Treebank out = tb;
  for (auto& t : out.trees) t = strip(t, base_tags);
  return out;
}

// ---------------------------------------------------------------------------
// Coverage

struct CoverageReport {
  std::size_t n_distinct_forms = 0;
  std::size_t n_annotated_forms = 0;
  double pct_annotated = 0.0;
  std::size_t tagset_size_before = 0;
  std::size_t tagset_size_after = 0;
};

namespace detail {

inline bool same_shape(const Tree& a, const Tree& b) {
  if (a.children.size() != b.children.size()) return false;
  if (a.is_leaf()) return a.token == b.token;
  if (!a.is_preterminal() && a.label != b.label) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!same_shape(a.children[i], b.children[i])) return false;
  return true;
}

}  // namespace detail

/// Share of distinct lookup keys under target tags whose tag was rewritten.
inline CoverageReport coverage(const Treebank& before, const Treebank& after,
                               const std::set<std::string>& target_tags) {
  if (before.size() != after.size()) {
    throw AnnotateError(AnnotateErrorKind::MisalignedTreebanks, "treebank sizes differ");
  }
  std::set<std::string> forms, annotated;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (!detail::same_shape(before.trees[i], after.trees[i])) {
      throw AnnotateError(AnnotateErrorKind::MisalignedTreebanks,
                          "tree " + std::to_string(i) + " differs beyond its tags", i);
    }
    const auto tags_b = tags_of(before.trees[i]);
    const auto tags_a = tags_of(after.trees[i]);
    const auto toks = tokens_of(before.trees[i]);
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (!target_tags.count(tags_b[j])) continue;
      forms.insert(toks[j].key());
      if (tags_a[j] != tags_b[j]) annotated.insert(toks[j].key());
    }
  }
  CoverageReport r;
  r.n_distinct_forms = forms.size();
  r.n_annotated_forms = annotated.size();
  r.pct_annotated = forms.empty() ? 0.0 : 100.0 * static_cast<double>(annotated.size()) /
                                              static_cast<double>(forms.size());
  r.tagset_size_before = collect_tagset(before).size();
  r.tagset_size_after = collect_tagset(after).size();
  return r;
}

}  // namespace lgparse
