#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "lgparse/lexicon.hpp"

using namespace lgparse;

namespace {
const std::string kFixtures = LGPARSE_FIXTURES;
}

TEST(Lexicon, ParsesTableIds) {
  const Lexicon lex = parse_lexicon("chérir\tV\t12\n# comment\n\nsanctionner\tV\t12\nsanctionner\tV\t6\n");
  EXPECT_EQ(lex.tables("chérir", Category::Verb), (ClassSet{"12"}));
  EXPECT_EQ(join(lex.tables("sanctionner", Category::Verb), "_"), "6_12");
  EXPECT_TRUE(lex.tables("chérir", Category::Noun).empty());
  EXPECT_TRUE(lex.tables("absent", Category::Verb).empty());
}

TEST(Lexicon, DeduplicatesAndCounts) {
  const Lexicon lex = parse_lexicon("a\tV\t1\na\tV\t1\na\tV\t2\nb\tV\t2\nb\tN\tx\n");
  EXPECT_EQ(lex.n_forms(Category::Verb), 2u);
  EXPECT_EQ(lex.n_entries(Category::Verb), 3u);
  EXPECT_EQ(lex.n_forms(Category::Noun), 1u);
  EXPECT_EQ(lex.entries().size(), 4u);
}

TEST(Lexicon, RejectsBadLines) {
  try {
    parse_lexicon("a\tV\t1\nb\tX\t2\n");
    FAIL();
  } catch (const LexiconError& e) {
    EXPECT_EQ(e.kind(), LexiconErrorKind::BadCategory);
    EXPECT_EQ(e.where(), 2u);
  }
  try {
    parse_lexicon("a\tV\n");
    FAIL();
  } catch (const LexiconError& e) {
    EXPECT_EQ(e.kind(), LexiconErrorKind::MalformedLine);
  }
}

TEST(Lexicon, NaturalOrder) {
  NaturalLess lt;
  EXPECT_TRUE(lt("6", "12"));
  EXPECT_FALSE(lt("12", "6"));
  EXPECT_TRUE(lt("35", "35LR"));
  EXPECT_TRUE(lt("32R3", "36DT"));
  EXPECT_TRUE(lt("QTD2", "TD2"));
  EXPECT_FALSE(lt("7", "7"));
}

TEST(Hierarchy, FixtureLevels) {
  const Hierarchy h = load_hierarchy(kFixtures + "/verb_hierarchy.txt");
  const Lexicon lex = load_lexicon(kFixtures + "/lexicon.tsv");
  EXPECT_EQ(h.n_levels(), 4);
  EXPECT_EQ(classes_for(lex, h, "sanctionner", Category::Verb, 0), (ClassSet{"6", "12"}));
  EXPECT_EQ(classes_for(lex, h, "sanctionner", Category::Verb, 1), (ClassSet{"QTD2"}));
  EXPECT_EQ(classes_for(lex, h, "sanctionner", Category::Verb, 2), (ClassSet{"QTD2"}));
  EXPECT_EQ(classes_for(lex, h, "sanctionner", Category::Verb, 3), (ClassSet{"TD2"}));
  EXPECT_EQ(ambiguity_of(lex, h, "sanctionner", Category::Verb, 0), 2u);
  EXPECT_EQ(ambiguity_of(lex, h, "sanctionner", Category::Verb, 3), 1u);
  EXPECT_EQ(ambiguity_of(lex, h, "présenter", Category::Verb, 2), 2u);
  EXPECT_EQ(ambiguity_of(lex, h, "présenter", Category::Verb, 3), 1u);
  EXPECT_THROW(h.check_level(4), HierarchyError);
}

TEST(Hierarchy, AmbiguityNeverGrowsWithLevel) {
  const Hierarchy h = load_hierarchy(kFixtures + "/scaled_hierarchy.txt");
  const Lexicon lex = load_lexicon(kFixtures + "/scaled_verbs.tsv");
  for (const auto& [key, tables] : lex.index()) {
    for (int k = 0; k + 1 < h.n_levels(); ++k)
      EXPECT_GE(ambiguity_of(lex, h, key.first, Category::Verb, k),
                ambiguity_of(lex, h, key.first, Category::Verb, k + 1));
  }
}

namespace {
HierarchyErrorKind hierarchy_error(const std::string& text) {
  try {
    parse_hierarchy(text);
  } catch (const HierarchyError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "accepted:\n" << text;
  return HierarchyErrorKind::Io;
}
}  // namespace

TEST(Hierarchy, ValidationErrors) {
  EXPECT_EQ(hierarchy_error("category: V\ntables: 4 6\nlevel 1:\n7\tX\n"), HierarchyErrorKind::UnknownTableAtLevel);
  EXPECT_EQ(hierarchy_error("category: V\ntables: 4 6\nlevel 1:\nlevel 2:\n4\tX\n"), HierarchyErrorKind::EmptyLevel);
  EXPECT_EQ(hierarchy_error("category: N\ntables: a b\nlevel 1:\na\tX\nlevel 2:\na\tY\n"), HierarchyErrorKind::BadLevel);
  EXPECT_EQ(hierarchy_error("category: V\ntables: 4 6 12\nlevel 1:\n4\tA\n6\tA\n12\tB\nlevel 2:\n4\tC\n6\tD\n12\tD\n"),
            HierarchyErrorKind::NotNested);
  EXPECT_EQ(hierarchy_error("category: V\ntables: 4\nlevel 1:\n4\tA\nlevel 2:\n4\tA\n6\tB\n"),
            HierarchyErrorKind::UnknownTableAtLevel);
  EXPECT_EQ(hierarchy_error("tables: 4\n"), HierarchyErrorKind::Malformed);
  EXPECT_EQ(hierarchy_error("category: V\n"), HierarchyErrorKind::Malformed);
  EXPECT_EQ(hierarchy_error("category: V\ntables: 4\n4\tA\n"), HierarchyErrorKind::Malformed);
  EXPECT_EQ(hierarchy_error("category: V\ntables: 4\nlevel 2:\n4\tA\n"), HierarchyErrorKind::Malformed);
}

TEST(Hierarchy, Level0IsIdentity) {
  const Hierarchy h = parse_hierarchy("category: N\ntables: Naa Nan04\n");
  EXPECT_EQ(h.n_levels(), 1);
  EXPECT_EQ(*h.class_of("Naa", 0), "Naa");
  EXPECT_EQ(h.class_of("N9", 0), nullptr);
}

TEST(Hierarchy, StatsMatchIndependentCount) {
  const Hierarchy h = load_hierarchy(kFixtures + "/scaled_hierarchy.txt");
  const Lexicon lex = load_lexicon(kFixtures + "/scaled_verbs.tsv");
  std::ifstream in(kFixtures + "/scaled_expected.json");
  const auto expected = nlohmann::json::parse(in);
  ASSERT_EQ(static_cast<int>(expected.size()), h.n_levels());
  for (const auto& e : expected) {
    const auto s = hierarchy_stats(lex, h, e["level"].get<int>());
    EXPECT_EQ(s.n_classes, e["n_classes"].get<std::size_t>());
    EXPECT_EQ(s.n_forms, e["n_forms"].get<std::size_t>());
    EXPECT_EQ(s.n_entries, e["n_entries"].get<std::size_t>());
    EXPECT_DOUBLE_EQ(s.avg1, e["avg1"].get<double>());
    EXPECT_DOUBLE_EQ(s.avg2, e["avg2"].get<double>());
  }
}

TEST(Hierarchy, Level0Avg2IsMeanTableSetSize) {
  const Hierarchy h = load_hierarchy(kFixtures + "/scaled_hierarchy.txt");
  const Lexicon lex = load_lexicon(kFixtures + "/scaled_verbs.tsv");
  std::map<std::string, std::set<std::string>> recount;
  for (const auto& e : lex.entries()) recount[e.lemma].insert(e.table_id);
  double total = 0;
  for (const auto& [l, ts] : recount) total += static_cast<double>(ts.size());
  EXPECT_DOUBLE_EQ(hierarchy_stats(lex, h, 0).avg2, total / static_cast<double>(recount.size()));
}

TEST(Hierarchy, NounStats) {
  const Hierarchy h = load_hierarchy(kFixtures + "/noun_hierarchy.txt");
  const Lexicon lex = load_lexicon(kFixtures + "/lexicon.tsv");
  const auto s0 = hierarchy_stats(lex, h, 0);
  EXPECT_EQ(s0.n_classes, 3u);
  EXPECT_EQ(s0.n_forms, 3u);
  EXPECT_EQ(s0.n_entries, 4u);
  const auto s1 = hierarchy_stats(lex, h, 1);
  EXPECT_EQ(s1.n_classes, 3u);
  EXPECT_DOUBLE_EQ(s1.avg2, 4.0 / 3.0);
}
