#include <gtest/gtest.h>

#include "lgparse/tree.hpp"
#include "support/synthetic.hpp"

using namespace lgparse;

TEST(Tree, ParsesLemmaCarryingLeaves) {
  const Tree t = parse_tree("(SENT (NP (DET le) (NC chat##chat)) (VN (V dort##dormir)))");
  EXPECT_EQ(t.label, "SENT");
  const auto toks = tokens_of(t);
  ASSERT_EQ(toks.size(), 3u);
  EXPECT_EQ(toks[0].surface, "le");
  EXPECT_FALSE(toks[0].lemma.has_value());
  EXPECT_EQ(toks[2].surface, "dort");
  EXPECT_EQ(*toks[2].lemma, "dormir");
  EXPECT_EQ(toks[2].key(), "dormir");
  EXPECT_EQ(toks[0].key(), "le");
  EXPECT_EQ(tags_of(t), (std::vector<std::string>{"DET", "NC", "V"}));
}

TEST(Tree, SerializesOneTreePerLine) {
  const Treebank tb = parse_bracketed("(A (B x)) \n\n (A (C y##z))");
  EXPECT_EQ(serialize(tb), "(A (B x))\n(A (C y##z))\n");
  EXPECT_EQ(serialize(Treebank{}), "");
  EXPECT_TRUE(parse_bracketed("  \n").trees.empty());
}

TEST(Tree, CollectsTagset) {
  const Treebank tb = parse_bracketed("(S (NP (DET le) (NC chat)) (VN (V dort)))(S (NC x))");
  EXPECT_EQ(collect_tagset(tb), (std::set<std::string>{"DET", "NC", "V"}));
}

namespace {
TreebankErrorKind error_of(std::string_view text) {
  try {
    parse_bracketed(text);
  } catch (const TreebankError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << text;
  return TreebankErrorKind::Io;
}
}  // namespace

TEST(Tree, ReportsMalformedInput) {
  EXPECT_EQ(error_of("(S (NP (DET le)"), TreebankErrorKind::UnbalancedBrackets);
  EXPECT_EQ(error_of("(S (NP x)))"), TreebankErrorKind::UnbalancedBrackets);
  EXPECT_EQ(error_of("word"), TreebankErrorKind::UnbalancedBrackets);
  EXPECT_EQ(error_of("( (NP x))"), TreebankErrorKind::EmptyLabel);
  EXPECT_EQ(error_of("(S)"), TreebankErrorKind::EmptyLabel);
  EXPECT_EQ(error_of("(S (NP ##le))"), TreebankErrorKind::EmptyLabel);
  EXPECT_EQ(error_of("(S (NP x) y)"), TreebankErrorKind::LeafUnderPhrase);
  EXPECT_EQ(error_of("(S (NP##a x))"), TreebankErrorKind::ReservedMarker);
  EXPECT_EQ(error_of("(S (NP a##b##c))"), TreebankErrorKind::ReservedMarker);
}

TEST(Tree, ErrorCarriesOffset) {
  try {
    parse_bracketed("(S (NP x) y)");
    FAIL();
  } catch (const TreebankError& e) {
    EXPECT_EQ(e.where(), 10u);
  }
}

TEST(Tree, MissingFileIsIoError) {
  try {
    load_treebank("/nonexistent/lgparse.mrg");
    FAIL();
  } catch (const TreebankError& e) {
    EXPECT_EQ(e.kind(), TreebankErrorKind::Io);
  }
}

TEST(Tree, SerializeParseRoundTripRandom) {
  for (std::uint64_t seed = 0; seed < 250; ++seed) {
    const Treebank tb = lgtest::random_treebank(seed, 3);
    const std::string text = serialize(tb);
    EXPECT_EQ(parse_bracketed(text), tb) << text;
    EXPECT_EQ(serialize(parse_bracketed(text)), text);
  }
}

TEST(Tree, TokenLineRoundTrip) {
  const std::vector<Token> toks = {{"Le", std::nullopt}, {"chat", std::string("chat")}, {"dort", std::string("dormir")}};
  const std::string line = format_token_line(toks);
  EXPECT_EQ(line, "Le chat##chat dort##dormir");
  EXPECT_EQ(parse_token_line(line), toks);
  EXPECT_TRUE(parse_token_line("   ").empty());
}

TEST(Tree, FixtureTreebankLoads) {
  const Treebank tb = load_treebank(std::string(LGPARSE_FIXTURES) + "/treebank.mrg");
  ASSERT_EQ(tb.size(), 4u);
  EXPECT_EQ(*tokens_of(tb.trees[0])[2].lemma, "sanctionner");
}
