#include <gtest/gtest.h>

#include <cmath>

#include "lgparse/binarize.hpp"
#include "lgparse/parser.hpp"
#include "lgparse/train.hpp"
#include "support/brute_force.hpp"
#include "support/random_pcfg.hpp"
#include "support/synthetic.hpp"

using namespace lgparse;

namespace {

std::vector<int> word_ids(const Grammar& g, const std::vector<Token>& toks) {
  std::vector<int> out;
  for (const auto& t : toks) out.push_back(g.lexical_key(t.surface));
  return out;
}

std::vector<Token> plain(std::initializer_list<const char*> ws) {
  std::vector<Token> out;
  for (const char* w : ws) out.push_back({w, std::nullopt});
  return out;
}

}  // namespace

TEST(Parser, UniqueDerivation) {
  const Treebank tb = parse_bracketed("(S (NP (D le) (N chat)) (VN (V dort)))");
  const Grammar g = extract_pcfg(binarize(tb), {1, true});
  const Tree t = parse(g, plain({"le", "chat", "dort"}));
  EXPECT_EQ(t, tb.trees[0]);
  EXPECT_NEAR(Parser(g).viterbi(plain({"le", "chat", "dort"})).log_prob, 0.0, 1e-12);
}

TEST(Parser, RecoversTrainingTreesUnderSplitGrammar) {
  const Treebank tb = parse_bracketed(
      "(SENT (NP (DET le) (NC chat)) (VN (V mange)) (NP (DET la) (NC souris)) (PONCT .))\n"
      "(SENT (NP (NPP Marie)) (VN (V dort)) (PONCT .))\n");
  TrainConfig cfg;
  cfg.rare_threshold = 1;
  cfg.rounds = 1;
  cfg.em_iters = 2;
  auto [g, trace] = train_latent(tb, cfg);
  for (const auto& t : tb.trees) EXPECT_EQ(parse(g, tokens_of(t)), t);
}

TEST(Parser, KeepsLemmasOnLeaves) {
  const Treebank tb = parse_bracketed("(S (N chat##chat) (V dort##dormir))");
  const Grammar g = extract_pcfg(tb, {1, true});
  const Tree t = parse(g, tokens_of(tb.trees[0]));
  EXPECT_EQ(t, tb.trees[0]);
}

TEST(Parser, MatchesBruteForceOnRandomGrammars) {
  std::mt19937_64 rng(4242);
  int compared = 0, no_parse = 0;
  for (std::uint64_t seed = 0; compared < 60 && seed < 400; ++seed) {
    const auto pcfg = lgtest::random_pcfg(seed, 6, seed % 2 == 1);
    const Grammar& g = pcfg.grammar;
    const Parser parser(g);
    for (int s = 0; s < 3; ++s) {
      const auto toks = lgtest::random_sentence(rng, pcfg, 1 + rng() % 5);
      const auto bf = lgtest::brute_force(g, word_ids(g, toks), 2, 20000);
      if (!bf) continue;
      if (bf->n_derivations == 0) {
        EXPECT_THROW(parser.viterbi(toks), ParserError);
        ++no_parse;
        continue;
      }
      const double v = parser.viterbi(toks).log_prob;
      const double in = parser.sentence_loglik(toks);
      EXPECT_NEAR(v, std::log(bf->max_prob), 1e-9 * std::max(1.0, std::abs(v))) << seed;
      EXPECT_NEAR(in, std::log(bf->sum_prob), 1e-9 * std::max(1.0, std::abs(in))) << seed;
      ++compared;
    }
  }
  EXPECT_GE(compared, 50);
}

TEST(Parser, UnaryChainLimit) {
  // S -> A, A -> B, B -> T: a chain of three unaries above T
  Grammar g;
  const int s = g.add_symbol("ROOT"), a = g.add_symbol("A"), b = g.add_symbol("B"), t = g.add_symbol("T");
  const int w = g.add_word("x");
  g.set_start(s);
  g.probs(g.unary()[g.add_unary(s, a)])[0] = 1;
  g.probs(g.unary()[g.add_unary(a, b)])[0] = 1;
  g.probs(g.unary()[g.add_unary(b, t)])[0] = 1;
  g.probs(g.lexical()[g.add_lexical(t, w)])[0] = 1;
  g.fallback_root = "A";
  ParserOptions two;
  EXPECT_THROW(Parser(g, two).viterbi(plain({"x"})), ParserError);
  ParserOptions three;
  three.max_unary_chain = 3;
  EXPECT_EQ(to_string(Parser(g, three).parse(plain({"x"}))), "(ROOT (A (B (T x))))");
}

TEST(Parser, NoParseAndFallback) {
  const Treebank tb = parse_bracketed("(S (N chat) (V dort))");
  const Grammar g = extract_pcfg(tb, {1, true});
  const Parser strict(g);
  try {
    strict.viterbi(plain({"dort", "chat"}));
    FAIL();
  } catch (const ParserError& e) {
    EXPECT_EQ(e.kind(), ParserErrorKind::NoParse);
  }
  ParserOptions ro;
  ro.relax_unknown = true;
  const Parser relaxed(g, ro);
  const auto out = parse_with_fallback(strict, relaxed, plain({"dort", "chat"}));
  EXPECT_EQ(out.status, ParseStatus::Fallback);
  EXPECT_EQ(tokens_of(out.tree).size(), 2u);
  EXPECT_EQ(out.tree.label, "S");
  try {
    strict.viterbi({});
    FAIL();
  } catch (const ParserError& e) {
    EXPECT_EQ(e.kind(), ParserErrorKind::EmptySentence);
  }
}

TEST(Parser, FlatFallbackShape) {
  const Treebank tb = parse_bracketed("(S (N chat) (V dort))");
  const Grammar g = extract_pcfg(tb, {1, true});
  const Tree t = Parser(g).fallback(plain({"un", "deux", "trois"}));
  EXPECT_EQ(t.label, "S");
  EXPECT_EQ(t.children.size(), 3u);
  for (const auto& c : t.children) EXPECT_TRUE(c.is_preterminal());
}

TEST(Parser, RelaxedUnknownWords) {
  const Treebank tb = lgtest::synthetic_treebank(80, 31);
  TrainConfig cfg;
  cfg.rounds = 0;
  cfg.rare_threshold = 5;
  auto [g, trace] = train_latent(tb, cfg);
  const Parser strict(g);
  ParserOptions ro;
  ro.relax_unknown = true;
  const Parser relaxed(g, ro);
  // "zzqx" has no word or signature entry
  const auto toks = plain({"le", "zzqx", "mange", "la", "pomme", "."});
  const auto out = parse_with_fallback(strict, relaxed, toks);
  EXPECT_NE(out.status, ParseStatus::Fallback);
  EXPECT_EQ(tokens_of(out.tree).size(), toks.size());
}

TEST(Parser, ParsesSyntheticHeldOut) {
  const Treebank train = lgtest::synthetic_treebank(150, 40);
  const Treebank test = lgtest::synthetic_treebank(10, 41);
  TrainConfig cfg;
  cfg.rounds = 1;
  cfg.em_iters = 3;
  auto [g, trace] = train_latent(train, cfg);
  const Parser strict(g);
  ParserOptions ro;
  ro.relax_unknown = true;
  const Parser relaxed(g, ro);
  for (const auto& t : test.trees) {
    const auto out = parse_with_fallback(strict, relaxed, tokens_of(t));
    EXPECT_EQ(tokens_of(out.tree), tokens_of(t));
    EXPECT_EQ(out.tree.label, "SENT");
  }
}

TEST(Projection, StripsLatentIndices) {
  SymbolProjection proj;
  EXPECT_EQ(proj("NP_3"), "NP");
  EXPECT_EQ(proj("V_12"), "V");
  EXPECT_EQ(proj("NP"), "NP");
  EXPECT_EQ(proj("V_TD2"), "V_TD2");
  Grammar g;
  g.add_symbol("V_12", 2);
  g.set_start(0);
  const SymbolProjection table(g);
  EXPECT_EQ(table("V_12_1"), "V_12");
}
