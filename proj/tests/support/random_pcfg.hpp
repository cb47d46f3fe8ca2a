#pragma once

// Random small PCFGs for decoder checks.

#include <random>
#include <string>
#include <vector>

#include "lgparse/grammar.hpp"
#include "lgparse/tree.hpp"

namespace lgtest {

struct RandomPcfg {
  lgparse::Grammar grammar;
  std::vector<std::string> words;
};

/// Up to `max_nonterminals` phrasal symbols (counting the start), a few
/// pre-terminals, dense-ish random rules including unary cycles. When
/// `split` is set some symbols get two subsymbols.
inline RandomPcfg random_pcfg(std::uint64_t seed, int max_nonterminals = 6, bool split = false) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  RandomPcfg out;
  lgparse::Grammar& g = out.grammar;

  const bool wrapped = coin(0.5);
  const int n_phrasal = std::uniform_int_distribution<int>(2, max_nonterminals - (wrapped ? 1 : 0))(rng);
  const int n_tags = std::uniform_int_distribution<int>(2, 3)(rng);
  const int n_words = std::uniform_int_distribution<int>(2, 4)(rng);
  auto subs = [&] { return split && coin(0.4) ? 2 : 1; };

  int root = -1;
  if (wrapped) root = g.add_symbol("ROOT", 1);
  std::vector<int> phrasal, tags;
  for (int i = 0; i < n_phrasal; ++i) {
    const std::string name = !wrapped && i == 0 ? "ROOT" : "X" + std::to_string(i);
    phrasal.push_back(g.add_symbol(name, !wrapped && i == 0 ? 1 : subs()));
  }
  for (int i = 0; i < n_tags; ++i) tags.push_back(g.add_symbol("T" + std::to_string(i), subs()));
  for (int i = 0; i < n_words; ++i) {
    out.words.push_back("w" + std::to_string(i));
    g.add_word(out.words.back());
  }
  g.set_start(wrapped ? root : phrasal[0]);
  g.set_wrapped_root(wrapped);

  auto fill = [&](std::span<double> p) {
    for (auto& x : p) x = uni(0.05, 1.0);
  };
  std::vector<int> children = phrasal;
  children.insert(children.end(), tags.begin(), tags.end());
  if (wrapped) {
    for (int x : phrasal)
      if (coin(0.7) || x == phrasal[0]) fill(g.probs(g.unary()[g.add_unary(root, x)]));
  }
  for (int a : phrasal) {
    bool any = false;
    for (int b : children)
      for (int c : children)
        if (coin(0.3)) {
          fill(g.probs(g.binary()[g.add_binary(a, b, c)]));
          any = true;
        }
    if (!any) fill(g.probs(g.binary()[g.add_binary(a, tags[0], children[rng() % children.size()])]));
    for (int b : children)
      if (b != a && coin(0.25)) fill(g.probs(g.unary()[g.add_unary(a, b)]));
  }
  for (int t : tags) {
    bool any = false;
    for (int w = 0; w < n_words; ++w)
      if (coin(0.6)) {
        fill(g.probs(g.lexical()[g.add_lexical(t, w)]));
        any = true;
      }
    if (!any) fill(g.probs(g.lexical()[g.add_lexical(t, static_cast<int>(rng() % n_words))]));
  }
  g.normalize();
  g.fallback_root = g.name(phrasal[wrapped ? 0 : 1 % n_phrasal]);
  return out;
}

inline std::vector<lgparse::Token> random_sentence(std::mt19937_64& rng, const RandomPcfg& g, std::size_t len) {
  std::vector<lgparse::Token> out;
  for (std::size_t i = 0; i < len; ++i) out.push_back({g.words[rng() % g.words.size()], std::nullopt});
  return out;
}

}  // namespace lgtest
