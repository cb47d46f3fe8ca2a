#pragma once

// EM over latent annotations with the tree structure observed.
//
// Inside and outside vectors are kept per node, each rescaled to a maximum of
// one with the log scale carried alongside, so deep trees do not underflow.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

#include "lgparse/binarize.hpp"
#include "lgparse/grammar.hpp"

namespace lgparse {

struct TrainingRecord {
  int iteration = 0;
  /// Natural log of the product of tree likelihoods, before the update.
  double log_likelihood = 0.0;
  int n_split_rounds = 0;
};

struct TrainConfig {
  int rounds = 2;
  int em_iters = 10;
  double noise = 0.01;
  std::uint64_t seed = 1;
  int rare_threshold = kDefaultRareThreshold;
  int h_markov = 2;
  int v_markov = 1;
  int jobs = 1;
};

/// A binarized tree resolved against a grammar's rules, nodes in post-order
/// (children before parents, root last).
struct CompiledTree {
  enum class Kind : std::uint8_t { Lexical, Unary, Binary };
  struct Node {
    Kind kind;
    int symbol;
    int rule;
    int left = -1;
    int right = -1;
  };
  std::vector<Node> nodes;
};

namespace detail {

inline int compile_node(const Grammar& g, const Tree& t, std::size_t index, CompiledTree& out) {
  auto underivable = [&](const std::string& what) {
    throw GrammarError(GrammarErrorKind::UnderivableTree,
                       "tree " + std::to_string(index) + ": " + what, index);
  };
  const int sym = g.symbol(t.label);
  if (sym < 0) underivable("unknown symbol '" + t.label + "'");
  CompiledTree::Node node{CompiledTree::Kind::Lexical, sym, -1};
  if (t.is_preterminal()) {
    const std::string& w = t.children.front().token.surface;
    const int wid = g.lexical_key(w);
    node.rule = wid < 0 ? -1 : g.find_lexical(sym, wid);
    if (node.rule < 0) underivable("no lexical rule " + t.label + " -> " + w);
  } else if (t.children.size() == 1) {
    node.kind = CompiledTree::Kind::Unary;
    node.left = compile_node(g, t.children[0], index, out);
    node.rule = g.find_unary(sym, out.nodes[node.left].symbol);
    if (node.rule < 0) underivable("no unary rule from '" + t.label + "'");
  } else if (t.children.size() == 2) {
    node.kind = CompiledTree::Kind::Binary;
    node.left = compile_node(g, t.children[0], index, out);
    node.right = compile_node(g, t.children[1], index, out);
    node.rule = g.find_binary(sym, out.nodes[node.left].symbol, out.nodes[node.right].symbol);
    if (node.rule < 0) underivable("no binary rule from '" + t.label + "'");
  } else {
    throw GrammarError(GrammarErrorKind::NonBinaryTree,
                       "tree " + std::to_string(index) + " is not binarized", index);
  }
  out.nodes.push_back(node);
  return static_cast<int>(out.nodes.size() - 1);
}

struct ScaledVector {
  std::vector<double> v;
  double log_scale = 0.0;

  /// Rescales to max 1; returns false if every entry is zero.
  bool rescale() {
    const double m = *std::max_element(v.begin(), v.end());
    if (!(m > 0.0)) return false;
    for (auto& x : v) x /= m;
    log_scale += std::log(m);
    return true;
  }
};

}  // namespace detail

inline CompiledTree compile_tree(const Grammar& g, const Tree& binarized, std::size_t index = 0) {
  CompiledTree out;
  const int root = detail::compile_node(g, binarized, index, out);
  if (g.wrapped_root()) {
    const int rule = g.find_unary(g.start(), out.nodes[root].symbol);
    if (rule < 0) {
      throw GrammarError(GrammarErrorKind::UnderivableTree,
                         "tree " + std::to_string(index) + ": root '" + binarized.label +
                             "' not reachable from the start symbol",
                         index);
    }
    out.nodes.push_back({CompiledTree::Kind::Unary, g.start(), rule, root, -1});
  } else if (out.nodes[root].symbol != g.start()) {
    throw GrammarError(GrammarErrorKind::UnderivableTree,
                       "tree " + std::to_string(index) + " is not rooted in the start symbol", index);
  }
  return out;
}

/// Runs inside-outside on one compiled tree. Adds posterior rule counts into
/// `counts` (parallel to g.params()) and subsymbol occupancies into
/// `occupancy` (flat split index) when non-null. Returns log P(tree).
inline double accumulate_tree(const Grammar& g, const CompiledTree& ct, std::vector<double>* counts,
                              std::vector<double>* occupancy) {
  using Kind = CompiledTree::Kind;
  const auto& nodes = ct.nodes;
  const std::size_t n = nodes.size();
  std::vector<detail::ScaledVector> in(n), out(n);
  const auto& params = g.params();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& nd = nodes[i];
    const int na = g.n_sub(nd.symbol);
    auto& iv = in[i];
    iv.v.assign(na, 0.0);
    switch (nd.kind) {
      case Kind::Lexical: {
        const auto& r = g.lexical()[nd.rule];
        for (int a = 0; a < na; ++a) iv.v[a] = params[r.offset + a];
        break;
      }
      case Kind::Unary: {
        const auto& r = g.unary()[nd.rule];
        const auto& c = in[nd.left];
        const int nb = g.n_sub(r.child);
        for (int a = 0; a < na; ++a) {
          double s = 0;
          const double* p = &params[r.offset + static_cast<std::size_t>(a) * nb];
          for (int b = 0; b < nb; ++b) s += p[b] * c.v[b];
          iv.v[a] = s;
        }
        iv.log_scale = c.log_scale;
        break;
      }
      case Kind::Binary: {
        const auto& r = g.binary()[nd.rule];
        const auto& l = in[nd.left];
        const auto& rt = in[nd.right];
        const int nb = g.n_sub(r.left), nc = g.n_sub(r.right);
        for (int a = 0; a < na; ++a) {
          double s = 0;
          const double* p = &params[r.offset + static_cast<std::size_t>(a) * nb * nc];
          for (int b = 0; b < nb; ++b) {
            double t = 0;
            for (int c = 0; c < nc; ++c) t += p[b * nc + c] * rt.v[c];
            s += l.v[b] * t;
          }
          iv.v[a] = s;
        }
        iv.log_scale = l.log_scale + rt.log_scale;
        break;
      }
    }
    if (!iv.rescale()) {
      throw GrammarError(GrammarErrorKind::UnderivableTree, "tree has zero probability");
    }
  }

  const std::size_t root = n - 1;
  const double log_z = std::log(in[root].v[0]) + in[root].log_scale;
  if (!counts && !occupancy) return log_z;

  out[root].v.assign(g.n_sub(nodes[root].symbol), 0.0);
  out[root].v[0] = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    const auto& nd = nodes[k];
    const int na = g.n_sub(nd.symbol);
    const auto& ov = out[k];
    if (occupancy) {
      const double f = std::exp(ov.log_scale + in[k].log_scale - log_z);
      for (int a = 0; a < na; ++a) (*occupancy)[g.flat(nd.symbol, a)] += ov.v[a] * in[k].v[a] * f;
    }
    switch (nd.kind) {
      case Kind::Lexical: {
        if (!counts) break;
        const auto& r = g.lexical()[nd.rule];
        const double f = std::exp(ov.log_scale - log_z);
        for (int a = 0; a < na; ++a) (*counts)[r.offset + a] += ov.v[a] * params[r.offset + a] * f;
        break;
      }
      case Kind::Unary: {
        const auto& r = g.unary()[nd.rule];
        const auto& c = in[nd.left];
        const int nb = g.n_sub(r.child);
        auto& oc = out[nd.left];
        oc.v.assign(nb, 0.0);
        oc.log_scale = ov.log_scale;
        const double f = std::exp(ov.log_scale + c.log_scale - log_z);
        for (int a = 0; a < na; ++a) {
          const double* p = &params[r.offset + static_cast<std::size_t>(a) * nb];
          for (int b = 0; b < nb; ++b) {
            oc.v[b] += ov.v[a] * p[b];
            if (counts) (*counts)[r.offset + static_cast<std::size_t>(a) * nb + b] += ov.v[a] * p[b] * c.v[b] * f;
          }
        }
        oc.rescale();
        break;
      }
      case Kind::Binary: {
        const auto& r = g.binary()[nd.rule];
        const auto& l = in[nd.left];
        const auto& rt = in[nd.right];
        const int nb = g.n_sub(r.left), nc = g.n_sub(r.right);
        auto& ol = out[nd.left];
        auto& orr = out[nd.right];
        ol.v.assign(nb, 0.0);
        orr.v.assign(nc, 0.0);
        ol.log_scale = ov.log_scale + rt.log_scale;
        orr.log_scale = ov.log_scale + l.log_scale;
        const double f = std::exp(ov.log_scale + l.log_scale + rt.log_scale - log_z);
        for (int a = 0; a < na; ++a) {
          if (ov.v[a] == 0.0) continue;
          const std::size_t base = r.offset + static_cast<std::size_t>(a) * nb * nc;
          for (int b = 0; b < nb; ++b) {
            for (int c = 0; c < nc; ++c) {
              const double w = ov.v[a] * params[base + b * nc + c];
              ol.v[b] += w * rt.v[c];
              orr.v[c] += w * l.v[b];
              if (counts) (*counts)[base + b * nc + c] += w * l.v[b] * rt.v[c] * f;
            }
          }
        }
        ol.rescale();
        orr.rescale();
        break;
      }
    }
  }
  return log_z;
}

/// log P(tree) of a binarized tree.
inline double tree_loglik(const Grammar& g, const Tree& binarized) {
  return accumulate_tree(g, compile_tree(g, binarized), nullptr, nullptr);
}

inline double treebank_loglik(const Grammar& g, const Treebank& binarized) {
  double total = 0;
  for (std::size_t i = 0; i < binarized.size(); ++i)
    total += accumulate_tree(g, compile_tree(g, binarized.trees[i], i), nullptr, nullptr);
  return total;
}

namespace detail {

// Fixed chunking keeps the floating-point reduction order independent of the
// number of worker threads.
inline constexpr std::size_t kEmChunks = 16;

template <typename Fn>
void run_chunks(std::size_t n_chunks, int jobs, Fn&& fn) {
  if (jobs <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n_chunks);
  for (std::size_t t = 0; t < nthreads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t c = t; c < n_chunks; c += nthreads) fn(c);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace detail

/// One EM iteration on a binarized treebank. The record carries the
/// log-likelihood of `tb` under `g` (before the update).
inline std::pair<Grammar, TrainingRecord> em_round(const Grammar& g, const Treebank& tb, int jobs = 1) {
  std::vector<CompiledTree> compiled;
  compiled.reserve(tb.size());
  for (std::size_t i = 0; i < tb.size(); ++i) compiled.push_back(compile_tree(g, tb.trees[i], i));

  const std::size_t n_chunks = std::min(detail::kEmChunks, std::max<std::size_t>(tb.size(), 1));
  std::vector<std::vector<double>> counts(n_chunks), occ(n_chunks);
  std::vector<double> loglik(n_chunks, 0.0);
  std::vector<std::exception_ptr> errors(n_chunks);
  detail::run_chunks(n_chunks, jobs, [&](std::size_t c) {
    try {
      counts[c].assign(g.params().size(), 0.0);
      occ[c].assign(g.n_split_symbols(), 0.0);
      const std::size_t lo = tb.size() * c / n_chunks, hi = tb.size() * (c + 1) / n_chunks;
      for (std::size_t i = lo; i < hi; ++i) loglik[c] += accumulate_tree(g, compiled[i], &counts[c], &occ[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> total = std::move(counts[0]);
  std::vector<double> occupancy = std::move(occ[0]);
  double ll = loglik[0];
  for (std::size_t c = 1; c < n_chunks; ++c) {
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += counts[c][i];
    for (std::size_t i = 0; i < occupancy.size(); ++i) occupancy[i] += occ[c][i];
    ll += loglik[c];
  }

  Grammar next = g;
  // Rows that received no posterior mass keep their previous distribution.
  std::vector<double> row_mass(g.n_split_symbols(), 0.0);
  {
    Grammar tmp = g;
    tmp.params() = total;
    row_mass = tmp.lhs_sums();
  }
  auto update = [&](std::size_t offset, std::size_t size, int parent, std::size_t row) {
    for (std::size_t i = 0; i < size; ++i) {
      const double m = row_mass[g.flat(parent, static_cast<int>(i / row))];
      if (m > 0.0) next.params()[offset + i] = total[offset + i] / m;
    }
  };
  for (const auto& r : g.binary())
    update(r.offset, g.size_of(r), r.parent, static_cast<std::size_t>(g.n_sub(r.left)) * g.n_sub(r.right));
  for (const auto& r : g.unary()) update(r.offset, g.size_of(r), r.parent, g.n_sub(r.child));
  for (const auto& r : g.lexical()) update(r.offset, g.size_of(r), r.tag, 1);
  next.sub_weights = std::move(occupancy);

  TrainingRecord rec;
  rec.log_likelihood = ll;
  rec.n_split_rounds = g.n_split_rounds;
  return {std::move(next), rec};
}

using TrainingObserver = std::function<void(const TrainingRecord&)>;

/// binarize -> extract -> (split -> EM x em_iters) x rounds.
inline std::pair<Grammar, std::vector<TrainingRecord>> train_latent(const Treebank& tb, const TrainConfig& cfg,
                                                                   const TrainingObserver& observer = {}) {
  if (cfg.rounds < 0) throw GrammarError(GrammarErrorKind::BadFactor, "rounds must be >= 0");
  if (cfg.em_iters < 1) throw GrammarError(GrammarErrorKind::BadFactor, "em_iters must be >= 1");
  const Treebank bin = binarize(tb, cfg.h_markov, cfg.v_markov);
  Grammar g = extract_pcfg(bin, ExtractOptions{cfg.rare_threshold, true});
  g.h_markov = cfg.h_markov;
  g.v_markov = cfg.v_markov;
  std::vector<TrainingRecord> records;
  int iteration = 0;
  for (int round = 0; round < cfg.rounds; ++round) {
    g = split_symbols(g, 2, cfg.noise, cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(round));
    for (int it = 0; it < cfg.em_iters; ++it) {
      auto [next, rec] = em_round(g, bin, cfg.jobs);
      rec.iteration = ++iteration;
      records.push_back(rec);
      if (observer) observer(rec);
      g = std::move(next);
    }
  }
  return {std::move(g), std::move(records)};
}

}  // namespace lgparse
