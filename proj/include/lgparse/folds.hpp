#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "lgparse/error.hpp"
#include "lgparse/tree.hpp"

namespace lgparse {

enum class FoldErrorKind { InvalidP };
using FoldError = KindedError<FoldErrorKind>;

/// Per-tree fold index. A negative seed keeps the treebank order (contiguous
/// blocks); any other seed shuffles before cutting blocks.
struct FoldSplit {
  int p = 0;
  std::int64_t seed = 0;
  std::vector<int> assignments;

  std::vector<std::size_t> members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> complement(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }
};

inline FoldSplit split_folds(std::size_t n_trees, int p, std::int64_t seed) {
  if (p < 2 || static_cast<std::size_t>(p) > n_trees) {
    throw FoldError(FoldErrorKind::InvalidP, "fold count p=" + std::to_string(p) +
                                                 " must satisfy 2 <= p <= " +
                                                 std::to_string(n_trees));
  }
  std::vector<std::size_t> order(n_trees);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (seed >= 0) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::shuffle(order.begin(), order.end(), rng);
  }
  FoldSplit split;
  split.p = p;
  split.seed = seed;
  split.assignments.assign(n_trees, 0);
  const std::size_t base = n_trees / p;
  const std::size_t extra = n_trees % p;
  std::size_t pos = 0;
  // The last `extra` folds take one more tree.
  for (int k = 0; k < p; ++k) {
    const std::size_t size = base + (static_cast<std::size_t>(k) >= p - extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) split.assignments[order[pos++]] = k;
  }
  return split;
}

inline FoldSplit split_folds(const Treebank& tb, int p, std::int64_t seed) {
  return split_folds(tb.size(), p, seed);
}

inline Treebank subset(const Treebank& tb, const std::vector<std::size_t>& idx) {
  Treebank out;
  out.id = tb.id;
  out.trees.reserve(idx.size());
  for (auto i : idx) out.trees.push_back(tb.trees[i]);
  return out;
}

}  // namespace lgparse
