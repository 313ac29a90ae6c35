#pragma once

#include <utility>
#include <vector>

#include "sanmt/tensor.hpp"

namespace sanmt {

// A decoded dependency tree over words: heads are 0-based with
// head[root] == root, single root, acyclic.
struct DependencyTree {
  std::vector<int> head;
  int root = 0;
  double score = 0.0;  // sum of edge scores plus the root bonus

  // 1-based heads with 0 marking the root (the CoNLL-U convention)
  std::vector<int> heads_conllu() const {
    std::vector<int> out(head.size());
    for (std::size_t j = 0; j < head.size(); ++j)
      out[j] = (static_cast<int>(j) == root) ? 0 : head[j] + 1;
    return out;
  }
};

// Sums subword scores into word scores. Each span [u, v] (inclusive,
// subword indices) collapses into one row/column; the intra-span block
// lands on the new diagonal so the root convention survives. Spans are
// processed left to right, re-indexing the remainder after each
// collapse.
Tensor collapse_bpe_scores(const Tensor& phi, const std::vector<std::pair<int, int>>& spans);

// One collapse step, exposed so alternative orders can be composed.
Tensor collapse_span(const Tensor& phi, int u, int v);

// Maximum spanning arborescence: runs Chu-Liu-Edmonds once per candidate
// root r (root bonus phi(r,r)) and keeps the best total weight; ties
// prefer the smallest root index.
DependencyTree cle_decode(const Tensor& phi_hat);

// Per-column argmax head assignment (the diagonal competes as the root
// choice); the flag reports whether the result is a valid tree.
struct GreedyHeads {
  std::vector<int> head;  // 0-based, head[j] == j marks a root choice
  bool is_tree = false;
};
GreedyHeads greedy_decode(const Tensor& mat);

// Trivial parsers attaching every word to a neighbor, as 1-based heads
// with 0 for the root. `un` is the adjacent chain meant to be scored
// with undirected matching only.
struct BranchingBaselines {
  std::vector<int> left;
  std::vector<int> right;
  std::vector<int> un;
};
BranchingBaselines branching_baselines(int n);

}  // namespace sanmt
