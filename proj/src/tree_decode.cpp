#include "sanmt/tree_decode.hpp"

#include <limits>

#include "sanmt/matrix_tree.hpp"

namespace sanmt {

Tensor collapse_span(const Tensor& phi, int u, int v) {
  int n = phi.rows();
  if (!(0 <= u && u <= v && v < n))
    throw ContractViolation("collapse_span: span out of range");
  if (u == v) return phi;
  int width = v - u;
  Tensor out(n - width, n - width);
  auto remap = [&](int i) { return i <= v ? std::min(i, u) : i - width; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.at(remap(i), remap(j)) += phi.at(i, j);
  return out;
}

Tensor collapse_bpe_scores(const Tensor& phi,
                           const std::vector<std::pair<int, int>>& spans) {
  if (phi.rows() != phi.cols())
    throw ContractViolation("collapse_bpe_scores: matrix must be square");
  int expected = 0;
  for (const auto& [u, v] : spans) {
    if (u != expected || v < u)
      throw ContractViolation("collapse_bpe_scores: spans must partition the tokens");
    expected = v + 1;
  }
  if (expected != phi.rows())
    throw ContractViolation("collapse_bpe_scores: spans do not cover all tokens");

  Tensor cur = phi;
  int removed = 0;
  for (const auto& [u, v] : spans) {
    if (v == u) continue;
    cur = collapse_span(cur, u - removed, v - removed);
    removed += v - u;
  }
  return cur;
}

namespace {

// Recursive contraction step of Chu-Liu-Edmonds over a dense weight
// matrix; returns heads with heads[root] == root. Argmax scans ascending
// so equal weights resolve to the smallest index.
std::vector<int> cle_rooted(std::vector<std::vector<double>> w, int root) {
  int m = static_cast<int>(w.size());
  std::vector<int> best_in(m, -1);
  best_in[root] = root;
  for (int v = 0; v < m; ++v) {
    if (v == root) continue;
    int best = -1;
    for (int u = 0; u < m; ++u) {
      if (u == v) continue;
      if (best < 0 || w[u][v] > w[best][v]) best = u;
    }
    best_in[v] = best;
  }

  // find a cycle in the best-in-edge graph
  std::vector<int> color(m, 0);  // 0 unvisited, 1 on path, 2 done
  std::vector<int> cycle;
  for (int s = 0; s < m && cycle.empty(); ++s) {
    if (color[s] != 0) continue;
    int v = s;
    std::vector<int> path;
    while (v != root && color[v] == 0) {
      color[v] = 1;
      path.push_back(v);
      v = best_in[v];
    }
    if (v != root && color[v] == 1) {
      int c = v;
      do {
        cycle.push_back(c);
        c = best_in[c];
      } while (c != v);
    }
    for (int p : path) color[p] = 2;
  }
  if (cycle.empty()) return best_in;

  std::vector<bool> in_cycle(m, false);
  for (int v : cycle) in_cycle[v] = true;

  // contract: non-cycle nodes keep their order, the cycle becomes the
  // last node of the smaller graph
  std::vector<int> old_of;
  std::vector<int> new_of(m, -1);
  for (int i = 0; i < m; ++i) {
    if (!in_cycle[i]) {
      new_of[i] = static_cast<int>(old_of.size());
      old_of.push_back(i);
    }
  }
  int c_node = static_cast<int>(old_of.size());
  int m2 = c_node + 1;
  double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> w2(m2, std::vector<double>(m2, neg_inf));
  std::vector<int> entry_choice(m2, -1);  // cycle node broken per entering source
  std::vector<int> exit_choice(m, -1);    // cycle source per leaving target

  for (int i = 0; i < m; ++i) {
    if (in_cycle[i]) continue;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      if (!in_cycle[j]) {
        w2[new_of[i]][new_of[j]] = w[i][j];
      } else {
        double adjusted = w[i][j] - w[best_in[j]][j];
        if (adjusted > w2[new_of[i]][c_node]) {
          w2[new_of[i]][c_node] = adjusted;
          entry_choice[new_of[i]] = j;
        }
      }
    }
  }
  for (int j = 0; j < m; ++j) {
    if (in_cycle[j]) continue;
    for (int i = 0; i < m; ++i) {
      if (!in_cycle[i] || i == j) continue;
      if (w[i][j] > w2[c_node][new_of[j]]) {
        w2[c_node][new_of[j]] = w[i][j];
        exit_choice[j] = i;
      }
    }
  }

  std::vector<int> sub = cle_rooted(std::move(w2), new_of[root]);

  std::vector<int> heads(m, -1);
  heads[root] = root;
  for (int j = 0; j < m; ++j) {
    if (j == root || in_cycle[j]) continue;
    int h = sub[new_of[j]];
    heads[j] = (h == c_node) ? exit_choice[j] : old_of[h];
  }
  int broken = entry_choice[sub[c_node]];
  for (int v : cycle) heads[v] = best_in[v];
  heads[broken] = old_of[sub[c_node]];
  return heads;
}

}  // namespace

DependencyTree cle_decode(const Tensor& phi_hat) {
  if (phi_hat.rows() != phi_hat.cols() || phi_hat.rows() < 1)
    throw ContractViolation("cle_decode: score matrix must be square");
  int n = phi_hat.rows();

  std::vector<std::vector<double>> w(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[i][j] = phi_hat.at(i, j);

  DependencyTree best;
  bool have = false;
  for (int r = 0; r < n; ++r) {
    std::vector<int> heads = (n == 1) ? std::vector<int>{0} : cle_rooted(w, r);
    double total = phi_hat.at(r, r);
    for (int j = 0; j < n; ++j)
      if (j != r) total += phi_hat.at(heads[j], j);
    if (!have || total > best.score) {
      best.head = heads;
      best.root = r;
      best.score = total;
      have = true;
    }
  }
  return best;
}

GreedyHeads greedy_decode(const Tensor& mat) {
  if (mat.rows() != mat.cols() || mat.rows() < 1)
    throw ContractViolation("greedy_decode: matrix must be square");
  GreedyHeads g;
  int n = mat.rows();
  g.head.resize(n);
  for (int j = 0; j < n; ++j) {
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (mat.at(i, j) > mat.at(best, j)) best = i;
    g.head[j] = best;
  }
  g.is_tree = is_arborescence(g.head);
  return g;
}

BranchingBaselines branching_baselines(int n) {
  if (n < 1) throw ContractViolation("branching_baselines: n must be >= 1");
  BranchingBaselines b;
  b.left.resize(n);
  b.right.resize(n);
  for (int j = 0; j < n; ++j) {
    b.left[j] = j;                        // head(j) = j-1, word 1 is root
    b.right[j] = (j == n - 1) ? 0 : j + 2;  // head(j) = j+1, word n is root
  }
  b.un = b.left;  // adjacent chain; callers score it undirected
  return b;
}

}  // namespace sanmt
