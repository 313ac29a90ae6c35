#pragma once

#include "sanmt/tape.hpp"
#include "sanmt/tensor.hpp"

namespace sanmt {

// Exact inference over non-projective dependency structures. A score
// matrix phi is n x n: phi(i,j) scores word i heading word j, and the
// diagonal phi(j,j) scores j being the root. The marginal beta(i,j) is
// the probability that i heads j under the induced distribution over
// single-root arborescences; beta(k,k) is the probability that k is the
// root.

struct Marginals {
  Tensor beta;
  double log_partition = 0.0;
};

// Graph Laplacian over exponentiated scores: L(j,j) = sum_{k != j}
// exp(phi(k,j)), off-diagonal L(i,j) = -exp(phi(i,j)).
Tensor laplacian(const Tensor& phi);

// Laplacian with the first row replaced by exp(phi(j,j)), which folds
// root selection into the determinant.
Tensor root_laplacian(const Tensor& phi);

// Marginal node ids on a tape; gradients flow back to the phi node.
struct MarginalNodes {
  int beta = -1;
  int log_partition = -1;
};

// Tape-based marginals via the inverse of the root Laplacian. Columns of
// phi are shifted by their maxima before exponentiation; the marginals
// are invariant to per-column shifts and the log-partition is corrected
// by the shift total, so values are exact while exp stays bounded.
MarginalNodes marginals(Tape& tape, int phi_node);

// Value-level convenience wrapper around the tape computation.
Marginals marginals_value(const Tensor& phi);

// Brute-force verifier: enumerates every single-root cycle-free head
// function (n <= 7) and accumulates weighted edge frequencies.
Marginals enumerate_oracle(const Tensor& phi);

// One-hot argmax per column (diagonal competes; ties pick the smallest
// row index). Value-level counterpart of Tape::hard_select.
Tensor hard_select_value(const Tensor& beta);

// True when heads[j] == j for exactly one root r and every other node
// reaches r by following heads.
bool is_arborescence(const std::vector<int>& heads);

}  // namespace sanmt
