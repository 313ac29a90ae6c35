#include "sanmt/matrix_tree.hpp"

#include <cmath>

namespace sanmt {

namespace {

void check_square_finite(const Tensor& phi, const char* who) {
  if (phi.rows() != phi.cols() || phi.rows() < 1)
    throw ContractViolation(std::string(who) + ": score matrix must be square, got " +
                            phi.shape_str());
  if (!phi.all_finite())
    throw ContractViolation(std::string(who) + ": non-finite score entry");
}

}  // namespace

Tensor laplacian(const Tensor& phi) {
  check_square_finite(phi, "laplacian");
  int n = phi.rows();
  Tensor l(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      double e = std::exp(phi.at(i, j));
      l.at(i, j) = -e;
      diag += e;
    }
    l.at(j, j) = diag;
  }
  return l;
}

Tensor root_laplacian(const Tensor& phi) {
  Tensor l = laplacian(phi);
  int n = phi.rows();
  for (int j = 0; j < n; ++j) l.at(0, j) = std::exp(phi.at(j, j));
  return l;
}

MarginalNodes marginals(Tape& tape, int phi_node) {
  const Tensor& phi = tape.val(phi_node);
  check_square_finite(phi, "marginals");
  int n = phi.rows();

  // Column shifts are constants on the tape: the marginals are exactly
  // shift-invariant, so their gradients are unaffected, and the chain
  // terms through the shift cancel in the log-partition gradient.
  Tensor shift(n, n);
  double shift_total = 0.0;
  for (int j = 0; j < n; ++j) {
    double m = phi.at(0, j);
    for (int i = 1; i < n; ++i) m = std::max(m, phi.at(i, j));
    shift_total += m;
    for (int i = 0; i < n; ++i) shift.at(i, j) = m;
  }

  int psi = tape.sub(phi_node, tape.constant(shift));
  int a = tape.exp(psi);                       // exponentiated shifted scores
  int a_diag = tape.diag_extract(a);           // root weights, n x 1
  int a_off = tape.sub(a, tape.diag_make(a_diag));

  // L = diag(column sums of off-diagonal weights) - off-diagonal weights
  int ones_row = tape.constant(Tensor::ones(1, n));
  int col_sums = tape.matmul(ones_row, a_off);  // 1 x n
  int lap = tape.sub(tape.diag_make(tape.transpose(col_sums)), a_off);

  // Root Laplacian: first row holds the root weights.
  Tensor row_mask(n, n, 1.0);
  for (int j = 0; j < n; ++j) row_mask.at(0, j) = 0.0;
  Tensor e1(n, 1);
  e1.at(0, 0) = 1.0;
  int lhat = tape.add(tape.mul(tape.constant(row_mask), lap),
                      tape.matmul(tape.constant(e1), tape.transpose(a_diag)));

  int binv;
  int logdet;
  try {
    binv = tape.matrix_inverse(lhat);
    logdet = tape.log_det(lhat);
  } catch (SingularMatrixError& e) {
    e.n = n;
    e.max_abs_score = phi.max_abs();
    throw;
  }

  MarginalNodes out;
  out.log_partition = tape.add(logdet, tape.constant(Tensor::scalar(shift_total)));

  // off-diagonal: (1 - d_1j) a_ij [Binv]_jj - (1 - d_i1) a_ij [Binv]_ji;
  // both terms cancel exactly on the diagonal, so the root marginals
  // a_kk [Binv]_k1 can be added directly.
  Tensor col_not_first(n, n, 1.0), row_not_first(n, n, 1.0);
  for (int i = 0; i < n; ++i) col_not_first.at(i, 0) = 0.0;
  for (int j = 0; j < n; ++j) row_not_first.at(0, j) = 0.0;

  int ones_col = tape.constant(Tensor::ones(n, 1));
  int binv_diag_rows = tape.matmul(ones_col, tape.transpose(tape.diag_extract(binv)));
  int term1 = tape.mul(tape.mul(tape.constant(col_not_first), a), binv_diag_rows);
  int term2 = tape.mul(tape.mul(tape.constant(row_not_first), a), tape.transpose(binv));
  int root_diag = tape.diag_make(tape.mul(a_diag, tape.slice(binv, 0, n, 0, 1)));
  out.beta = tape.add(tape.sub(term1, term2), root_diag);
  return out;
}

Marginals marginals_value(const Tensor& phi) {
  Tape tape;
  MarginalNodes m = marginals(tape, tape.constant(phi));
  return {tape.val(m.beta), tape.val(m.log_partition).item()};
}

bool is_arborescence(const std::vector<int>& heads) {
  int n = static_cast<int>(heads.size());
  int root = -1;
  for (int j = 0; j < n; ++j) {
    if (heads[j] < 0 || heads[j] >= n) return false;
    if (heads[j] == j) {
      if (root >= 0) return false;
      root = j;
    }
  }
  if (root < 0) return false;
  for (int j = 0; j < n; ++j) {
    int cur = j, steps = 0;
    while (cur != root) {
      cur = heads[cur];
      if (++steps > n) return false;  // cycle
    }
  }
  return true;
}

Marginals enumerate_oracle(const Tensor& phi) {
  check_square_finite(phi, "enumerate_oracle");
  int n = phi.rows();
  if (n > 7)
    throw ContractViolation("enumerate_oracle: n > 7 not supported (exponential enumeration)");

  // column shifts keep weights bounded; beta is shift-invariant and the
  // shift total is added back to the log-partition
  std::vector<double> col_max(n);
  double shift_total = 0.0;
  for (int j = 0; j < n; ++j) {
    double m = phi.at(0, j);
    for (int i = 1; i < n; ++i) m = std::max(m, phi.at(i, j));
    col_max[j] = m;
    shift_total += m;
  }

  Tensor beta(n, n);
  double z = 0.0;
  std::vector<int> heads(n, 0);
  while (true) {
    if (is_arborescence(heads)) {
      double w = 1.0;
      for (int j = 0; j < n; ++j) w *= std::exp(phi.at(heads[j], j) - col_max[j]);
      z += w;
      for (int j = 0; j < n; ++j) beta.at(heads[j], j) += w;
    }
    int k = n - 1;
    while (k >= 0 && heads[k] == n - 1) heads[k--] = 0;
    if (k < 0) break;
    ++heads[k];
  }

  for (double& v : beta.data) v /= z;
  return {beta, std::log(z) + shift_total};
}

Tensor hard_select_value(const Tensor& beta) {
  Tensor out(beta.rows(), beta.cols());
  for (int j = 0; j < beta.cols(); ++j) {
    int best = 0;
    for (int i = 1; i < beta.rows(); ++i)
      if (beta.at(i, j) > beta.at(best, j)) best = i;
    out.at(best, j) = 1.0;
  }
  return out;
}

}  // namespace sanmt
