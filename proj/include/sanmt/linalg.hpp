#pragma once

#include <vector>

#include "sanmt/tensor.hpp"

namespace sanmt {

// Partial-pivot LU factorization of a square matrix. `singular` is set
// when a pivot falls below 1e-12 of the matrix's max absolute entry.
struct LuFactors {
  Tensor lu;              // L below diagonal (unit), U on and above
  std::vector<int> perm;  // row permutation
  int sign = 1;           // permutation parity
  bool singular = false;
  double max_abs = 0.0;
};

LuFactors lu_factor(const Tensor& a);

// Inverse from the factorization; caller must check `singular` first.
Tensor lu_inverse(const LuFactors& f);

// log |det| and the sign of det from the factorization.
double lu_log_abs_det(const LuFactors& f, int* det_sign);

Tensor matmul_values(const Tensor& a, const Tensor& b);

}  // namespace sanmt
