#include "sanmt/linalg.hpp"

#include <cmath>

namespace sanmt {

LuFactors lu_factor(const Tensor& a) {
  if (a.rows() != a.cols())
    throw ContractViolation("lu_factor: matrix must be square, got " + a.shape_str());
  int n = a.rows();
  LuFactors f;
  f.lu = a;
  f.perm.resize(n);
  f.max_abs = a.max_abs();
  for (int i = 0; i < n; ++i) f.perm[i] = i;
  double threshold = 1e-12 * f.max_abs;

  Tensor& m = f.lu;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::fabs(m.at(k, k));
    for (int i = k + 1; i < n; ++i) {
      double v = std::fabs(m.at(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best <= threshold || best == 0.0) {
      f.singular = true;
      return f;
    }
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(m.at(k, j), m.at(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
      f.sign = -f.sign;
    }
    double inv_pivot = 1.0 / m.at(k, k);
    for (int i = k + 1; i < n; ++i) {
      double factor = m.at(i, k) * inv_pivot;
      m.at(i, k) = factor;
      if (factor == 0.0) continue;
      for (int j = k + 1; j < n; ++j) m.at(i, j) -= factor * m.at(k, j);
    }
  }
  return f;
}

Tensor lu_inverse(const LuFactors& f) {
  int n = f.lu.rows();
  Tensor inv(n, n);
  std::vector<double> x(n);
  for (int col = 0; col < n; ++col) {
    // forward solve L y = P e_col
    for (int i = 0; i < n; ++i) {
      double v = (f.perm[i] == col) ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) v -= f.lu.at(i, j) * x[j];
      x[i] = v;
    }
    // back solve U x = y
    for (int i = n - 1; i >= 0; --i) {
      double v = x[i];
      for (int j = i + 1; j < n; ++j) v -= f.lu.at(i, j) * x[j];
      x[i] = v / f.lu.at(i, i);
    }
    for (int i = 0; i < n; ++i) inv.at(i, col) = x[i];
  }
  return inv;
}

double lu_log_abs_det(const LuFactors& f, int* det_sign) {
  int n = f.lu.rows();
  double log_abs = 0.0;
  int sign = f.sign;
  for (int i = 0; i < n; ++i) {
    double p = f.lu.at(i, i);
    if (p < 0) sign = -sign;
    log_abs += std::log(std::fabs(p));
  }
  if (det_sign) *det_sign = sign;
  return log_abs;
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ContractViolation("matmul: inner dims differ, " + a.shape_str() + " * " + b.shape_str());
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  for (int i = 0; i < m; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * k];
    double* orow = &out.data[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

}  // namespace sanmt
