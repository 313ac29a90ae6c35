#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "sanmt/errors.hpp"

namespace sanmt {

// Dense row-major matrix of 64-bit floats. Everything in the toolkit is
// rank <= 2; scalars are 1x1, column vectors n x 1.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : shape{r, c}, data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 1 || c < 1) throw ContractViolation("tensor dims must be >= 1");
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    std::int64_t n = 1;
    for (int dim : shape) {
      if (dim < 1) throw ContractViolation("tensor dims must be >= 1");
      n *= dim;
    }
    if (shape.empty() || n != static_cast<std::int64_t>(data.size()))
      throw ContractViolation("tensor shape does not match data length");
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = static_cast<int>(rows.begin()->size());
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw ContractViolation("ragged matrix literal");
      int j = 0;
      for (double v : row) t.at(i, j++) = v;
      ++i;
    }
    return t;
  }

  static Tensor column(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n, 1}, std::move(v));
  }

  static Tensor eye(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  static Tensor ones(int r, int c) { return Tensor(r, c, 1.0); }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return size() == 1; }

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }

  double item() const {
    if (!is_scalar()) throw ContractViolation("item() on non-scalar tensor");
    return data[0];
  }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  std::string shape_str() const;
  double max_abs() const;
  bool all_finite() const;
};

}  // namespace sanmt
