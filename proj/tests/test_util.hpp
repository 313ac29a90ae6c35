#pragma once

#include <cmath>
#include <functional>

#include "sanmt/rng.hpp"
#include "sanmt/tape.hpp"
#include "sanmt/tensor.hpp"

namespace sanmt::testutil {

inline Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// diagonally dominant, comfortably invertible
inline Tensor random_spd_like(int n, Rng& rng) {
  Tensor t = random_tensor(n, n, rng);
  for (int i = 0; i < n; ++i) t.at(i, i) += n + 1.0;
  return t;
}

// Central finite differences against reverse-mode gradients. `build`
// constructs the scalar loss from the input node on a fresh tape; the
// forward value must be a deterministic function of the input tensor.
inline double max_grad_err(const Tensor& x0,
                           const std::function<int(Tape&, int)>& build,
                           double step = 1e-5) {
  Tensor x = x0;
  x.requires_grad = true;
  Tape tape;
  int xn = tape.leaf(x);
  int loss = build(tape, xn);
  std::vector<Tensor> grads = tape.backward(loss);
  const Tensor& g = grads[xn];

  auto eval = [&](const Tensor& xv) {
    Tape t2;
    int anode = t2.leaf(xv);
    return t2.val(build(t2, anode)).item();
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < x0.data.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp.data[i] += step;
    xm.data[i] -= step;
    double fd = (eval(xp) - eval(xm)) / (2.0 * step);
    double denom = std::max(1.0, std::fabs(fd) + std::fabs(g.data[i]));
    worst = std::max(worst, std::fabs(g.data[i] - fd) / denom);
  }
  return worst;
}

}  // namespace sanmt::testutil
