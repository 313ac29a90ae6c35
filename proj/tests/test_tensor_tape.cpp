#include <doctest.h>

#include <cmath>

#include "sanmt/linalg.hpp"
#include "sanmt/rng.hpp"
#include "sanmt/tape.hpp"
#include "test_util.hpp"

using namespace sanmt;
using testutil::max_grad_err;
using testutil::random_spd_like;
using testutil::random_tensor;

TEST_CASE("tensor invariants") {
  Tensor t(2, 3, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor(0, 2), ContractViolation);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ContractViolation);
  CHECK(Tensor::scalar(3.0).item() == 3.0);
}

TEST_CASE("forward examples") {
  Tape tape;
  int a = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  int eye = tape.constant(Tensor::eye(2));
  const Tensor& prod = tape.val(tape.matmul(a, eye));
  CHECK(prod.at(0, 0) == 1.0);
  CHECK(prod.at(0, 1) == 2.0);
  CHECK(prod.at(1, 0) == 3.0);
  CHECK(prod.at(1, 1) == 4.0);

  int d = tape.constant(Tensor::matrix({{2, 0}, {0, 4}}));
  const Tensor& inv = tape.val(tape.matrix_inverse(d));
  CHECK(inv.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(inv.at(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(inv.at(0, 1) == doctest::Approx(0.0));

  int z = tape.constant(Tensor(2, 2, 0.0));
  const Tensor& sm = tape.val(tape.col_softmax(z));
  for (double v : sm.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("column softmax stochasticity") {
  Rng rng(7);
  Tensor x = random_tensor(5, 4, rng, -3, 3);
  Tape tape;
  const Tensor& y = tape.val(tape.col_softmax(tape.constant(x)));
  for (int j = 0; j < 4; ++j) {
    double s = 0.0;
    for (int i = 0; i < 5; ++i) {
      CHECK(y.at(i, j) > 0.0);
      CHECK(y.at(i, j) < 1.0);
      s += y.at(i, j);
    }
    CHECK(std::fabs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("shape contract violations") {
  Tape tape;
  int a = tape.constant(Tensor(2, 3));
  int b = tape.constant(Tensor(3, 3));
  CHECK_THROWS_AS(tape.add(a, b), ContractViolation);
  CHECK_THROWS_AS(tape.matmul(a, a), ContractViolation);
  CHECK_THROWS_AS(tape.diag_extract(a), ContractViolation);
  CHECK_THROWS_AS(tape.slice(a, 0, 3, 0, 1), ContractViolation);
}

TEST_CASE("singular matrix reporting") {
  Tape tape;
  int a = tape.constant(Tensor::matrix({{1, 2}, {2, 4}}));
  CHECK_THROWS_AS(tape.matrix_inverse(a), SingularMatrixError);
  CHECK_THROWS_AS(tape.log_det(a), SingularMatrixError);
  try {
    tape.matrix_inverse(a);
  } catch (const SingularMatrixError& e) {
    CHECK(e.op == "matrix-inverse");
  }
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Tensor x(2, 2, 1.0);
  x.requires_grad = true;
  int xn = tape.leaf(x);
  CHECK_THROWS_AS(tape.backward(xn), ContractViolation);
}

TEST_CASE("sigmoid gradient at zero") {
  Tensor x = Tensor::scalar(0.0);
  x.requires_grad = true;
  Tape tape;
  int xn = tape.leaf(x);
  int loss = tape.sum(tape.sigmoid(xn));
  auto grads = tape.backward(loss);
  CHECK(grads[xn].item() == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("log-determinant gradient is the transposed inverse") {
  // d logdet / dA at diag(2,4) is diag(1/2, 1/4); checked against central
  // finite differences at 1e-6 relative
  Tensor a = Tensor::matrix({{2, 0}, {0, 4}});
  Tensor g;
  {
    Tensor x = a;
    x.requires_grad = true;
    Tape tape;
    int an = tape.leaf(x);
    auto grads = tape.backward(tape.log_det(an));
    g = grads[an];
  }
  CHECK(g.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.at(1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(g.at(0, 1) == doctest::Approx(0.0));
  double err = max_grad_err(a, [](Tape& t, int x) { return t.log_det(x); });
  CHECK(err <= 1e-6);
}

TEST_CASE("sum of inverse matches finite differences") {
  Rng rng(11);
  Tensor a = random_spd_like(3, rng);
  double err = max_grad_err(a, [](Tape& t, int x) { return t.sum(t.matrix_inverse(x)); });
  CHECK(err <= 1e-4);
}

TEST_CASE("inverse adjoint matches the analytic rule") {
  // for B = A^-1 with upstream W: dA = -B^T W B^T
  Rng rng(13);
  Tensor a = random_spd_like(4, rng);
  Tensor w = random_tensor(4, 4, rng);

  Tensor x = a;
  x.requires_grad = true;
  Tape tape;
  int an = tape.leaf(x);
  int inv = tape.matrix_inverse(an);
  int loss = tape.sum(tape.mul(tape.constant(w), inv));
  auto grads = tape.backward(loss);

  LuFactors f = lu_factor(a);
  Tensor b = lu_inverse(f);
  Tensor bt(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) bt.at(j, i) = b.at(i, j);
  Tensor expected = matmul_values(matmul_values(bt, w), bt);
  for (double& v : expected.data) v = -v;

  for (int i = 0; i < 16; ++i)
    CHECK(std::fabs(grads[an].data[i] - expected.data[i]) <= 1e-10);
}

TEST_CASE("finite differences pass for every differentiable op") {
  Rng rng(17);
  auto weighted = [](Tape& t, int y) {
    const Tensor& v = t.val(y);
    Rng local(static_cast<std::uint64_t>(v.size()) + 29);
    return t.sum(t.mul(t.constant(random_tensor(v.rows(), v.cols(), local)), y));
  };

  for (int trial = 0; trial < 3; ++trial) {
    int r = rng.uniform_int(1, 8);
    int c = rng.uniform_int(1, 8);
    Tensor x = random_tensor(r, c, rng);
    Tensor pos = random_tensor(r, c, rng, 0.5, 2.0);
    Tensor other = random_tensor(r, c, rng);
    Tensor sq = random_spd_like(rng.uniform_int(2, 5), rng);
    Tensor rhs = random_tensor(c, 3, rng);
    Tensor mask(r, c);
    for (double& v : mask.data) v = rng.bernoulli(0.7) ? 1.0 / 0.7 : 0.0;

    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.matmul(a, t.constant(rhs)));
          }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.transpose(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.add(a, t.constant(other)));
          }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.sub(t.constant(other), a));
          }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.mul(a, t.constant(other)));
          }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.scale(a, -1.7)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.exp(a)); }) <= 1e-4);
    CHECK(max_grad_err(pos, [&](Tape& t, int a) { return weighted(t, t.log(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.sigmoid(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.tanh(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.col_softmax(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) { return weighted(t, t.row_softmax(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.concat_rows({a, t.constant(other), a}));
          }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.concat_cols({a, t.constant(other)}));
          }) <= 1e-4);
    if (r >= 2 && c >= 2)
      CHECK(max_grad_err(x, [&](Tape& t, int a) {
              return weighted(t, t.slice(a, 1, r, 0, c - 1));
            }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            return weighted(t, t.embedding_lookup(a, {0, r - 1, 0}));
          }) <= 1e-4);
    CHECK(max_grad_err(x, [&](Tape& t, int a) {
            Tensor m = mask;
            return weighted(t, t.dropout(a, m));
          }) <= 1e-4);
    CHECK(max_grad_err(pos, [](Tape& t, int a) { return t.l2_norm(a); }) <= 1e-4);
    CHECK(max_grad_err(sq, [&](Tape& t, int a) {
            return weighted(t, t.matrix_inverse(a));
          }) <= 1e-4);
    CHECK(max_grad_err(sq, [](Tape& t, int a) { return t.log_det(a); }) <= 1e-4);
    CHECK(max_grad_err(sq, [&](Tape& t, int a) { return weighted(t, t.diag_extract(a)); }) <= 1e-4);
    std::vector<double> head(x.data.begin(), x.data.begin() + r);
    CHECK(max_grad_err(Tensor({r, 1}, head),
                       [&](Tape& t, int a) { return weighted(t, t.diag_make(a)); }) <= 1e-4);
    CHECK(max_grad_err(x, [](Tape& t, int a) { return t.sum(a); }) <= 1e-4);
  }
}

TEST_CASE("straight-through gradient equals the offset soft path") {
  // hard_select forward emits one-hot columns; its backward must equal
  // the true gradient of f(x + const(onehot - x0)), checked by finite
  // differences and exactly against the pass-through reference
  Rng rng(23);
  Tensor x = random_tensor(4, 4, rng);
  Tensor w = random_tensor(4, 4, rng);

  Tensor xg = x;
  xg.requires_grad = true;
  Tape tape;
  int xn = tape.leaf(xg);
  int hard = tape.hard_select(xn);
  int loss = tape.sum(tape.mul(tape.constant(w), tape.tanh(hard)));
  auto grads = tape.backward(loss);

  Tensor onehot = tape.val(hard);
  for (int j = 0; j < 4; ++j) {
    double col = 0.0;
    for (int i = 0; i < 4; ++i) col += onehot.at(i, j);
    CHECK(col == 1.0);
  }

  Tensor offset = onehot;
  for (std::size_t i = 0; i < offset.data.size(); ++i) offset.data[i] -= x.data[i];
  double err = max_grad_err(x, [&](Tape& t, int a) {
    int soft = t.add(a, t.constant(offset));
    return t.sum(t.mul(t.constant(w), t.tanh(soft)));
  });
  CHECK(err <= 1e-4);

  Tape ref;
  Tensor xr = x;
  xr.requires_grad = true;
  int rn = ref.leaf(xr);
  int soft = ref.add(rn, ref.constant(offset));
  int rloss = ref.sum(ref.mul(ref.constant(w), ref.tanh(soft)));
  auto rgrads = ref.backward(rloss);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    CHECK(std::fabs(grads[xn].data[i] - rgrads[rn].data[i]) <= 1e-10);
}

TEST_CASE("hard select tie goes to the smallest index") {
  Tape tape;
  int b = tape.constant(Tensor(3, 3, 1.0 / 3));
  const Tensor& h = tape.val(tape.hard_select(b));
  for (int j = 0; j < 3; ++j) {
    CHECK(h.at(0, j) == 1.0);
    CHECK(h.at(1, j) == 0.0);
    CHECK(h.at(2, j) == 0.0);
  }
}

TEST_CASE("gradient accumulation over fan-out") {
  // loss = sum(x (.) x) + sum(x): dL/dx = 2x + 1
  Tensor x = Tensor::matrix({{1.5, -2.0}});
  x.requires_grad = true;
  Tape tape;
  int xn = tape.leaf(x);
  int loss = tape.add(tape.sum(tape.mul(xn, xn)), tape.sum(xn));
  auto grads = tape.backward(loss);
  CHECK(grads[xn].at(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(grads[xn].at(0, 1) == doctest::Approx(-3.0).epsilon(1e-14));
}

TEST_CASE("non-participating leaves get zero gradients") {
  Tensor x = Tensor::scalar(2.0);
  x.requires_grad = true;
  Tape tape;
  int used = tape.leaf(x);
  Tensor y(3, 2, 1.0);
  y.requires_grad = true;
  int unused = tape.leaf(y);
  auto grads = tape.backward(tape.sum(tape.tanh(used)));
  CHECK(grads[unused].rows() == 3);
  CHECK(grads[unused].cols() == 2);
  for (double v : grads[unused].data) CHECK(v == 0.0);
}

TEST_CASE("tape replay is bit-identical") {
  Rng rng(31);
  Tensor x = random_tensor(4, 4, rng);
  Tape tape;
  int xn = tape.constant(x);
  int y = tape.col_softmax(tape.matmul(tape.exp(tape.scale(xn, 0.3)), xn));
  int z = tape.log_det(tape.add(tape.constant(random_spd_like(4, rng)),
                                tape.mul(y, tape.constant(random_tensor(4, 4, rng)))));
  std::vector<double> before = tape.val(y).data;
  double z_before = tape.val(z).item();
  tape.recompute();
  CHECK(tape.val(z).item() == z_before);
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(tape.val(y).data[i] == before[i]);
}

TEST_CASE("seeded rng determinism and range") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    double v = u.uniform(-0.04, 0.04);
    CHECK(v >= -0.04);
    CHECK(v < 0.04);
  }

  Rng s1(1), s2(2);
  bool differ = false;
  for (int i = 0; i < 100 && !differ; ++i) differ = s1.next_u64() != s2.next_u64();
  CHECK(differ);

  Rng base(9);
  Rng f1 = base.fork(1), f2 = base.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
}
