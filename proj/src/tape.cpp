#include "sanmt/tape.hpp"

#include <cmath>

#include "sanmt/linalg.hpp"

namespace sanmt {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "subtract";
    case OpKind::kMul: return "elementwise-multiply";
    case OpKind::kScale: return "scalar-scale";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kColSoftmax: return "column-softmax";
    case OpKind::kRowSoftmax: return "row-softmax";
    case OpKind::kConcatRows: return "concat-rows";
    case OpKind::kConcatCols: return "concat-cols";
    case OpKind::kSlice: return "slice";
    case OpKind::kEmbedLookup: return "embedding-lookup";
    case OpKind::kDropout: return "dropout-mask-apply";
    case OpKind::kL2Norm: return "L2-norm";
    case OpKind::kMatInverse: return "matrix-inverse";
    case OpKind::kLogDet: return "log-determinant";
    case OpKind::kDiagExtract: return "diag-extract";
    case OpKind::kDiagMake: return "diag-make";
    case OpKind::kSum: return "sum";
    case OpKind::kHardSelect: return "hard-select";
  }
  return "?";
}

namespace {

void require(bool ok, OpKind op, const std::string& what) {
  if (!ok) throw ContractViolation(std::string(op_name(op)) + ": " + what);
}

Tensor softmax_cols(const Tensor& x) {
  Tensor y = x;
  int r = x.rows(), c = x.cols();
  for (int j = 0; j < c; ++j) {
    double m = x.at(0, j);
    for (int i = 1; i < r; ++i) m = std::max(m, x.at(i, j));
    double z = 0.0;
    for (int i = 0; i < r; ++i) {
      double e = std::exp(x.at(i, j) - m);
      y.at(i, j) = e;
      z += e;
    }
    for (int i = 0; i < r; ++i) y.at(i, j) /= z;
  }
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y = x;
  int r = x.rows(), c = x.cols();
  for (int i = 0; i < r; ++i) {
    double m = x.at(i, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, x.at(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      double e = std::exp(x.at(i, j) - m);
      y.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < c; ++j) y.at(i, j) /= z;
  }
  return y;
}

// Forward evaluation of one node given resolved input values. Shared by
// the builder methods and recompute() so replay is bit-identical.
Tensor eval_op(TapeNode& n, const std::vector<const Tensor*>& in) {
  switch (n.op) {
    case OpKind::kLeaf:
      return n.value;
    case OpKind::kMatMul:
      return matmul_values(*in[0], *in[1]);
    case OpKind::kTranspose: {
      const Tensor& a = *in[0];
      Tensor out(a.cols(), a.rows());
      for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
      return out;
    }
    case OpKind::kAdd: {
      require(in[0]->same_shape(*in[1]), n.op,
              "shape mismatch " + in[0]->shape_str() + " vs " + in[1]->shape_str());
      Tensor out = *in[0];
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += in[1]->data[i];
      return out;
    }
    case OpKind::kSub: {
      require(in[0]->same_shape(*in[1]), n.op,
              "shape mismatch " + in[0]->shape_str() + " vs " + in[1]->shape_str());
      Tensor out = *in[0];
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= in[1]->data[i];
      return out;
    }
    case OpKind::kMul: {
      require(in[0]->same_shape(*in[1]), n.op,
              "shape mismatch " + in[0]->shape_str() + " vs " + in[1]->shape_str());
      Tensor out = *in[0];
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= in[1]->data[i];
      return out;
    }
    case OpKind::kScale: {
      Tensor out = *in[0];
      for (double& v : out.data) v *= n.scalar;
      return out;
    }
    case OpKind::kExp: {
      Tensor out = *in[0];
      for (double& v : out.data) v = std::exp(v);
      return out;
    }
    case OpKind::kLog: {
      Tensor out = *in[0];
      for (double& v : out.data) v = std::log(v);
      return out;
    }
    case OpKind::kSigmoid: {
      Tensor out = *in[0];
      for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
      return out;
    }
    case OpKind::kTanh: {
      Tensor out = *in[0];
      for (double& v : out.data) v = std::tanh(v);
      return out;
    }
    case OpKind::kColSoftmax:
      return softmax_cols(*in[0]);
    case OpKind::kRowSoftmax:
      return softmax_rows(*in[0]);
    case OpKind::kConcatRows: {
      int c = in[0]->cols(), r = 0;
      for (const Tensor* t : in) {
        require(t->cols() == c, n.op, "column counts differ");
        r += t->rows();
      }
      Tensor out(r, c);
      int off = 0;
      for (const Tensor* t : in) {
        for (int i = 0; i < t->rows(); ++i)
          for (int j = 0; j < c; ++j) out.at(off + i, j) = t->at(i, j);
        off += t->rows();
      }
      return out;
    }
    case OpKind::kConcatCols: {
      int r = in[0]->rows(), c = 0;
      for (const Tensor* t : in) {
        require(t->rows() == r, n.op, "row counts differ");
        c += t->cols();
      }
      Tensor out(r, c);
      int off = 0;
      for (const Tensor* t : in) {
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < t->cols(); ++j) out.at(i, off + j) = t->at(i, j);
        off += t->cols();
      }
      return out;
    }
    case OpKind::kSlice: {
      const Tensor& a = *in[0];
      require(0 <= n.r0 && n.r0 < n.r1 && n.r1 <= a.rows() && 0 <= n.c0 &&
                  n.c0 < n.c1 && n.c1 <= a.cols(),
              n.op, "bounds out of range for " + a.shape_str());
      Tensor out(n.r1 - n.r0, n.c1 - n.c0);
      for (int i = n.r0; i < n.r1; ++i)
        for (int j = n.c0; j < n.c1; ++j) out.at(i - n.r0, j - n.c0) = a.at(i, j);
      return out;
    }
    case OpKind::kEmbedLookup: {
      const Tensor& table = *in[0];
      int d = table.cols();
      int cols = static_cast<int>(n.indices.size());
      require(cols >= 1, n.op, "empty id sequence");
      Tensor out(d, cols);
      for (int j = 0; j < cols; ++j) {
        int id = n.indices[j];
        require(0 <= id && id < table.rows(), n.op, "token id out of range");
        for (int i = 0; i < d; ++i) out.at(i, j) = table.at(id, i);
      }
      return out;
    }
    case OpKind::kDropout: {
      require(in[0]->same_shape(n.aux), n.op, "mask shape mismatch");
      Tensor out = *in[0];
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= n.aux.data[i];
      return out;
    }
    case OpKind::kL2Norm: {
      double s = 0.0;
      for (double v : in[0]->data) s += v * v;
      return Tensor::scalar(std::sqrt(s));
    }
    case OpKind::kMatInverse: {
      LuFactors f = lu_factor(*in[0]);
      if (f.singular) {
        SingularMatrixError err(op_name(n.op),
                                "matrix-inverse: singular matrix (pivot below 1e-12 of max entry)");
        err.n = in[0]->rows();
        err.max_abs_score = f.max_abs;
        throw err;
      }
      return lu_inverse(f);
    }
    case OpKind::kLogDet: {
      LuFactors f = lu_factor(*in[0]);
      if (f.singular) {
        SingularMatrixError err(op_name(n.op),
                                "log-determinant: singular matrix (pivot below 1e-12 of max entry)");
        err.n = in[0]->rows();
        err.max_abs_score = f.max_abs;
        throw err;
      }
      n.aux = lu_inverse(f);  // kept for the adjoint
      int sign = 1;
      double v = lu_log_abs_det(f, &sign);
      return Tensor::scalar(v);
    }
    case OpKind::kDiagExtract: {
      const Tensor& a = *in[0];
      require(a.rows() == a.cols(), n.op, "matrix must be square");
      Tensor out(a.rows(), 1);
      for (int i = 0; i < a.rows(); ++i) out.at(i, 0) = a.at(i, i);
      return out;
    }
    case OpKind::kDiagMake: {
      const Tensor& v = *in[0];
      require(v.cols() == 1, n.op, "expects a column vector");
      Tensor out(v.rows(), v.rows());
      for (int i = 0; i < v.rows(); ++i) out.at(i, i) = v.at(i, 0);
      return out;
    }
    case OpKind::kSum: {
      double s = 0.0;
      for (double v : in[0]->data) s += v;
      return Tensor::scalar(s);
    }
    case OpKind::kHardSelect: {
      const Tensor& b = *in[0];
      Tensor out(b.rows(), b.cols());
      for (int j = 0; j < b.cols(); ++j) {
        int best = 0;
        for (int i = 1; i < b.rows(); ++i)
          if (b.at(i, j) > b.at(best, j)) best = i;  // ties keep smallest index
        out.at(best, j) = 1.0;
      }
      return out;
    }
  }
  throw ContractViolation("unknown op");
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.data.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

int Tape::push(TapeNode n) {
  if (n.op != OpKind::kLeaf) {
    std::vector<const Tensor*> in;
    in.reserve(n.inputs.size());
    bool rg = false;
    for (int id : n.inputs) {
      in.push_back(&nodes_[id].value);
      rg = rg || nodes_[id].requires_grad;
    }
    n.requires_grad = rg;
    n.value = eval_op(n, in);
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor t) {
  TapeNode n;
  n.op = OpKind::kLeaf;
  n.requires_grad = t.requires_grad;
  n.value = std::move(t);
  return push(std::move(n));
}

int Tape::constant(Tensor t) {
  t.requires_grad = false;
  return leaf(std::move(t));
}

#define SANMT_UNARY(fn, kind)            \
  int Tape::fn(int a) {                  \
    TapeNode n;                          \
    n.op = kind;                         \
    n.inputs = {a};                      \
    return push(std::move(n));           \
  }

SANMT_UNARY(transpose, OpKind::kTranspose)
SANMT_UNARY(exp, OpKind::kExp)
SANMT_UNARY(log, OpKind::kLog)
SANMT_UNARY(sigmoid, OpKind::kSigmoid)
SANMT_UNARY(tanh, OpKind::kTanh)
SANMT_UNARY(col_softmax, OpKind::kColSoftmax)
SANMT_UNARY(row_softmax, OpKind::kRowSoftmax)
SANMT_UNARY(l2_norm, OpKind::kL2Norm)
SANMT_UNARY(matrix_inverse, OpKind::kMatInverse)
SANMT_UNARY(log_det, OpKind::kLogDet)
SANMT_UNARY(diag_extract, OpKind::kDiagExtract)
SANMT_UNARY(diag_make, OpKind::kDiagMake)
SANMT_UNARY(sum, OpKind::kSum)
SANMT_UNARY(hard_select, OpKind::kHardSelect)
#undef SANMT_UNARY

#define SANMT_BINARY(fn, kind)           \
  int Tape::fn(int a, int b) {           \
    TapeNode n;                          \
    n.op = kind;                         \
    n.inputs = {a, b};                   \
    return push(std::move(n));           \
  }

SANMT_BINARY(matmul, OpKind::kMatMul)
SANMT_BINARY(add, OpKind::kAdd)
SANMT_BINARY(sub, OpKind::kSub)
SANMT_BINARY(mul, OpKind::kMul)
#undef SANMT_BINARY

int Tape::scale(int a, double k) {
  TapeNode n;
  n.op = OpKind::kScale;
  n.inputs = {a};
  n.scalar = k;
  return push(std::move(n));
}

int Tape::concat_rows(const std::vector<int>& parts) {
  if (parts.empty()) throw ContractViolation("concat-rows: no inputs");
  TapeNode n;
  n.op = OpKind::kConcatRows;
  n.inputs = parts;
  return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) throw ContractViolation("concat-cols: no inputs");
  TapeNode n;
  n.op = OpKind::kConcatCols;
  n.inputs = parts;
  return push(std::move(n));
}

int Tape::slice(int a, int r0, int r1, int c0, int c1) {
  TapeNode n;
  n.op = OpKind::kSlice;
  n.inputs = {a};
  n.r0 = r0;
  n.r1 = r1;
  n.c0 = c0;
  n.c1 = c1;
  return push(std::move(n));
}

int Tape::embedding_lookup(int table, std::vector<int> ids) {
  TapeNode n;
  n.op = OpKind::kEmbedLookup;
  n.inputs = {table};
  n.indices = std::move(ids);
  return push(std::move(n));
}

int Tape::dropout(int a, Tensor scaled_mask) {
  TapeNode n;
  n.op = OpKind::kDropout;
  n.inputs = {a};
  n.aux = std::move(scaled_mask);
  return push(std::move(n));
}

void Tape::recompute() {
  for (TapeNode& n : nodes_) {
    if (n.op == OpKind::kLeaf) continue;
    std::vector<const Tensor*> in;
    in.reserve(n.inputs.size());
    for (int id : n.inputs) in.push_back(&nodes_[id].value);
    n.value = eval_op(n, in);
  }
}

std::vector<Tensor> Tape::backward(int loss_id, double seed) const {
  if (loss_id < 0 || loss_id >= static_cast<int>(nodes_.size()))
    throw ContractViolation("backward: bad loss node id");
  if (!nodes_[loss_id].value.is_scalar())
    throw ContractViolation("backward: loss node must be a scalar, got " +
                            nodes_[loss_id].value.shape_str());

  std::vector<Tensor> grads(nodes_.size());
  grads[loss_id] = Tensor::scalar(seed);

  for (int id = loss_id; id >= 0; --id) {
    const TapeNode& n = nodes_[id];
    if (n.op == OpKind::kLeaf || !n.requires_grad) continue;
    const Tensor& g = grads[id];
    if (g.data.empty()) continue;

    auto gin = [&](int k) -> Tensor& { return grads[n.inputs[k]]; };
    auto want = [&](int k) { return nodes_[n.inputs[k]].requires_grad; };
    auto inv = [&](int k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

    switch (n.op) {
      case OpKind::kMatMul: {
        if (want(0)) {
          // dA = G * B^T
          const Tensor& b = inv(1);
          Tensor bt(b.cols(), b.rows());
          for (int i = 0; i < b.rows(); ++i)
            for (int j = 0; j < b.cols(); ++j) bt.at(j, i) = b.at(i, j);
          accumulate(gin(0), matmul_values(g, bt));
        }
        if (want(1)) {
          // dB = A^T * G
          const Tensor& a = inv(0);
          Tensor at(a.cols(), a.rows());
          for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) at.at(j, i) = a.at(i, j);
          accumulate(gin(1), matmul_values(at, g));
        }
        break;
      }
      case OpKind::kTranspose: {
        Tensor gt(g.cols(), g.rows());
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) gt.at(j, i) = g.at(i, j);
        accumulate(gin(0), gt);
        break;
      }
      case OpKind::kAdd: {
        if (want(0)) accumulate(gin(0), g);
        if (want(1)) accumulate(gin(1), g);
        break;
      }
      case OpKind::kSub: {
        if (want(0)) accumulate(gin(0), g);
        if (want(1)) {
          Tensor neg = g;
          for (double& v : neg.data) v = -v;
          accumulate(gin(1), neg);
        }
        break;
      }
      case OpKind::kMul: {
        if (want(0)) {
          Tensor d = g;
          for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= inv(1).data[i];
          accumulate(gin(0), d);
        }
        if (want(1)) {
          Tensor d = g;
          for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= inv(0).data[i];
          accumulate(gin(1), d);
        }
        break;
      }
      case OpKind::kScale: {
        Tensor d = g;
        for (double& v : d.data) v *= n.scalar;
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kExp: {
        Tensor d = g;
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= n.value.data[i];
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kLog: {
        Tensor d = g;
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] /= inv(0).data[i];
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kSigmoid: {
        Tensor d = g;
        for (std::size_t i = 0; i < d.data.size(); ++i) {
          double y = n.value.data[i];
          d.data[i] *= y * (1.0 - y);
        }
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kTanh: {
        Tensor d = g;
        for (std::size_t i = 0; i < d.data.size(); ++i) {
          double y = n.value.data[i];
          d.data[i] *= 1.0 - y * y;
        }
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kColSoftmax: {
        const Tensor& y = n.value;
        Tensor d(y.rows(), y.cols());
        for (int j = 0; j < y.cols(); ++j) {
          double dot = 0.0;
          for (int i = 0; i < y.rows(); ++i) dot += y.at(i, j) * g.at(i, j);
          for (int i = 0; i < y.rows(); ++i)
            d.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kRowSoftmax: {
        const Tensor& y = n.value;
        Tensor d(y.rows(), y.cols());
        for (int i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (int j = 0; j < y.cols(); ++j) dot += y.at(i, j) * g.at(i, j);
          for (int j = 0; j < y.cols(); ++j)
            d.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kConcatRows: {
        int off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& part = inv(static_cast<int>(k));
          if (want(static_cast<int>(k))) {
            Tensor d(part.rows(), part.cols());
            for (int i = 0; i < part.rows(); ++i)
              for (int j = 0; j < part.cols(); ++j) d.at(i, j) = g.at(off + i, j);
            accumulate(gin(static_cast<int>(k)), d);
          }
          off += part.rows();
        }
        break;
      }
      case OpKind::kConcatCols: {
        int off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& part = inv(static_cast<int>(k));
          if (want(static_cast<int>(k))) {
            Tensor d(part.rows(), part.cols());
            for (int i = 0; i < part.rows(); ++i)
              for (int j = 0; j < part.cols(); ++j) d.at(i, j) = g.at(i, off + j);
            accumulate(gin(static_cast<int>(k)), d);
          }
          off += part.cols();
        }
        break;
      }
      case OpKind::kSlice: {
        const Tensor& a = inv(0);
        Tensor d(a.rows(), a.cols());
        for (int i = n.r0; i < n.r1; ++i)
          for (int j = n.c0; j < n.c1; ++j) d.at(i, j) = g.at(i - n.r0, j - n.c0);
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kEmbedLookup: {
        const Tensor& table = inv(0);
        Tensor d(table.rows(), table.cols());
        for (std::size_t j = 0; j < n.indices.size(); ++j)
          for (int i = 0; i < table.cols(); ++i)
            d.at(n.indices[j], i) += g.at(i, static_cast<int>(j));
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kDropout: {
        Tensor d = g;
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] *= n.aux.data[i];
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kL2Norm: {
        double norm = n.value.item();
        const Tensor& x = inv(0);
        Tensor d(x.rows(), x.cols());
        if (norm > 0.0) {
          double s = g.item() / norm;
          for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = s * x.data[i];
        }
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kMatInverse: {
        // B = A^-1, upstream G: dA = -B^T G B^T
        const Tensor& b = n.value;
        Tensor bt(b.cols(), b.rows());
        for (int i = 0; i < b.rows(); ++i)
          for (int j = 0; j < b.cols(); ++j) bt.at(j, i) = b.at(i, j);
        Tensor d = matmul_values(matmul_values(bt, g), bt);
        for (double& v : d.data) v = -v;
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kLogDet: {
        // d log|det A| / dA = A^-T
        const Tensor& binv = n.aux;
        double s = g.item();
        Tensor d(binv.cols(), binv.rows());
        for (int i = 0; i < binv.rows(); ++i)
          for (int j = 0; j < binv.cols(); ++j) d.at(j, i) = s * binv.at(i, j);
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kDiagExtract: {
        const Tensor& a = inv(0);
        Tensor d(a.rows(), a.cols());
        for (int i = 0; i < a.rows(); ++i) d.at(i, i) = g.at(i, 0);
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kDiagMake: {
        Tensor d(g.rows(), 1);
        for (int i = 0; i < g.rows(); ++i) d.at(i, 0) = g.at(i, i);
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kSum: {
        const Tensor& x = inv(0);
        double s = g.item();
        Tensor d(x.rows(), x.cols(), s);
        accumulate(gin(0), d);
        break;
      }
      case OpKind::kHardSelect: {
        // straight-through: gradient passes to the soft weights unchanged
        accumulate(gin(0), g);
        break;
      }
      case OpKind::kLeaf:
        break;
    }
  }

  // every requires_grad leaf reports a gradient, zero when unused
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const TapeNode& n = nodes_[id];
    if (n.op == OpKind::kLeaf && n.requires_grad && grads[id].data.empty())
      grads[id] = Tensor(n.value.rows(), n.value.cols());
  }
  return grads;
}

}  // namespace sanmt
