#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sanmt/tensor.hpp"

namespace sanmt {

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,          // elementwise
  kScale,        // by compile-time scalar
  kExp,
  kLog,
  kSigmoid,
  kTanh,
  kColSoftmax,
  kRowSoftmax,
  kConcatRows,
  kConcatCols,
  kSlice,
  kEmbedLookup,  // table (V x d) gathered into d x n columns
  kDropout,      // apply pre-sampled scaled mask
  kL2Norm,
  kMatInverse,
  kLogDet,
  kDiagExtract,
  kDiagMake,
  kSum,
  kHardSelect,   // one-hot argmax per column; straight-through backward
};

const char* op_name(OpKind k);

struct TapeNode {
  OpKind op = OpKind::kLeaf;
  Tensor value;
  std::vector<int> inputs;
  bool requires_grad = false;
  // op attributes
  double scalar = 0.0;           // kScale
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // kSlice
  std::vector<int> indices;      // kEmbedLookup
  Tensor aux;                    // kDropout mask / kLogDet inverse
};

// Reverse-mode tape. Nodes are appended in topological order; backward
// walks them once in reverse, summing gradients where a node fans out.
// Single-writer: one tape per example batch.
class Tape {
 public:
  int leaf(Tensor t);
  int constant(Tensor t);  // leaf that never receives gradient

  int matmul(int a, int b);
  int transpose(int a);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double k);
  int exp(int a);
  int log(int a);
  int sigmoid(int a);
  int tanh(int a);
  int col_softmax(int a);
  int row_softmax(int a);
  int concat_rows(const std::vector<int>& parts);
  int concat_cols(const std::vector<int>& parts);
  int slice(int a, int r0, int r1, int c0, int c1);
  int embedding_lookup(int table, std::vector<int> ids);
  int dropout(int a, Tensor scaled_mask);
  int l2_norm(int a);
  int matrix_inverse(int a);
  int log_det(int a);
  int diag_extract(int a);
  int diag_make(int a);
  int sum(int a);
  int hard_select(int a);

  const Tensor& val(int id) const { return nodes_[id].value; }
  const TapeNode& node(int id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Re-executes every non-leaf forward computation in place. Values are
  // bit-identical to the original pass.
  void recompute();

  // Gradients of the scalar at `loss_id` w.r.t. every node, indexed by
  // node id. requires_grad leaves always get a buffer (zeros when the
  // leaf does not participate); other nodes may have an empty tensor.
  std::vector<Tensor> backward(int loss_id, double seed = 1.0) const;

 private:
  int push(TapeNode n);
  std::vector<TapeNode> nodes_;
};

}  // namespace sanmt
