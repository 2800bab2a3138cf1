#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "advseq/tensor.hpp"

namespace advseq::ad {

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kAffine,       // a*x + b, scalar constants
  kMatmul,
  kMatmulNT,     // A * B^T
  kMatmulTN,     // A^T * B
  kTranspose2d,
  kSigmoid,
  kTanh,
  kRelu,
  kHeaviside,    // 1 where x > 0; derivative treated as 0
  kExp,
  kLog,
  kSqrt,
  kRecip,
  kSoftplus,
  kRowSoftmax,
  kRowsumTail,   // (d0, ...) -> (d0, 1)
  kBroadcastTail,
  kSumAll,
  kBroadcastFull,
  kReshape,
  kSliceTime,    // (B, n, k) -> (B, k) at time i0
  kScatterTime,  // (B, k) -> (B, n, k), zeros except time i0
  kStackTime,    // n x (B, k) -> (B, n, k)
  kConcatLast,
  kSliceLast,    // last-axis range [i0, i1)
  kConcatRows,   // rank-2, axis 0
  kSliceRows,    // rank-2 row range [i0, i1)
  kAddRowvec,    // x + row vector broadcast over leading dims
  kConv1dSame,
  kConv1dKgrad,  // kernel gradient of conv1d_same
  kKernelFlip,   // (w, ci, co) -> (w, co, ci), width reversed
};

const char* op_name(OpKind kind);

struct Node {
  OpKind kind = OpKind::kLeaf;
  std::vector<std::int32_t> inputs;
  Tensor value;
  bool param = false;   // leaf that is a trainable parameter
  double a = 0.0;       // affine scale / misc
  double b = 0.0;       // affine shift
  std::int64_t i0 = 0;  // slice index / range start / conv width
  std::int64_t i1 = 0;  // range end
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid as long as the graph
/// lives.
struct Var {
  Graph* graph = nullptr;
  std::int32_t id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const;
};

/// Append-only tape of operation records. Insertion order is topological
/// order; backward traverses records once in reverse insertion order.
/// Node storage is a deque so references into the tape stay valid while new
/// nodes are emitted (the backward pass appends while it reads). Confined to
/// one thread at a time.
class Graph {
 public:
  Var leaf(Tensor value, bool param = true);
  Var constant(Tensor value);

  /// Binds a parameter tensor as a leaf, at most once per graph: repeated
  /// calls with the same tensor return the same node, so gradients from every
  /// use of the parameter accumulate in one place. The tensor must stay alive
  /// and unmodified for the lifetime of the graph.
  Var param_leaf(const Tensor& tensor);
  /// The leaf previously bound for this tensor, or an invalid Var.
  Var find_leaf(const Tensor* tensor) const;

  std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }
  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

  // Internal: appends a node whose value has already been computed and
  // aborts with a diagnostic if the value is non-finite.
  Var emit(Node node);

 private:
  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::int32_t> bound_params_;
};

// --- primitives ------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var affine(Var x, double a, double b);
Var neg(Var x);
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var matmul_tn(Var a, Var b);  // a^T * b
Var transpose2d(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var heaviside(Var x);
Var exp(Var x);
Var log(Var x);
Var sqrt(Var x);
Var recip(Var x);
Var softplus(Var x);
Var row_softmax(Var x);
Var rowsum_tail(Var x);
Var broadcast_tail(Var x, const Shape& target);
Var sum_all(Var x);
Var mean_all(Var x);
Var broadcast_full(Var x, const Shape& target);
Var reshape(Var x, const Shape& target);
Var slice_time(Var x, std::int64_t t);
Var scatter_time(Var x, std::int64_t t, std::int64_t n);
Var stack_time(std::span<const Var> steps);
Var concat_last(Var a, Var b);
Var slice_last(Var x, std::int64_t from, std::int64_t to);
Var concat_rows(Var a, Var b);
Var slice_rows(Var x, std::int64_t from, std::int64_t to);
Var add_rowvec(Var x, Var row);
Var conv1d_same(Var x, Var kernel);
Var conv1d_kgrad(Var x, Var dy, std::int64_t width);
Var kernel_flip(Var kernel);

// --- composites used across modules ----------------------------------------

Var l2_norm(Var x);                       // sqrt(sum(x*x)), scalar
Var rowwise_l2_norm(Var x);               // (d0, ...) -> (d0, 1)

// --- differentiation --------------------------------------------------------

/// Accumulated adjoints keyed by node id. Shapes always mirror the node
/// they differentiate; querying a node that the loss does not depend on
/// yields zeros.
class GradMap {
 public:
  void set(std::int32_t id, Tensor grad);
  bool has(Var v) const;
  Tensor grad(Var v) const;  // zeros of v's shape when absent

 private:
  std::unordered_map<std::int32_t, Tensor> grads_;
};

/// Reverse-mode pass from a scalar loss. Emits the adjoint computation onto
/// the same tape, so gradients are themselves differentiable; returns the
/// adjoint values for every node the loss depends on.
GradMap backward(Graph& graph, Var loss);

/// The adjoint d(scalar)/d(wrt) as a live graph node, for losses that
/// contain gradients (double backward).
Var grad_as_node(Graph& graph, Var scalar, Var wrt);

}  // namespace advseq::ad
