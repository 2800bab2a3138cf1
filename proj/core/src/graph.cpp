#include "advseq/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>

namespace advseq::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[noreturn]] void shape_error(OpKind kind, const Tensor& a, const Tensor& b) {
  throw Error(std::string("shape mismatch in ") + op_name(kind) + ": " +
              shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

[[noreturn]] void shape_error(OpKind kind, const Tensor& a, const std::string& detail) {
  throw Error(std::string("shape mismatch in ") + op_name(kind) + ": " +
              shape_str(a.shape()) + " (" + detail + ")");
}

Graph& same_graph(Var a, Var b, OpKind kind) {
  if (!a.valid() || !b.valid() || a.graph != b.graph) {
    throw Error(std::string(op_name(kind)) + ": operands belong to different graphs");
  }
  return *a.graph;
}

Var unary(Var x, OpKind kind, Tensor value, double a = 0.0, double b = 0.0,
          std::int64_t i0 = 0, std::int64_t i1 = 0) {
  Node n;
  n.kind = kind;
  n.inputs = {x.id};
  n.value = std::move(value);
  n.a = a;
  n.b = b;
  n.i0 = i0;
  n.i1 = i1;
  return x.graph->emit(std::move(n));
}

Var binary(Var x, Var y, OpKind kind, Tensor value, std::int64_t i0 = 0) {
  Node n;
  n.kind = kind;
  n.inputs = {x.id, y.id};
  n.value = std::move(value);
  n.i0 = i0;
  return x.graph->emit(std::move(n));
}

Tensor map_unary(const Tensor& x, double (*f)(double)) {
  Tensor out(x.shape());
  auto in = x.data();
  auto o = out.data();
  for (std::int64_t i = 0; i < x.size(); ++i) o[static_cast<std::size_t>(i)] = f(in[static_cast<std::size_t>(i)]);
  return out;
}

std::int64_t leading_extent(const Tensor& t) { return t.shape()[0]; }

std::int64_t tail_size(const Tensor& t) { return t.size() / t.shape()[0]; }

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAffine: return "affine";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kMatmulNT: return "matmul_nt";
    case OpKind::kMatmulTN: return "matmul_tn";
    case OpKind::kTranspose2d: return "transpose2d";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kHeaviside: return "heaviside";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kRecip: return "recip";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kRowSoftmax: return "row_softmax";
    case OpKind::kRowsumTail: return "rowsum_tail";
    case OpKind::kBroadcastTail: return "broadcast_tail";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kBroadcastFull: return "broadcast_full";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSliceTime: return "slice_time";
    case OpKind::kScatterTime: return "scatter_time";
    case OpKind::kStackTime: return "stack_time";
    case OpKind::kConcatLast: return "concat_last";
    case OpKind::kSliceLast: return "slice_last";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kAddRowvec: return "add_rowvec";
    case OpKind::kConv1dSame: return "conv1d_same";
    case OpKind::kConv1dKgrad: return "conv1d_kgrad";
    case OpKind::kKernelFlip: return "kernel_flip";
  }
  return "?";
}

const Tensor& Var::value() const { return graph->value(*this); }
const Shape& Var::shape() const { return graph->value(*this).shape(); }

Var Graph::leaf(Tensor value, bool param) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.param = param;
  return emit(std::move(n));
}

Var Graph::constant(Tensor value) { return leaf(std::move(value), false); }

Var Graph::param_leaf(const Tensor& tensor) {
  auto it = bound_params_.find(&tensor);
  if (it != bound_params_.end()) return Var{this, it->second};
  Var v = leaf(tensor, true);
  bound_params_.emplace(&tensor, v.id);
  return v;
}

Var Graph::find_leaf(const Tensor* tensor) const {
  auto it = bound_params_.find(tensor);
  if (it != bound_params_.end()) return Var{const_cast<Graph*>(this), it->second};
  return Var{};
}

Var Graph::emit(Node node) {
  if (!node.value.all_finite()) {
    throw Error(std::string("non-finite value produced by op ") + op_name(node.kind));
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

// --- elementwise -------------------------------------------------------------

Var add(Var a, Var b) {
  same_graph(a, b, OpKind::kAdd);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb)) shape_error(OpKind::kAdd, ta, tb);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] + tb[i];
  return binary(a, b, OpKind::kAdd, std::move(out));
}

Var sub(Var a, Var b) {
  same_graph(a, b, OpKind::kSub);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb)) shape_error(OpKind::kSub, ta, tb);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] - tb[i];
  return binary(a, b, OpKind::kSub, std::move(out));
}

Var mul(Var a, Var b) {
  same_graph(a, b, OpKind::kMul);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb)) shape_error(OpKind::kMul, ta, tb);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < ta.size(); ++i) out[i] = ta[i] * tb[i];
  return binary(a, b, OpKind::kMul, std::move(out));
}

Var affine(Var x, double a, double b) {
  const Tensor& tx = x.value();
  Tensor out(tx.shape());
  for (std::int64_t i = 0; i < tx.size(); ++i) out[i] = a * tx[i] + b;
  return unary(x, OpKind::kAffine, std::move(out), a, b);
}

Var neg(Var x) { return affine(x, -1.0, 0.0); }

// --- linear algebra ----------------------------------------------------------

Var matmul(Var a, Var b) {
  same_graph(a, b, OpKind::kMatmul);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.extent(1) != tb.extent(0)) {
    shape_error(OpKind::kMatmul, ta, tb);
  }
  const std::int64_t m = ta.extent(0), k = ta.extent(1), n = tb.extent(1);
  Tensor out({m, n});
  Eigen::Map<const RowMat> ma(ta.data().data(), m, k);
  Eigen::Map<const RowMat> mb(tb.data().data(), k, n);
  Eigen::Map<RowMat> mo(out.data().data(), m, n);
  mo.noalias() = ma * mb;
  return binary(a, b, OpKind::kMatmul, std::move(out));
}

Var matmul_nt(Var a, Var b) {
  same_graph(a, b, OpKind::kMatmulNT);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.extent(1) != tb.extent(1)) {
    shape_error(OpKind::kMatmulNT, ta, tb);
  }
  const std::int64_t m = ta.extent(0), k = ta.extent(1), n = tb.extent(0);
  Tensor out({m, n});
  Eigen::Map<const RowMat> ma(ta.data().data(), m, k);
  Eigen::Map<const RowMat> mb(tb.data().data(), n, k);
  Eigen::Map<RowMat> mo(out.data().data(), m, n);
  mo.noalias() = ma * mb.transpose();
  return binary(a, b, OpKind::kMatmulNT, std::move(out));
}

Var matmul_tn(Var a, Var b) {
  same_graph(a, b, OpKind::kMatmulTN);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.extent(0) != tb.extent(0)) {
    shape_error(OpKind::kMatmulTN, ta, tb);
  }
  const std::int64_t m = ta.extent(1), k = ta.extent(0), n = tb.extent(1);
  Tensor out({m, n});
  Eigen::Map<const RowMat> ma(ta.data().data(), k, m);
  Eigen::Map<const RowMat> mb(tb.data().data(), k, n);
  Eigen::Map<RowMat> mo(out.data().data(), m, n);
  mo.noalias() = ma.transpose() * mb;
  return binary(a, b, OpKind::kMatmulTN, std::move(out));
}

Var transpose2d(Var x) {
  const Tensor& tx = x.value();
  if (tx.rank() != 2) shape_error(OpKind::kTranspose2d, tx, "expected rank 2");
  Tensor out({tx.extent(1), tx.extent(0)});
  for (std::int64_t r = 0; r < tx.extent(0); ++r)
    for (std::int64_t c = 0; c < tx.extent(1); ++c) out.at2(c, r) = tx.at2(r, c);
  return unary(x, OpKind::kTranspose2d, std::move(out));
}

// --- nonlinearities ----------------------------------------------------------

Var sigmoid(Var x) {
  return unary(x, OpKind::kSigmoid,
               map_unary(x.value(), +[](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
}

Var tanh(Var x) {
  return unary(x, OpKind::kTanh, map_unary(x.value(), +[](double v) { return std::tanh(v); }));
}

Var relu(Var x) {
  return unary(x, OpKind::kRelu, map_unary(x.value(), +[](double v) { return v > 0.0 ? v : 0.0; }));
}

Var heaviside(Var x) {
  return unary(x, OpKind::kHeaviside,
               map_unary(x.value(), +[](double v) { return v > 0.0 ? 1.0 : 0.0; }));
}

Var exp(Var x) {
  return unary(x, OpKind::kExp, map_unary(x.value(), +[](double v) { return std::exp(v); }));
}

Var log(Var x) {
  return unary(x, OpKind::kLog, map_unary(x.value(), +[](double v) { return std::log(v); }));
}

Var sqrt(Var x) {
  return unary(x, OpKind::kSqrt, map_unary(x.value(), +[](double v) { return std::sqrt(v); }));
}

Var recip(Var x) {
  return unary(x, OpKind::kRecip, map_unary(x.value(), +[](double v) { return 1.0 / v; }));
}

Var softplus(Var x) {
  return unary(x, OpKind::kSoftplus, map_unary(x.value(), +[](double v) {
                 return (v > 0.0 ? v : 0.0) + std::log1p(std::exp(-std::abs(v)));
               }));
}

Var row_softmax(Var x) {
  const Tensor& tx = x.value();
  if (tx.rank() != 2) shape_error(OpKind::kRowSoftmax, tx, "expected rank 2");
  const std::int64_t rows = tx.extent(0), cols = tx.extent(1);
  Tensor out(tx.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    double mx = tx.at2(r, 0);
    for (std::int64_t c = 1; c < cols; ++c) mx = std::max(mx, tx.at2(r, c));
    double sum = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double e = std::exp(tx.at2(r, c) - mx);
      out.at2(r, c) = e;
      sum += e;
    }
    for (std::int64_t c = 0; c < cols; ++c) out.at2(r, c) /= sum;
  }
  return unary(x, OpKind::kRowSoftmax, std::move(out));
}

// --- reductions / broadcasts -------------------------------------------------

Var rowsum_tail(Var x) {
  const Tensor& tx = x.value();
  if (tx.rank() < 2) shape_error(OpKind::kRowsumTail, tx, "expected rank >= 2");
  const std::int64_t rows = leading_extent(tx), tail = tail_size(tx);
  Tensor out({rows, 1});
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::int64_t i = 0; i < tail; ++i) s += tx[r * tail + i];
    out[r] = s;
  }
  return unary(x, OpKind::kRowsumTail, std::move(out));
}

Var broadcast_tail(Var x, const Shape& target) {
  const Tensor& tx = x.value();
  if (tx.rank() != 2 || tx.extent(1) != 1 || target.empty() || target[0] != tx.extent(0)) {
    shape_error(OpKind::kBroadcastTail, tx, "expected (d0, 1) broadcast to " + shape_str(target));
  }
  Tensor out(target);
  const std::int64_t rows = target[0], tail = out.size() / rows;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t i = 0; i < tail; ++i) out[r * tail + i] = tx[r];
  return unary(x, OpKind::kBroadcastTail, std::move(out));
}

Var sum_all(Var x) {
  const Tensor& tx = x.value();
  double s = 0.0;
  for (std::int64_t i = 0; i < tx.size(); ++i) s += tx[i];
  return unary(x, OpKind::kSumAll, Tensor::scalar(s));
}

Var mean_all(Var x) {
  return affine(sum_all(x), 1.0 / static_cast<double>(x.value().size()), 0.0);
}

Var broadcast_full(Var x, const Shape& target) {
  const Tensor& tx = x.value();
  if (tx.size() != 1) shape_error(OpKind::kBroadcastFull, tx, "expected scalar");
  return unary(x, OpKind::kBroadcastFull, Tensor::full(target, tx[0]));
}

Var reshape(Var x, const Shape& target) {
  const Tensor& tx = x.value();
  if (shape_size(target) != tx.size()) {
    shape_error(OpKind::kReshape, tx, "cannot reshape to " + shape_str(target));
  }
  Tensor out(target, std::vector<double>(tx.data().begin(), tx.data().end()));
  return unary(x, OpKind::kReshape, std::move(out));
}

// --- sequence assembly -------------------------------------------------------

Var slice_time(Var x, std::int64_t t) {
  const Tensor& tx = x.value();
  if (tx.rank() != 3 || t < 0 || t >= tx.extent(1)) {
    shape_error(OpKind::kSliceTime, tx, "time index " + std::to_string(t));
  }
  const std::int64_t batch = tx.extent(0), steps = tx.extent(1), width = tx.extent(2);
  Tensor out({batch, width});
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t k = 0; k < width; ++k) out.at2(b, k) = tx.at3(b, t, k);
  (void)steps;
  return unary(x, OpKind::kSliceTime, std::move(out), 0, 0, t);
}

Var scatter_time(Var x, std::int64_t t, std::int64_t n) {
  const Tensor& tx = x.value();
  if (tx.rank() != 2 || t < 0 || t >= n) {
    shape_error(OpKind::kScatterTime, tx, "time index " + std::to_string(t));
  }
  const std::int64_t batch = tx.extent(0), width = tx.extent(1);
  Tensor out({batch, n, width});
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t k = 0; k < width; ++k) out.at3(b, t, k) = tx.at2(b, k);
  return unary(x, OpKind::kScatterTime, std::move(out), 0, 0, t, n);
}

Var stack_time(std::span<const Var> steps) {
  if (steps.empty()) throw Error("stack_time: no steps");
  Graph& g = *steps[0].graph;
  const Tensor& first = steps[0].value();
  if (first.rank() != 2) shape_error(OpKind::kStackTime, first, "expected rank 2 steps");
  const std::int64_t batch = first.extent(0), width = first.extent(1);
  const std::int64_t n = static_cast<std::int64_t>(steps.size());
  Tensor out({batch, n, width});
  Node node;
  node.kind = OpKind::kStackTime;
  for (std::int64_t t = 0; t < n; ++t) {
    const Tensor& ts = steps[static_cast<std::size_t>(t)].value();
    if (!ts.same_shape(first)) shape_error(OpKind::kStackTime, first, ts);
    for (std::int64_t b = 0; b < batch; ++b)
      for (std::int64_t k = 0; k < width; ++k) out.at3(b, t, k) = ts.at2(b, k);
    node.inputs.push_back(steps[static_cast<std::size_t>(t)].id);
  }
  node.value = std::move(out);
  return g.emit(std::move(node));
}

Var concat_last(Var a, Var b) {
  same_graph(a, b, OpKind::kConcatLast);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != tb.rank() || ta.rank() < 2) shape_error(OpKind::kConcatLast, ta, tb);
  for (std::int64_t ax = 0; ax + 1 < ta.rank(); ++ax) {
    if (ta.extent(ax) != tb.extent(ax)) shape_error(OpKind::kConcatLast, ta, tb);
  }
  const std::int64_t ca = ta.extent(ta.rank() - 1), cb = tb.extent(tb.rank() - 1);
  Shape target = ta.shape();
  target.back() = ca + cb;
  Tensor out(target);
  const std::int64_t rows = ta.size() / ca;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t i = 0; i < ca; ++i) out[r * (ca + cb) + i] = ta[r * ca + i];
    for (std::int64_t i = 0; i < cb; ++i) out[r * (ca + cb) + ca + i] = tb[r * cb + i];
  }
  return binary(a, b, OpKind::kConcatLast, std::move(out), ca);
}

Var slice_last(Var x, std::int64_t from, std::int64_t to) {
  const Tensor& tx = x.value();
  const std::int64_t last = tx.extent(tx.rank() - 1);
  if (tx.rank() < 2 || from < 0 || to <= from || to > last) {
    shape_error(OpKind::kSliceLast, tx,
                "range [" + std::to_string(from) + ", " + std::to_string(to) + ")");
  }
  Shape target = tx.shape();
  target.back() = to - from;
  Tensor out(target);
  const std::int64_t rows = tx.size() / last, width = to - from;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t i = 0; i < width; ++i) out[r * width + i] = tx[r * last + from + i];
  return unary(x, OpKind::kSliceLast, std::move(out), 0, 0, from, to);
}

Var concat_rows(Var a, Var b) {
  same_graph(a, b, OpKind::kConcatRows);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.extent(1) != tb.extent(1)) {
    shape_error(OpKind::kConcatRows, ta, tb);
  }
  Tensor out({ta.extent(0) + tb.extent(0), ta.extent(1)});
  std::copy(ta.data().begin(), ta.data().end(), out.data().begin());
  std::copy(tb.data().begin(), tb.data().end(), out.data().begin() + ta.size());
  return binary(a, b, OpKind::kConcatRows, std::move(out), ta.extent(0));
}

Var slice_rows(Var x, std::int64_t from, std::int64_t to) {
  const Tensor& tx = x.value();
  if (tx.rank() != 2 || from < 0 || to <= from || to > tx.extent(0)) {
    shape_error(OpKind::kSliceRows, tx,
                "row range [" + std::to_string(from) + ", " + std::to_string(to) + ")");
  }
  const std::int64_t cols = tx.extent(1);
  Tensor out({to - from, cols});
  std::copy(tx.data().begin() + from * cols, tx.data().begin() + to * cols,
            out.data().begin());
  return unary(x, OpKind::kSliceRows, std::move(out), 0, 0, from, to);
}

Var add_rowvec(Var x, Var row) {
  same_graph(x, row, OpKind::kAddRowvec);
  const Tensor& tx = x.value();
  const Tensor& tr = row.value();
  const std::int64_t cols = tx.extent(tx.rank() - 1);
  if (tr.rank() != 2 || tr.extent(0) != 1 || tr.extent(1) != cols) {
    shape_error(OpKind::kAddRowvec, tx, tr);
  }
  Tensor out(tx.shape());
  const std::int64_t rows = tx.size() / cols;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) out[r * cols + c] = tx[r * cols + c] + tr[c];
  return binary(x, row, OpKind::kAddRowvec, std::move(out));
}

// --- 1-D convolution ----------------------------------------------------------

Var conv1d_same(Var x, Var kernel) {
  same_graph(x, kernel, OpKind::kConv1dSame);
  const Tensor& tx = x.value();
  const Tensor& tk = kernel.value();
  if (tx.rank() != 3 || tk.rank() != 3 || tx.extent(2) != tk.extent(1) ||
      tk.extent(0) % 2 == 0) {
    shape_error(OpKind::kConv1dSame, tx, tk);
  }
  const std::int64_t batch = tx.extent(0), n = tx.extent(1), ci = tx.extent(2);
  const std::int64_t w = tk.extent(0), co = tk.extent(2), c = (w - 1) / 2;
  Tensor out({batch, n, co});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < n; ++t) {
      for (std::int64_t j = 0; j < w; ++j) {
        const std::int64_t s = t + j - c;
        if (s < 0 || s >= n) continue;
        for (std::int64_t i = 0; i < ci; ++i) {
          const double xv = tx.at3(b, s, i);
          if (xv == 0.0) continue;
          for (std::int64_t o = 0; o < co; ++o) out.at3(b, t, o) += xv * tk.at3(j, i, o);
        }
      }
    }
  }
  return binary(x, kernel, OpKind::kConv1dSame, std::move(out), w);
}

Var conv1d_kgrad(Var x, Var dy, std::int64_t width) {
  same_graph(x, dy, OpKind::kConv1dKgrad);
  const Tensor& tx = x.value();
  const Tensor& td = dy.value();
  if (tx.rank() != 3 || td.rank() != 3 || tx.extent(0) != td.extent(0) ||
      tx.extent(1) != td.extent(1) || width % 2 == 0) {
    shape_error(OpKind::kConv1dKgrad, tx, td);
  }
  const std::int64_t batch = tx.extent(0), n = tx.extent(1), ci = tx.extent(2);
  const std::int64_t co = td.extent(2), c = (width - 1) / 2;
  Tensor out({width, ci, co});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < n; ++t) {
      for (std::int64_t j = 0; j < width; ++j) {
        const std::int64_t s = t + j - c;
        if (s < 0 || s >= n) continue;
        for (std::int64_t i = 0; i < ci; ++i) {
          const double xv = tx.at3(b, s, i);
          if (xv == 0.0) continue;
          for (std::int64_t o = 0; o < co; ++o) out.at3(j, i, o) += xv * td.at3(b, t, o);
        }
      }
    }
  }
  return binary(x, dy, OpKind::kConv1dKgrad, std::move(out), width);
}

Var kernel_flip(Var kernel) {
  const Tensor& tk = kernel.value();
  if (tk.rank() != 3) shape_error(OpKind::kKernelFlip, tk, "expected rank 3");
  const std::int64_t w = tk.extent(0), ci = tk.extent(1), co = tk.extent(2);
  Tensor out({w, co, ci});
  for (std::int64_t j = 0; j < w; ++j)
    for (std::int64_t i = 0; i < ci; ++i)
      for (std::int64_t o = 0; o < co; ++o) out.at3(j, o, i) = tk.at3(w - 1 - j, i, o);
  return unary(kernel, OpKind::kKernelFlip, std::move(out));
}

// --- composites ---------------------------------------------------------------

Var l2_norm(Var x) { return sqrt(sum_all(mul(x, x))); }

Var rowwise_l2_norm(Var x) { return sqrt(rowsum_tail(mul(x, x))); }

// --- reverse mode ---------------------------------------------------------------

void GradMap::set(std::int32_t id, Tensor grad) { grads_[id] = std::move(grad); }

bool GradMap::has(Var v) const { return grads_.count(v.id) != 0; }

Tensor GradMap::grad(Var v) const {
  auto it = grads_.find(v.id);
  if (it != grads_.end()) return it->second;
  return Tensor::zeros(v.shape());
}

namespace {

/// Emits the adjoint computation for every node `loss` depends on, as new
/// nodes on the same tape. Returns one Var per original node; invalid Var
/// means the loss does not depend on that node.
std::vector<Var> emit_adjoints(Graph& g, Var loss) {
  if (loss.graph != &g) throw Error("backward: loss is not a node of this graph");
  if (loss.value().size() != 1) {
    throw Error("backward: loss must be scalar, got shape " + shape_str(loss.value().shape()));
  }
  std::vector<Var> adj(static_cast<std::size_t>(loss.id) + 1);
  auto accumulate = [&](std::int32_t id, Var contribution) {
    if (adj[static_cast<std::size_t>(id)].valid()) {
      adj[static_cast<std::size_t>(id)] = add(adj[static_cast<std::size_t>(id)], contribution);
    } else {
      adj[static_cast<std::size_t>(id)] = contribution;
    }
  };
  adj[static_cast<std::size_t>(loss.id)] = g.constant(Tensor::ones(loss.value().shape()));

  for (std::int32_t id = loss.id; id >= 0; --id) {
    Var u = adj[static_cast<std::size_t>(id)];
    if (!u.valid()) continue;
    const Node& node = g.node(id);
    auto in = [&](std::size_t i) { return Var{&g, node.inputs[i]}; };
    switch (node.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kAdd:
        accumulate(node.inputs[0], u);
        accumulate(node.inputs[1], u);
        break;
      case OpKind::kSub:
        accumulate(node.inputs[0], u);
        accumulate(node.inputs[1], neg(u));
        break;
      case OpKind::kMul:
        accumulate(node.inputs[0], mul(u, in(1)));
        accumulate(node.inputs[1], mul(u, in(0)));
        break;
      case OpKind::kAffine:
        accumulate(node.inputs[0], affine(u, node.a, 0.0));
        break;
      case OpKind::kMatmul:
        accumulate(node.inputs[0], matmul_nt(u, in(1)));
        accumulate(node.inputs[1], matmul_tn(in(0), u));
        break;
      case OpKind::kMatmulNT:  // C = A B^T
        accumulate(node.inputs[0], matmul(u, in(1)));
        accumulate(node.inputs[1], matmul_tn(u, in(0)));
        break;
      case OpKind::kMatmulTN:  // C = A^T B
        accumulate(node.inputs[0], matmul_nt(in(1), u));
        accumulate(node.inputs[1], matmul(in(0), u));
        break;
      case OpKind::kTranspose2d:
        accumulate(node.inputs[0], transpose2d(u));
        break;
      case OpKind::kSigmoid: {
        Var y{&g, id};
        accumulate(node.inputs[0], mul(u, mul(y, affine(y, -1.0, 1.0))));
        break;
      }
      case OpKind::kTanh: {
        Var y{&g, id};
        accumulate(node.inputs[0], mul(u, affine(mul(y, y), -1.0, 1.0)));
        break;
      }
      case OpKind::kRelu:
        accumulate(node.inputs[0], mul(u, heaviside(in(0))));
        break;
      case OpKind::kHeaviside:
        break;  // derivative is 0 almost everywhere
      case OpKind::kExp: {
        Var y{&g, id};
        accumulate(node.inputs[0], mul(u, y));
        break;
      }
      case OpKind::kLog:
        accumulate(node.inputs[0], mul(u, recip(in(0))));
        break;
      case OpKind::kSqrt: {
        Var y{&g, id};
        accumulate(node.inputs[0], mul(u, affine(recip(y), 0.5, 0.0)));
        break;
      }
      case OpKind::kRecip: {
        Var y{&g, id};
        accumulate(node.inputs[0], neg(mul(u, mul(y, y))));
        break;
      }
      case OpKind::kSoftplus:
        accumulate(node.inputs[0], mul(u, sigmoid(in(0))));
        break;
      case OpKind::kRowSoftmax: {
        Var y{&g, id};
        Var dot = rowsum_tail(mul(u, y));
        accumulate(node.inputs[0], mul(y, sub(u, broadcast_tail(dot, u.shape()))));
        break;
      }
      case OpKind::kRowsumTail:
        accumulate(node.inputs[0], broadcast_tail(u, in(0).shape()));
        break;
      case OpKind::kBroadcastTail:
        accumulate(node.inputs[0], rowsum_tail(u));
        break;
      case OpKind::kSumAll:
        accumulate(node.inputs[0], broadcast_full(u, in(0).shape()));
        break;
      case OpKind::kBroadcastFull:
        accumulate(node.inputs[0], sum_all(u));
        break;
      case OpKind::kReshape:
        accumulate(node.inputs[0], reshape(u, in(0).shape()));
        break;
      case OpKind::kSliceTime:
        accumulate(node.inputs[0], scatter_time(u, node.i0, in(0).shape()[1]));
        break;
      case OpKind::kScatterTime:
        accumulate(node.inputs[0], slice_time(u, node.i0));
        break;
      case OpKind::kStackTime:
        for (std::size_t t = 0; t < node.inputs.size(); ++t) {
          accumulate(node.inputs[t], slice_time(u, static_cast<std::int64_t>(t)));
        }
        break;
      case OpKind::kConcatLast: {
        const std::int64_t ca = node.i0;
        const std::int64_t total = node.value.extent(node.value.rank() - 1);
        accumulate(node.inputs[0], slice_last(u, 0, ca));
        accumulate(node.inputs[1], slice_last(u, ca, total));
        break;
      }
      case OpKind::kSliceLast: {
        const Tensor& tin = in(0).value();
        const std::int64_t last = tin.extent(tin.rank() - 1);
        Var padded = u;
        if (node.i0 > 0) {
          Shape left = tin.shape();
          left.back() = node.i0;
          padded = concat_last(g.constant(Tensor::zeros(left)), padded);
        }
        if (node.i1 < last) {
          Shape right = tin.shape();
          right.back() = last - node.i1;
          padded = concat_last(padded, g.constant(Tensor::zeros(right)));
        }
        accumulate(node.inputs[0], padded);
        break;
      }
      case OpKind::kConcatRows: {
        const std::int64_t ra = node.i0;
        const std::int64_t total = node.value.extent(0);
        accumulate(node.inputs[0], slice_rows(u, 0, ra));
        accumulate(node.inputs[1], slice_rows(u, ra, total));
        break;
      }
      case OpKind::kSliceRows: {
        const Tensor& tin = in(0).value();
        const std::int64_t rows = tin.extent(0), cols = tin.extent(1);
        const std::int64_t from = node.i0, to = node.i1;
        Var padded = u;
        if (from > 0) padded = concat_rows(g.constant(Tensor::zeros({from, cols})), padded);
        if (to < rows) {
          padded = concat_rows(padded, g.constant(Tensor::zeros({rows - to, cols})));
        }
        accumulate(node.inputs[0], padded);
        break;
      }
      case OpKind::kAddRowvec: {
        accumulate(node.inputs[0], u);
        const Tensor& tu = u.value();
        const std::int64_t cols = tu.extent(tu.rank() - 1);
        const std::int64_t rows = tu.size() / cols;
        Var flat = u;
        if (tu.rank() != 2) flat = reshape(u, {rows, cols});
        Var ones_row = g.constant(Tensor::ones({1, rows}));
        accumulate(node.inputs[1], matmul(ones_row, flat));
        break;
      }
      case OpKind::kConv1dSame:
        accumulate(node.inputs[0], conv1d_same(u, kernel_flip(in(1))));
        accumulate(node.inputs[1], conv1d_kgrad(in(0), u, node.i0));
        break;
      case OpKind::kConv1dKgrad:
        accumulate(node.inputs[0], conv1d_same(in(1), kernel_flip(u)));
        accumulate(node.inputs[1], conv1d_same(in(0), u));
        break;
      case OpKind::kKernelFlip:
        accumulate(node.inputs[0], kernel_flip(u));
        break;
    }
  }
  return adj;
}

}  // namespace

GradMap backward(Graph& graph, Var loss) {
  std::vector<Var> adj = emit_adjoints(graph, loss);
  GradMap grads;
  for (std::int32_t id = 0; id <= loss.id; ++id) {
    if (adj[static_cast<std::size_t>(id)].valid()) {
      grads.set(id, adj[static_cast<std::size_t>(id)].value());
    }
  }
  return grads;
}

Var grad_as_node(Graph& graph, Var scalar, Var wrt) {
  if (wrt.graph != &graph || wrt.id < 0 || wrt.id >= graph.size()) {
    throw Error("grad_as_node: wrt is not a node of this graph");
  }
  std::vector<Var> adj = emit_adjoints(graph, scalar);
  if (wrt.id <= scalar.id && adj[static_cast<std::size_t>(wrt.id)].valid()) {
    return adj[static_cast<std::size_t>(wrt.id)];
  }
  return graph.constant(Tensor::zeros(wrt.shape()));
}

}  // namespace advseq::ad
