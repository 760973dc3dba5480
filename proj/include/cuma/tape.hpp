#pragma once

// Reverse-mode differentiation over dense arrays, recorded on an
// append-only tape. Backward rules are themselves expressed through the
// recording primitives, so with grad_mode enabled a gradient is a tape
// node and a second backward pass differentiates through it
// (reverse-over-reverse, one nesting level used).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cuma/tensor.hpp"

namespace cuma::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kDetached,  // gradient values from a non-recording backward; opaque to further grads
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,       // c * A
  kAddRowVec,   // M(rxn) + v(1xn), row broadcast
  kColSum,      // rxn -> 1xn
  kRowSum,      // rxn -> rx1
  kRepeatRows,  // 1xn -> rxn
  kRepeatCols,  // rx1 -> rxn
  kRelu,
  kTanh,
  kAbs,
  kExp,
  kLog,
  kSum,     // -> 1x1
  kL2Norm,  // -> 1x1
  kSMul,    // (1x1, A) -> A, scalar broadcast multiply
  kGradReverse,
  kReshape,
  kConcatCols,  // row vectors -> one row vector
  kSliceCols,
  kPadCols,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kDetached: return "detached";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kScale: return "scale";
    case Op::kAddRowVec: return "add_rowvec";
    case Op::kColSum: return "colsum";
    case Op::kRowSum: return "rowsum";
    case Op::kRepeatRows: return "repeat_rows";
    case Op::kRepeatCols: return "repeat_cols";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kAbs: return "abs";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kL2Norm: return "l2norm";
    case Op::kSMul: return "smul";
    case Op::kGradReverse: return "grad_reverse";
    case Op::kReshape: return "reshape";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kPadCols: return "pad_cols";
  }
  return "?";
}

struct Node {
  Op op = Op::kConst;
  std::vector<std::int32_t> inputs;
  Tensor value;
  // Op parameters: kScale/kGradReverse use `c`; kRepeatRows/kRepeatCols,
  // kReshape, kSliceCols and kPadCols use `i0`/`i1`.
  double c = 0.0;
  int i0 = 0;
  int i1 = 0;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  explicit Tape(bool grad_mode = false) : grad_mode_(grad_mode) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_mode() const { return grad_mode_; }
  std::size_t size() const { return nodes_.size(); }

  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Tensor& value(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  Var leaf(Tensor t) { return emit(Op::kLeaf, {}, std::move(t)); }
  Var constant(Tensor t) { return emit(Op::kConst, {}, std::move(t)); }

  // Drops every node at or above `watermark`. Callers must not retain Vars
  // into the dropped range.
  void truncate(std::size_t watermark) {
    require(watermark <= nodes_.size(), "tape: truncate beyond size");
    nodes_.resize(watermark);
  }

  Var emit(Op op, std::vector<std::int32_t> inputs, Tensor value, double c = 0.0, int i0 = 0,
           int i1 = 0) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.c = c;
    n.i0 = i0;
    n.i1 = i1;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  Var detached(Tensor t) { return emit(Op::kDetached, {}, std::move(t)); }

  // Re-executes every primitive in id order and compares against the stored
  // values bit for bit.
  bool replay_check() const;

 private:
  std::vector<Node> nodes_;
  bool grad_mode_ = false;
};

// ---------------------------------------------------------------------------
// Forward kernels (pure; shared by emission and replay)
// ---------------------------------------------------------------------------

namespace kernels {

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.v[static_cast<std::size_t>(i) * a.cols];
    double* orow = &out.v[static_cast<std::size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.v[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tensor out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.numel(); ++i) out.v[i] = f(a.v[i], b.v[i]);
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.numel(); ++i) out.v[i] = f(a.v[i]);
  return out;
}

inline Tensor add_rowvec(const Tensor& m, const Tensor& r) {
  Tensor out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(i, j) + r.v[static_cast<std::size_t>(j)];
  return out;
}

inline Tensor colsum(const Tensor& m) {
  Tensor out(1, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out.v[static_cast<std::size_t>(j)] += m.at(i, j);
  return out;
}

inline Tensor rowsum(const Tensor& m) {
  Tensor out(m.rows, 1);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m.at(i, j);
    out.v[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

inline Tensor repeat_rows(const Tensor& r, int n) {
  Tensor out(n, r.cols);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r.cols; ++j) out.at(i, j) = r.v[static_cast<std::size_t>(j)];
  return out;
}

inline Tensor repeat_cols(const Tensor& u, int n) {
  Tensor out(u.rows, n);
  for (int i = 0; i < u.rows; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = u.v[static_cast<std::size_t>(i)];
  return out;
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double e : a.v) s += e;
  return Tensor::scalar(s);
}

inline Tensor l2norm(const Tensor& a) {
  double ss = 0.0;
  for (double e : a.v) ss += e * e;
  return Tensor::scalar(std::sqrt(ss));
}

inline Tensor smul(const Tensor& s, const Tensor& a) {
  const double f = s.v[0];
  return map(a, [f](double x) { return f * x; });
}

inline Tensor concat_cols(const std::vector<const Tensor*>& parts) {
  int total = 0;
  for (const Tensor* p : parts) total += p->cols;
  Tensor out(1, total);
  int off = 0;
  for (const Tensor* p : parts) {
    std::copy(p->v.begin(), p->v.end(), out.v.begin() + off);
    off += p->cols;
  }
  return out;
}

inline Tensor slice_cols(const Tensor& a, int off, int len) {
  Tensor out(1, len);
  std::copy(a.v.begin() + off, a.v.begin() + off + len, out.v.begin());
  return out;
}

inline Tensor pad_cols(const Tensor& a, int total, int off) {
  Tensor out(1, total);
  std::copy(a.v.begin(), a.v.end(), out.v.begin() + off);
  return out;
}

inline Tensor eval(Op op, const std::vector<const Tensor*>& in, double c, int i0, int i1) {
  switch (op) {
    case Op::kMatMul: return matmul(*in[0], *in[1]);
    case Op::kTranspose: return transpose(*in[0]);
    case Op::kAdd: return zip(*in[0], *in[1], [](double a, double b) { return a + b; });
    case Op::kSub: return zip(*in[0], *in[1], [](double a, double b) { return a - b; });
    case Op::kMul: return zip(*in[0], *in[1], [](double a, double b) { return a * b; });
    case Op::kDiv: return zip(*in[0], *in[1], [](double a, double b) { return a / b; });
    case Op::kScale: return map(*in[0], [c](double a) { return c * a; });
    case Op::kAddRowVec: return add_rowvec(*in[0], *in[1]);
    case Op::kColSum: return colsum(*in[0]);
    case Op::kRowSum: return rowsum(*in[0]);
    case Op::kRepeatRows: return repeat_rows(*in[0], i0);
    case Op::kRepeatCols: return repeat_cols(*in[0], i0);
    case Op::kRelu: return map(*in[0], [](double a) { return a > 0.0 ? a : 0.0; });
    case Op::kTanh: return map(*in[0], [](double a) { return std::tanh(a); });
    case Op::kAbs: return map(*in[0], [](double a) { return std::fabs(a); });
    case Op::kExp: return map(*in[0], [](double a) { return std::exp(a); });
    case Op::kLog: return map(*in[0], [](double a) { return std::log(a); });
    case Op::kSum: return sum(*in[0]);
    case Op::kL2Norm: return l2norm(*in[0]);
    case Op::kSMul: return smul(*in[0], *in[1]);
    case Op::kGradReverse: return *in[0];
    case Op::kReshape: return Tensor(i0, i1, in[0]->v);
    case Op::kConcatCols: return concat_cols(in);
    case Op::kSliceCols: return slice_cols(*in[0], i0, i1);
    case Op::kPadCols: return pad_cols(*in[0], i0, i1);
    default: fail("eval: op ", op_name(op), " has no forward kernel");
  }
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Recording primitives
// ---------------------------------------------------------------------------

namespace detail {

inline Tape& same_tape(Var a, Var b) {
  require(a.valid() && b.valid() && a.tape == b.tape, "primitive on mismatched tapes");
  return *a.tape;
}

inline void check_same_shape(const char* prim, const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), prim, ": shape mismatch ", shape_str(a), " vs ", shape_str(b));
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& ta = t.value(a);
  const Tensor& tb = t.value(b);
  require(ta.cols == tb.rows, "matmul: lhs ", shape_str(ta), " incompatible with rhs ",
          shape_str(tb));
  return t.emit(Op::kMatMul, {a.id, b.id}, kernels::matmul(ta, tb));
}

inline Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kTranspose, {a.id}, kernels::transpose(t.value(a)));
}

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape("add", t.value(a), t.value(b));
  return t.emit(Op::kAdd, {a.id, b.id},
                kernels::zip(t.value(a), t.value(b), [](double x, double y) { return x + y; }));
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape("sub", t.value(a), t.value(b));
  return t.emit(Op::kSub, {a.id, b.id},
                kernels::zip(t.value(a), t.value(b), [](double x, double y) { return x - y; }));
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape("mul", t.value(a), t.value(b));
  return t.emit(Op::kMul, {a.id, b.id},
                kernels::zip(t.value(a), t.value(b), [](double x, double y) { return x * y; }));
}

inline Var div(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape("div", t.value(a), t.value(b));
  return t.emit(Op::kDiv, {a.id, b.id},
                kernels::zip(t.value(a), t.value(b), [](double x, double y) { return x / y; }));
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  return t.emit(Op::kScale, {a.id}, kernels::map(t.value(a), [c](double x) { return c * x; }), c);
}

inline Var add_rowvec(Var m, Var r) {
  Tape& t = detail::same_tape(m, r);
  const Tensor& tm = t.value(m);
  const Tensor& tr = t.value(r);
  require(tr.rows == 1 && tr.cols == tm.cols, "add_rowvec: matrix ", shape_str(tm),
          " incompatible with row ", shape_str(tr));
  return t.emit(Op::kAddRowVec, {m.id, r.id}, kernels::add_rowvec(tm, tr));
}

inline Var colsum(Var m) {
  Tape& t = *m.tape;
  return t.emit(Op::kColSum, {m.id}, kernels::colsum(t.value(m)));
}

inline Var rowsum(Var m) {
  Tape& t = *m.tape;
  return t.emit(Op::kRowSum, {m.id}, kernels::rowsum(t.value(m)));
}

inline Var repeat_rows(Var r, int n) {
  Tape& t = *r.tape;
  require(t.value(r).rows == 1, "repeat_rows: input must be a row vector, got ",
          shape_str(t.value(r)));
  return t.emit(Op::kRepeatRows, {r.id}, kernels::repeat_rows(t.value(r), n), 0.0, n);
}

inline Var repeat_cols(Var u, int n) {
  Tape& t = *u.tape;
  require(t.value(u).cols == 1, "repeat_cols: input must be a column vector, got ",
          shape_str(t.value(u)));
  return t.emit(Op::kRepeatCols, {u.id}, kernels::repeat_cols(t.value(u), n), 0.0, n);
}

inline Var relu(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kRelu, {a.id},
                kernels::map(t.value(a), [](double x) { return x > 0.0 ? x : 0.0; }));
}

inline Var tanh(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kTanh, {a.id}, kernels::map(t.value(a), [](double x) { return std::tanh(x); }));
}

inline Var abs(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kAbs, {a.id}, kernels::map(t.value(a), [](double x) { return std::fabs(x); }));
}

inline Var exp(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kExp, {a.id}, kernels::map(t.value(a), [](double x) { return std::exp(x); }));
}

inline Var log(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kLog, {a.id}, kernels::map(t.value(a), [](double x) { return std::log(x); }));
}

inline Var sum(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kSum, {a.id}, kernels::sum(t.value(a)));
}

inline Var l2norm(Var a) {
  Tape& t = *a.tape;
  return t.emit(Op::kL2Norm, {a.id}, kernels::l2norm(t.value(a)));
}

inline Var smul(Var s, Var a) {
  Tape& t = detail::same_tape(s, a);
  require(t.value(s).numel() == 1, "smul: scalar operand must be 1x1, got ",
          shape_str(t.value(s)));
  return t.emit(Op::kSMul, {s.id, a.id}, kernels::smul(t.value(s), t.value(a)));
}

// Identity forward; backward multiplies the adjoint by -alpha.
inline Var grad_reverse(Var a, double alpha) {
  Tape& t = *a.tape;
  return t.emit(Op::kGradReverse, {a.id}, t.value(a), alpha);
}

inline Var reshape(Var a, int rows, int cols) {
  Tape& t = *a.tape;
  const Tensor& ta = t.value(a);
  require(static_cast<std::size_t>(rows) * cols == ta.numel(), "reshape: ", shape_str(ta),
          " cannot become ", rows, "x", cols);
  return t.emit(Op::kReshape, {a.id}, Tensor(rows, cols, ta.v), 0.0, rows, cols);
}

inline Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  std::vector<const Tensor*> vals;
  std::vector<std::int32_t> ids;
  vals.reserve(parts.size());
  ids.reserve(parts.size());
  for (Var p : parts) {
    require(p.tape == &t, "concat_cols: mismatched tapes");
    require(t.value(p).rows == 1, "concat_cols: inputs must be row vectors, got ",
            shape_str(t.value(p)));
    vals.push_back(&t.value(p));
    ids.push_back(p.id);
  }
  return t.emit(Op::kConcatCols, std::move(ids), kernels::concat_cols(vals));
}

inline Var slice_cols(Var a, int off, int len) {
  Tape& t = *a.tape;
  const Tensor& ta = t.value(a);
  require(ta.rows == 1 && off >= 0 && len > 0 && off + len <= ta.cols,
          "slice_cols: invalid slice [", off, ",", off + len, ") of ", shape_str(ta));
  return t.emit(Op::kSliceCols, {a.id}, kernels::slice_cols(ta, off, len), 0.0, off, len);
}

inline Var pad_cols(Var a, int total, int off) {
  Tape& t = *a.tape;
  const Tensor& ta = t.value(a);
  require(ta.rows == 1 && off >= 0 && off + ta.cols <= total, "pad_cols: cannot place ",
          shape_str(ta), " at ", off, " in width ", total);
  return t.emit(Op::kPadCols, {a.id}, kernels::pad_cols(ta, total, off), 0.0, total, off);
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

namespace detail {

// Emits the adjoint contribution flowing into each input of `node`.
// Contributions are built from recording primitives so they are themselves
// differentiable when the tape stays alive. Node metadata is copied up
// front: emitting contributions reallocates the node storage.
inline void backward_rule(Tape& t, std::int32_t id, Var g,
                          std::vector<std::pair<std::int32_t, Var>>& out) {
  const Op op = t.node(id).op;
  const std::vector<std::int32_t> inputs = t.node(id).inputs;
  const double c = t.node(id).c;
  const int i0 = t.node(id).i0;
  const int i1 = t.node(id).i1;
  const int out_rows = t.node(id).value.rows;
  const int out_cols = t.node(id).value.cols;
  const double out_scalar = t.node(id).value.numel() == 1 ? t.node(id).value.v[0] : 0.0;

  const Var self{&t, id};
  auto in = [&](int k) { return Var{&t, inputs[static_cast<std::size_t>(k)]}; };
  auto push = [&](int k, Var contrib) {
    const std::int32_t dst = inputs[static_cast<std::size_t>(k)];
    if (t.node(dst).op == Op::kConst) return;  // constants absorb no gradient
    out.emplace_back(dst, contrib);
  };

  switch (op) {
    case Op::kLeaf:
    case Op::kConst:
      return;
    case Op::kDetached:
      fail("grad: second-order request on values produced without gradient-mode; ",
           "rebuild the tape with grad_mode enabled");
    case Op::kMatMul:
      push(0, matmul(g, transpose(in(1))));
      push(1, matmul(transpose(in(0)), g));
      return;
    case Op::kTranspose:
      push(0, transpose(g));
      return;
    case Op::kAdd:
      push(0, g);
      push(1, g);
      return;
    case Op::kSub:
      push(0, g);
      push(1, scale(g, -1.0));
      return;
    case Op::kMul:
      push(0, mul(g, in(1)));
      push(1, mul(g, in(0)));
      return;
    case Op::kDiv:
      push(0, div(g, in(1)));
      push(1, scale(mul(g, div(self, in(1))), -1.0));
      return;
    case Op::kScale:
      push(0, scale(g, c));
      return;
    case Op::kAddRowVec:
      push(0, g);
      push(1, colsum(g));
      return;
    case Op::kColSum:
      push(0, repeat_rows(g, t.value(in(0)).rows));
      return;
    case Op::kRowSum:
      push(0, repeat_cols(g, t.value(in(0)).cols));
      return;
    case Op::kRepeatRows:
      push(0, colsum(g));
      return;
    case Op::kRepeatCols:
      push(0, rowsum(g));
      return;
    case Op::kRelu: {
      const Tensor& x = t.value(in(0));
      Var mask = t.constant(kernels::map(x, [](double a) { return a > 0.0 ? 1.0 : 0.0; }));
      push(0, mul(g, mask));
      return;
    }
    case Op::kTanh: {
      Var ones = t.constant(Tensor::filled(out_rows, out_cols, 1.0));
      push(0, mul(g, sub(ones, mul(self, self))));
      return;
    }
    case Op::kAbs: {
      // sign(0) contributes 0: subgradient convention.
      const Tensor& x = t.value(in(0));
      Var sign = t.constant(
          kernels::map(x, [](double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }));
      push(0, mul(g, sign));
      return;
    }
    case Op::kExp:
      push(0, mul(g, self));
      return;
    case Op::kLog:
      push(0, div(g, in(0)));
      return;
    case Op::kSum: {
      const Tensor& x = t.value(in(0));
      Var ones = t.constant(Tensor::filled(x.rows, x.cols, 1.0));
      push(0, smul(g, ones));
      return;
    }
    case Op::kL2Norm: {
      if (out_scalar == 0.0) {
        // Gradient of the norm at the origin is taken as zero.
        const Tensor& x = t.value(in(0));
        push(0, t.constant(Tensor(x.rows, x.cols)));
      } else {
        push(0, smul(div(g, self), in(0)));
      }
      return;
    }
    case Op::kSMul:
      push(0, sum(mul(g, in(1))));
      push(1, smul(in(0), g));
      return;
    case Op::kGradReverse:
      push(0, scale(g, -c));
      return;
    case Op::kReshape: {
      const Tensor& x = t.value(in(0));
      push(0, reshape(g, x.rows, x.cols));
      return;
    }
    case Op::kConcatCols: {
      int off = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const int len = t.value(inputs[k]).cols;
        push(static_cast<int>(k), slice_cols(g, off, len));
        off += len;
      }
      return;
    }
    case Op::kSliceCols:
      push(0, pad_cols(g, t.value(in(0)).cols, i0));
      return;
    case Op::kPadCols:
      push(0, slice_cols(g, i1, t.value(in(0)).cols));
      return;
  }
}

}  // namespace detail

struct GradOptions {
  bool create_graph = false;  // keep backward nodes differentiable
  double seed = 1.0;          // initial adjoint of the output
};

// Reverse pass from a scalar output. Returns one gradient per `wrt` entry,
// shaped like it; entries that do not participate in the graph get zeros.
// With create_graph the results are live tape nodes; otherwise the transient
// backward nodes are dropped and detached value nodes are returned.
inline std::vector<Var> grad(Var output, std::span<const Var> wrt, GradOptions opt = {}) {
  Tape& t = *output.tape;
  require(t.value(output).numel() == 1, "grad: output must be scalar, got ",
          shape_str(t.value(output)));
  require(!opt.create_graph || t.grad_mode(),
          "grad: create_graph requires a tape built with gradient-mode enabled");
  for (Var w : wrt)
    require(w.tape == &t, "grad: wrt variable lives on a different tape");

  const std::size_t watermark = t.size();
  const std::int32_t top = output.id;

  // Reachable ancestors of the output.
  std::vector<char> reach(static_cast<std::size_t>(top) + 1, 0);
  {
    std::vector<std::int32_t> stack{top};
    reach[static_cast<std::size_t>(top)] = 1;
    while (!stack.empty()) {
      const std::int32_t id = stack.back();
      stack.pop_back();
      for (std::int32_t in : t.node(id).inputs) {
        if (!reach[static_cast<std::size_t>(in)]) {
          reach[static_cast<std::size_t>(in)] = 1;
          stack.push_back(in);
        }
      }
    }
  }

  std::vector<std::int32_t> adj(static_cast<std::size_t>(top) + 1, -1);
  adj[static_cast<std::size_t>(top)] = t.constant(Tensor::scalar(opt.seed)).id;

  std::vector<std::pair<std::int32_t, Var>> contribs;
  for (std::int32_t id = top; id >= 0; --id) {
    if (!reach[static_cast<std::size_t>(id)] || adj[static_cast<std::size_t>(id)] < 0) continue;
    const Var g{&t, adj[static_cast<std::size_t>(id)]};
    contribs.clear();
    detail::backward_rule(t, id, g, contribs);
    for (auto& [dst, c] : contribs) {
      std::int32_t& slot = adj[static_cast<std::size_t>(dst)];
      slot = slot < 0 ? c.id : add(Var{&t, slot}, c).id;
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  if (opt.create_graph) {
    for (Var w : wrt) {
      const std::int32_t a = w.id <= top ? adj[static_cast<std::size_t>(w.id)] : -1;
      if (a >= 0) {
        result.push_back(Var{&t, a});
      } else {
        const Tensor& shape = t.value(w);
        result.push_back(t.constant(Tensor(shape.rows, shape.cols)));
      }
    }
    return result;
  }

  // Materialize values, drop the transient backward nodes, return detached.
  std::vector<Tensor> values;
  values.reserve(wrt.size());
  for (Var w : wrt) {
    const std::int32_t a = w.id <= top ? adj[static_cast<std::size_t>(w.id)] : -1;
    if (a >= 0) {
      values.push_back(t.value(a));
    } else {
      const Tensor& shape = t.value(w);
      values.emplace_back(shape.rows, shape.cols);
    }
  }
  t.truncate(watermark);
  for (Tensor& v : values) result.push_back(t.detached(std::move(v)));
  return result;
}

inline std::vector<Var> grad(Var output, std::initializer_list<Var> wrt, GradOptions opt = {}) {
  return grad(output, std::span<const Var>(wrt.begin(), wrt.size()), opt);
}

inline bool Tape::replay_check() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::kLeaf || n.op == Op::kConst || n.op == Op::kDetached) continue;
    std::vector<const Tensor*> in;
    in.reserve(n.inputs.size());
    for (std::int32_t id : n.inputs) in.push_back(&nodes_[static_cast<std::size_t>(id)].value);
    const Tensor redo = kernels::eval(n.op, in, n.c, n.i0, n.i1);
    if (redo.rows != n.value.rows || redo.cols != n.value.cols) return false;
    for (std::size_t i = 0; i < redo.numel(); ++i)
      if (redo.v[i] != n.value.v[i] && !(std::isnan(redo.v[i]) && std::isnan(n.value.v[i])))
        return false;
  }
  return true;
}

}  // namespace cuma::ad
