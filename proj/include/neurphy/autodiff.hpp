#pragma once

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every operation in evaluation order, so node inputs always
// precede the node itself and backward() is a single reverse sweep. Forward
// values are checked after every operation: a NaN or Inf raises
// Error(kNonFinite) naming the op instead of propagating.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "neurphy/tensor.hpp"

namespace neurphy::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kMul,
  kScale,
  kRelu,
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSoftplus,
  kSin,
  kSquare,
  kSum,
  kMean,
  kMeanRows,
  kConcat,
  kSlice,
};

const char* to_string(Op op) noexcept;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var variable(Tensor value);
  /// Leaf treated as a constant (no adjoint is ever accumulated for it).
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a single-element root. Throws kNonScalarRoot otherwise.
  void backward(Var root);
  /// d root / d v after backward(); zeros when v does not influence the root.
  Tensor grad(Var v) const;

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::size_t a = 0;
    std::size_t b = 0;
    double scalar = 0.0;
    std::size_t lo = 0;
    std::size_t hi = 0;
    bool requires_grad = false;
    Tensor value;
  };

  Var push(Node node);
  void accumulate(std::size_t id, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;

  friend Var matmul(Var, Var);
  friend Var add(Var, Var);
  friend Var mul(Var, Var);
  friend Var scale(Var, double);
  friend Var unary(Op, Var);
  friend Var sum(Var);
  friend Var mean(Var);
  friend Var mean_rows(Var);
  friend Var concat(Var, Var);
  friend Var slice(Var, std::size_t, std::size_t);
};

// --- primitives ----------------------------------------------------------------

/// [m,k] x [k,n] -> [m,n].
Var matmul(Var a, Var b);
/// Elementwise sum; `b` may also be a single row broadcast over the rows of `a`.
Var add(Var a, Var b);
/// Elementwise product of equally shaped tensors.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var unary(Op op, Var a);
inline Var relu(Var a) { return unary(Op::kRelu, a); }
inline Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
inline Var tanh(Var a) { return unary(Op::kTanh, a); }
inline Var exp(Var a) { return unary(Op::kExp, a); }
inline Var log(Var a) { return unary(Op::kLog, a); }
inline Var softplus(Var a) { return unary(Op::kSoftplus, a); }
inline Var sin(Var a) { return unary(Op::kSin, a); }
inline Var square(Var a) { return unary(Op::kSquare, a); }
/// Sum / mean over every element, giving a scalar.
Var sum(Var a);
Var mean(Var a);
/// Mean over the leading (batch) axis: [m,n] -> [1,n]. Uses pairwise
/// summation, so a multiset whose duplicates are adjacent averages to the
/// same bits as the set itself.
Var mean_rows(Var a);
/// Concatenation along the last axis; row counts must agree.
Var concat(Var a, Var b);
/// Columns [begin, end) of the last axis.
Var slice(Var a, std::size_t begin, std::size_t end);

// Composites.
inline Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }
Var add_scalar(Var a, double c);

// --- validation oracle ------------------------------------------------------

/// Builds a scalar from the given input on a fresh tape.
using ScalarFn = std::function<Var(Var)>;

/// Central finite differences against backward(). Returns the largest
/// relative error |a-b| / max(|a|, |b|, 1e-8) over the input coordinates.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

/// Value and gradient of f at x.
struct ValueAndGrad {
  double value = 0.0;
  Tensor grad;
};
ValueAndGrad value_and_grad(const ScalarFn& f, const Tensor& x);

}  // namespace neurphy::ad
