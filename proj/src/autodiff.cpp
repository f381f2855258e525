#include "neurphy/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "neurphy/error.hpp"

namespace neurphy::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + " got shapes " + shape_string(a) + " and " + shape_string(b));
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return Shape{rows, cols}; }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Pairwise reduction over rows: adjacent rows are combined level by level, an
// odd trailing row is carried unchanged to the next level.
std::vector<double> pairwise_row_sum(const Tensor& x) {
  const std::size_t cols = x.cols();
  std::vector<double> level(x.data().begin(), x.data().end());
  std::size_t n = x.rows();
  while (n > 1) {
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) {
      for (std::size_t c = 0; c < cols; ++c) level[i * cols + c] = level[2 * i * cols + c] + level[(2 * i + 1) * cols + c];
    }
    if (n % 2 == 1) {
      std::copy_n(level.begin() + static_cast<std::ptrdiff_t>((n - 1) * cols), cols,
                  level.begin() + static_cast<std::ptrdiff_t>(half * cols));
    }
    n = half + n % 2;
  }
  level.resize(cols);
  return level;
}

}  // namespace

const char* to_string(Op op) noexcept {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSoftplus: return "softplus";
    case Op::kSin: return "sin";
    case Op::kSquare: return "square";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kMeanRows: return "mean_rows";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
  }
  return "?";
}

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::variable(Tensor value) {
  Node n;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw Error(ErrorCode::kNonFinite, std::string("non-finite value produced by ") + to_string(node.op) +
                                           " with shape " + shape_string(node.value.shape()));
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Tensor& buf = grads_[id];
  if (buf.empty() && nodes_[id].value.numel() > 0) {
    buf = g;
    return;
  }
  auto dst = buf.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error(ErrorCode::kShapeMismatch, "root belongs to another tape");
  const Tensor& rv = nodes_[root.id].value;
  if (rv.numel() != 1) throw Error(ErrorCode::kNonScalarRoot, "root has shape " + shape_string(rv.shape()));

  grads_.assign(nodes_.size(), Tensor{});
  grads_[root.id] = Tensor(rv.shape(), 1.0);

  auto zeros_like = [this](std::size_t id) -> Tensor& {
    Tensor& buf = grads_[id];
    if (buf.empty()) buf = Tensor(nodes_[id].value.shape(), 0.0);
    return buf;
  };

  for (std::size_t id = root.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.op == Op::kLeaf || grads_[id].empty()) continue;
    const Tensor& g = grads_[id];
    const Tensor& y = n.value;
    const Node& na = nodes_[n.a];

    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        const Tensor& A = na.value;
        const Tensor& B = nodes_[n.b].value;
        const std::size_t m = A.rows(), k = A.cols(), cols = B.cols();
        if (na.requires_grad) {
          // dA = dC * B^T, accumulated row by row against B^T.
          Tensor bt(matrix_shape(cols, k));
          for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < cols; ++c) bt(c, r) = B(r, c);
          }
          Tensor& ga = zeros_like(n.a);
          for (std::size_t i = 0; i < m; ++i) {
            double* out = &ga(i, 0);
            for (std::size_t j = 0; j < cols; ++j) {
              const double gij = g(i, j);
              const double* brow = &bt(j, 0);
              for (std::size_t c = 0; c < k; ++c) out[c] += gij * brow[c];
            }
          }
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = zeros_like(n.b);
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g.data().data() + i * cols;
            for (std::size_t r = 0; r < k; ++r) {
              const double air = A(i, r);
              double* out = &gb(r, 0);
              for (std::size_t c = 0; c < cols; ++c) out[c] += air * grow[c];
            }
          }
        }
        break;
      }
      case Op::kAdd: {
        if (na.requires_grad) accumulate(n.a, g);
        const Node& nb = nodes_[n.b];
        if (nb.requires_grad) {
          if (nb.value.numel() == g.numel()) {
            accumulate(n.b, g);
          } else {
            Tensor& gb = zeros_like(n.b);
            const std::size_t cols = g.cols();
            for (std::size_t r = 0; r < g.rows(); ++r) {
              for (std::size_t c = 0; c < cols; ++c) gb[c] += g(r, c);
            }
          }
        }
        break;
      }
      case Op::kMul: {
        const Tensor& A = na.value;
        const Tensor& B = nodes_[n.b].value;
        if (na.requires_grad) {
          Tensor& ga = zeros_like(n.a);
          for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * B[i];
        }
        if (nodes_[n.b].requires_grad) {
          Tensor& gb = zeros_like(n.b);
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * A[i];
        }
        break;
      }
      case Op::kScale: {
        Tensor& ga = zeros_like(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.scalar;
        break;
      }
      case Op::kRelu:
      case Op::kSigmoid:
      case Op::kTanh:
      case Op::kExp:
      case Op::kLog:
      case Op::kSoftplus:
      case Op::kSin:
      case Op::kSquare: {
        const Tensor& x = na.value;
        Tensor& ga = zeros_like(n.a);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          double d = 0.0;
          switch (n.op) {
            case Op::kRelu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
            case Op::kSigmoid: d = y[i] * (1.0 - y[i]); break;
            case Op::kTanh: d = 1.0 - y[i] * y[i]; break;
            case Op::kExp: d = y[i]; break;
            case Op::kLog: d = 1.0 / x[i]; break;
            case Op::kSoftplus: d = stable_sigmoid(x[i]); break;
            case Op::kSin: d = std::cos(x[i]); break;
            case Op::kSquare: d = 2.0 * x[i]; break;
            default: break;
          }
          ga[i] += g[i] * d;
        }
        break;
      }
      case Op::kSum: {
        Tensor& ga = zeros_like(n.a);
        for (auto& v : ga.data()) v += g[0];
        break;
      }
      case Op::kMean: {
        Tensor& ga = zeros_like(n.a);
        const double share = g[0] / static_cast<double>(ga.numel());
        for (auto& v : ga.data()) v += share;
        break;
      }
      case Op::kMeanRows: {
        Tensor& ga = zeros_like(n.a);
        const auto rows = static_cast<double>(ga.rows());
        for (std::size_t r = 0; r < ga.rows(); ++r) {
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c] / rows;
        }
        break;
      }
      case Op::kConcat: {
        const std::size_t ca = na.value.cols();
        const Node& nb = nodes_[n.b];
        const std::size_t cb = nb.value.cols();
        if (na.requires_grad) {
          Tensor& ga = zeros_like(n.a);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < ca; ++c) ga(r, c) += g(r, c);
          }
        }
        if (nb.requires_grad) {
          Tensor& gb = zeros_like(n.b);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < cb; ++c) gb(r, c) += g(r, ca + c);
          }
        }
        break;
      }
      case Op::kSlice: {
        Tensor& ga = zeros_like(n.a);
        const std::size_t width = n.hi - n.lo;
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < width; ++c) ga(r, n.lo + c) += g(r, c);
        }
        break;
      }
    }
  }
}

Tensor Tape::grad(Var v) const {
  if (v.id < grads_.size() && !grads_[v.id].empty()) return grads_[v.id];
  return Tensor(nodes_[v.id].value.shape(), 0.0);
}

namespace {

void same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + " operands live on different tapes");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() > 2 || B.rank() != 2 || A.cols() != B.rows()) shape_error("matmul", A.shape(), B.shape());
  const std::size_t m = A.rows(), k = A.cols(), cols = B.cols();
  Tensor C(matrix_shape(m, cols), 0.0);
  // i-k-j order: each output row accumulates over k in a fixed order, so a
  // row's result does not depend on the other rows of the batch.
  for (std::size_t i = 0; i < m; ++i) {
    double* out = &C(i, 0);
    for (std::size_t r = 0; r < k; ++r) {
      const double air = A(i, r);
      const double* brow = B.data().data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) out[c] += air * brow[c];
    }
  }
  Tape::Node n;
  n.op = Op::kMatmul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad || a.tape->nodes_[b.id].requires_grad;
  n.value = std::move(C);
  return a.tape->push(std::move(n));
}

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out = A;
  if (A.shape() == B.shape()) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  } else if (B.numel() == A.cols() && B.rows() == 1 && A.rank() >= 1) {
    const std::size_t cols = A.cols();
    for (std::size_t r = 0; r < A.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) out(r, c) += B[c];
    }
  } else {
    shape_error("add", A.shape(), B.shape());
  }
  Tape::Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad || a.tape->nodes_[b.id].requires_grad;
  n.value = std::move(out);
  return a.tape->push(std::move(n));
}

Var mul(Var a, Var b) {
  same_tape(a, b, "mul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) shape_error("mul", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
  Tape::Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad || a.tape->nodes_[b.id].requires_grad;
  n.value = std::move(out);
  return a.tape->push(std::move(n));
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  Tape::Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.scalar = factor;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad;
  n.value = std::move(out);
  return a.tape->push(std::move(n));
}

Var unary(Op op, Var a) {
  Tensor out = a.value();
  for (auto& v : out.data()) {
    switch (op) {
      case Op::kRelu: v = v > 0.0 ? v : 0.0; break;
      case Op::kSigmoid: v = stable_sigmoid(v); break;
      case Op::kTanh: v = std::tanh(v); break;
      case Op::kExp: v = std::exp(v); break;
      case Op::kLog: v = std::log(v); break;
      case Op::kSoftplus: v = stable_softplus(v); break;
      case Op::kSin: v = std::sin(v); break;
      case Op::kSquare: v = v * v; break;
      default:
        throw Error(ErrorCode::kShapeMismatch, std::string("not a unary op: ") + to_string(op));
    }
  }
  Tape::Node n;
  n.op = op;
  n.a = a.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad;
  n.value = std::move(out);
  return a.tape->push(std::move(n));
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  Tape::Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad;
  n.value = Tensor::scalar(s);
  return a.tape->push(std::move(n));
}

Var mean(Var a) {
  const Tensor& x = a.value();
  if (x.numel() == 0) throw Error(ErrorCode::kShapeMismatch, "mean of an empty tensor");
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tape::Node n;
  n.op = Op::kMean;
  n.a = a.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad;
  n.value = Tensor::scalar(s / static_cast<double>(x.numel()));
  return a.tape->push(std::move(n));
}

Var mean_rows(Var a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw Error(ErrorCode::kShapeMismatch, "mean_rows of an empty tensor");
  std::vector<double> s = pairwise_row_sum(x);
  const auto rows = static_cast<double>(x.rows());
  for (auto& v : s) v /= rows;
  Tape::Node n;
  n.op = Op::kMeanRows;
  n.a = a.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad;
  n.value = Tensor(matrix_shape(1, x.cols()), std::move(s));
  return a.tape->push(std::move(n));
}

Var concat(Var a, Var b) {
  same_tape(a, b, "concat");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rows() != B.rows()) shape_error("concat", A.shape(), B.shape());
  const std::size_t ca = A.cols(), cb = B.cols(), rows = A.rows();
  Tensor out(matrix_shape(rows, ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) out(r, c) = A(r, c);
    for (std::size_t c = 0; c < cb; ++c) out(r, ca + c) = B(r, c);
  }
  Tape::Node n;
  n.op = Op::kConcat;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad || a.tape->nodes_[b.id].requires_grad;
  n.value = std::move(out);
  return a.tape->push(std::move(n));
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = a.value();
  if (begin >= end || end > A.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                               ") of shape " + shape_string(A.shape()));
  }
  const std::size_t rows = A.rows(), width = end - begin;
  Tensor out(matrix_shape(rows, width));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = A(r, begin + c);
  }
  Tape::Node n;
  n.op = Op::kSlice;
  n.a = a.id;
  n.lo = begin;
  n.hi = end;
  n.requires_grad = a.tape->nodes_[a.id].requires_grad;
  n.value = std::move(out);
  return a.tape->push(std::move(n));
}

Var add_scalar(Var a, double c) { return add(a, a.tape->constant(Tensor(a.value().shape(), c))); }

ValueAndGrad value_and_grad(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var xv = tape.variable(x);
  Var root = f(xv);
  tape.backward(root);
  return {tape.value(root).item(), tape.grad(xv)};
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw Error(ErrorCode::kConfig, "grad_check eps must lie in [1e-7, 1e-3]");
  const ValueAndGrad analytic = value_and_grad(f, x);
  auto eval = [&f](const Tensor& at) {
    Tape tape;
    return tape.value(f(tape.variable(at))).item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.grad[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace neurphy::ad
