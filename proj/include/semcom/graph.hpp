#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  mul,
  scalar_mul,
  div_eps,
  square,
  sqrt,
  sum,
  mean,
  transpose,
  concat_cols,
  slice_block,
  relu,
  log_sum_exp,
  log_softmax,
  column_norm,
};

inline std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "elementwise-mul";
    case OpKind::scalar_mul: return "scalar-mul";
    case OpKind::div_eps: return "div-with-epsilon";
    case OpKind::square: return "square";
    case OpKind::sqrt: return "sqrt";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::transpose: return "transpose";
    case OpKind::concat_cols: return "concat-cols";
    case OpKind::slice_block: return "slice-block";
    case OpKind::relu: return "relu";
    case OpKind::log_sum_exp: return "log-sum-exp";
    case OpKind::log_softmax: return "softmax-log-prob";
    case OpKind::column_norm: return "batch-column-norm";
  }
  return "unknown";
}

/// Denominator guard used by div_eps: max(|d|, eps) carrying the sign of d.
inline constexpr double kDivEpsilon = 1e-12;
inline double guard_denominator(double d) {
  return d >= 0.0 ? std::max(d, kDivEpsilon) : -std::max(-d, kDivEpsilon);
}

class Graph;

/// Handle to a node on a Graph. Cheap to copy; only valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Define-by-run tape. Nodes are appended in execution order, so the vector
/// index is a topological order and backward is a reverse sweep.
class Graph {
 public:
  /// Receives the node's value, its gradient and one slot per input; a slot is null when
  /// that input does not need a gradient.
  using Backward = std::function<void(const Matrix& out, const Matrix& grad_out,
                                      std::span<Matrix* const> input_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix m) { return push(OpKind::leaf, std::move(m), {}, {}, nullptr); }

  /// Adds a leaf bound to `t`. When t.requires_grad, backward accumulates into t.grad.
  Var track(Tensor& t) {
    return push(OpKind::leaf, t.value, {}, {}, t.requires_grad ? &t : nullptr);
  }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var record(OpKind kind, Matrix value, std::vector<std::size_t> inputs, Backward backward) {
    if (!value.all_finite())
      throw numeric_error(std::string(op_name(kind)) + ": non-finite output");
    for (auto in : inputs)
      if (in >= nodes_.size()) throw contract_error("Graph::record: input precedes no node");
    return push(kind, std::move(value), std::move(inputs), std::move(backward), nullptr);
  }

  /// Reverse sweep from a scalar loss. Gradients accumulate into tracked tensors;
  /// every tracked tensor on the graph ends up with a grad buffer, zero when
  /// the loss does not depend on it.
  void backward(Var loss) {
    if (loss.graph != this) throw contract_error("backward: loss belongs to another graph");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
      throw contract_error("backward: loss must be scalar, got " + lv.shape_string());

    std::vector<Matrix> grads(loss.id + 1);
    grads[loss.id] = Matrix(1, 1, 1.0);
    std::vector<Matrix*> slots;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.needs_grad || grads[i].empty()) continue;
      if (node.tracked) {
        accumulate_into(*node.tracked, grads[i]);
        continue;
      }
      if (!node.backward) continue;
      slots.assign(node.inputs.size(), nullptr);
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        std::size_t in = node.inputs[k];
        if (!nodes_[in].needs_grad) continue;
        if (grads[in].empty()) grads[in] = Matrix(nodes_[in].value.rows(), nodes_[in].value.cols());
        slots[k] = &grads[in];
      }
      node.backward(node.value, grads[i], slots);
      grads[i] = Matrix();
    }
    for (auto& node : nodes_)
      if (node.tracked && !node.tracked->grad)
        node.tracked->grad = Matrix(node.value.rows(), node.value.cols());
  }

 private:
  struct Node {
    OpKind kind;
    Matrix value;
    std::vector<std::size_t> inputs;
    Backward backward;
    Tensor* tracked;
    bool needs_grad;
  };

  Var push(OpKind kind, Matrix value, std::vector<std::size_t> inputs, Backward backward,
           Tensor* tracked) {
    bool needs = tracked != nullptr;
    for (auto in : inputs) needs = needs || nodes_[in].needs_grad;
    nodes_.push_back(Node{kind, std::move(value), std::move(inputs), std::move(backward), tracked, needs});
    return Var{this, nodes_.size() - 1};
  }

  static void accumulate_into(Tensor& t, const Matrix& g) {
    if (!t.grad) {
      t.grad = g;
      return;
    }
    auto dst = t.grad->values();
    auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return graph->value(*this); }

namespace detail {

inline Graph& graph_of(Var a) {
  if (!a.graph) throw contract_error("operation on a detached Var");
  return *a.graph;
}

inline Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw contract_error("operands live on different graphs");
  return graph_of(a);
}

// b must equal a's shape or be a row vector, column vector or scalar of it.
inline void check_broadcast(std::string_view op, const Matrix& a, const Matrix& b) {
  bool rows_ok = b.rows() == a.rows() || b.rows() == 1;
  bool cols_ok = b.cols() == a.cols() || b.cols() == 1;
  if (!rows_ok || !cols_ok)
    throw dimension_error(std::string(op) + ": cannot broadcast " + b.shape_string() + " onto " +
                          a.shape_string());
}

inline std::size_t bidx(const Matrix& b, std::size_t r, std::size_t c) {
  return (b.rows() == 1 ? 0 : r) * b.cols() + (b.cols() == 1 ? 0 : c);
}

// out += a * b, shapes (n x k)(k x m)
inline void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

// out += a * b^T, shapes (n x k)(m x k)
inline void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      out(i, j) += s;
    }
  }
}

// out += a^T * b, shapes (k x n)(k x m)
inline void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.row(p).data();
    const double* brow = b.row(p).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.row(i).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations. Each computes its value eagerly and records a backward closure.

inline Var matmul(Var a, Var b) {
  Graph& g = detail::graph_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw dimension_error("matmul: " + av.shape_string() + " x " + bv.shape_string());
  Matrix out(av.rows(), bv.cols());
  detail::gemm_nn(av, bv, out);
  return g.record(OpKind::matmul, std::move(out), {a.id, b.id},
                  [&g, a, b](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    if (gi[0]) detail::gemm_nt(go, g.value(b), *gi[0]);
                    if (gi[1]) detail::gemm_tn(g.value(a), go, *gi[1]);
                  });
}

namespace detail {

template <class F, class DA, class DB>
Var binary_broadcast(OpKind kind, Var a, Var b, F f, DA da, DB db) {
  Graph& g = graph_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  check_broadcast(op_name(kind), av, bv);
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = f(av(r, c), bv[bidx(bv, r, c)]);
  return g.record(kind, std::move(out), {a.id, b.id},
                  [&g, a, b, da, db](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    const Matrix& av = g.value(a);
                    const Matrix& bv = g.value(b);
                    for (std::size_t r = 0; r < av.rows(); ++r)
                      for (std::size_t c = 0; c < av.cols(); ++c) {
                        const double x = av(r, c), y = bv[bidx(bv, r, c)], gv = go(r, c);
                        if (gi[0]) (*gi[0])(r, c) += gv * da(x, y);
                        if (gi[1]) (*gi[1])[bidx(bv, r, c)] += gv * db(x, y);
                      }
                  });
}

}  // namespace detail

/// a + b, where b may be a row vector, column vector or scalar broadcast over a.
inline Var add(Var a, Var b) {
  return detail::binary_broadcast(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary_broadcast(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary_broadcast(
      OpKind::mul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

/// a / guard(b) with guard(d) = max(|d|, 1e-12)·sign(d).
inline Var div_eps(Var a, Var b) {
  return detail::binary_broadcast(
      OpKind::div_eps, a, b, [](double x, double y) { return x / guard_denominator(y); },
      [](double, double y) { return 1.0 / guard_denominator(y); },
      [](double x, double y) {
        const double d = guard_denominator(y);
        return std::abs(y) > kDivEpsilon ? -x / (d * d) : 0.0;
      });
}

inline Var scale(Var a, double s) {
  Graph& g = detail::graph_of(a);
  Matrix out = a.value();
  for (double& v : out.values()) v *= s;
  return g.record(OpKind::scalar_mul, std::move(out), {a.id},
                  [s](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    auto dst = gi[0]->values();
                    auto src = go.values();
                    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
                  });
}

inline Var square(Var a) {
  Graph& g = detail::graph_of(a);
  Matrix out = a.value();
  for (double& v : out.values()) v *= v;
  return g.record(OpKind::square, std::move(out), {a.id},
                  [&g, a](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    const Matrix& x = g.value(a);
                    for (std::size_t i = 0; i < x.size(); ++i) (*gi[0])[i] += 2.0 * x[i] * go[i];
                  });
}

/// Elementwise square root; the derivative at 0 is taken as 0.
inline Var sqrt(Var a) {
  Graph& g = detail::graph_of(a);
  Matrix out = a.value();
  for (double& v : out.values()) v = std::sqrt(v);
  return g.record(OpKind::sqrt, std::move(out), {a.id},
                  [](const Matrix& y, const Matrix& go, std::span<Matrix* const> gi) {
                    for (std::size_t i = 0; i < y.size(); ++i)
                      if (y[i] > 0.0) (*gi[0])[i] += 0.5 * go[i] / y[i];
                  });
}

inline Var sum(Var a) {
  Graph& g = detail::graph_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record(OpKind::sum, Matrix(1, 1, s), {a.id},
                  [](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    for (double& v : gi[0]->values()) v += go[0];
                  });
}

inline Var mean(Var a) {
  Graph& g = detail::graph_of(a);
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw dimension_error("mean: empty input");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record(OpKind::mean, Matrix(1, 1, s / n), {a.id},
                  [n](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    for (double& v : gi[0]->values()) v += go[0] / n;
                  });
}

inline Var transpose(Var a) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  Matrix out(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
  return g.record(OpKind::transpose, std::move(out), {a.id},
                  [](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    for (std::size_t r = 0; r < go.rows(); ++r)
                      for (std::size_t c = 0; c < go.cols(); ++c) (*gi[0])(c, r) += go(r, c);
                  });
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw dimension_error("concat-cols: no inputs");
  Graph& g = detail::graph_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (Var p : parts) {
    detail::graph_of(parts[0], p);
    if (p.rows() != rows)
      throw dimension_error("concat-cols: row mismatch " + std::to_string(p.rows()) + " vs " +
                            std::to_string(rows));
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Matrix& x = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, offsets[k] + c) = x(r, c);
  }
  return g.record(OpKind::concat_cols, std::move(out), ids,
                  [offsets](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    for (std::size_t k = 0; k < gi.size(); ++k) {
                      if (!gi[k]) continue;
                      Matrix& dst = *gi[k];
                      for (std::size_t r = 0; r < dst.rows(); ++r)
                        for (std::size_t c = 0; c < dst.cols(); ++c) dst(r, c) += go(r, offsets[k] + c);
                    }
                  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// Rows [r0, r1) and columns [c0, c1) of a. The gradient scatters back into a
/// zero buffer of the parent's shape.
inline Var slice_block(Var a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  if (r0 > r1 || r1 > x.rows() || c0 > c1 || c1 > x.cols())
    throw dimension_error("slice-block: range out of bounds for " + x.shape_string());
  Matrix out(r1 - r0, c1 - c0);
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) out(r - r0, c - c0) = x(r, c);
  return g.record(OpKind::slice_block, std::move(out), {a.id},
                  [r0, c0](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    for (std::size_t r = 0; r < go.rows(); ++r)
                      for (std::size_t c = 0; c < go.cols(); ++c) (*gi[0])(r + r0, c + c0) += go(r, c);
                  });
}

inline Var relu(Var a) {
  Graph& g = detail::graph_of(a);
  Matrix out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return g.record(OpKind::relu, std::move(out), {a.id},
                  [&g, a](const Matrix&, const Matrix& go, std::span<Matrix* const> gi) {
                    const Matrix& x = g.value(a);
                    for (std::size_t i = 0; i < x.size(); ++i)
                      if (x[i] > 0.0) (*gi[0])[i] += go[i];
                  });
}

namespace detail {

inline double row_log_sum_exp(std::span<const double> row) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : row) m = std::max(m, v);
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace detail

/// Row-wise log Σ exp, computed with a max shift. Output is rows x 1.
inline Var log_sum_exp(Var a) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) out(r, 0) = detail::row_log_sum_exp(x.row(r));
  return g.record(OpKind::log_sum_exp, std::move(out), {a.id},
                  [&g, a](const Matrix& lse, const Matrix& go, std::span<Matrix* const> gi) {
                    const Matrix& x = g.value(a);
                    for (std::size_t r = 0; r < x.rows(); ++r)
                      for (std::size_t c = 0; c < x.cols(); ++c)
                        (*gi[0])(r, c) += go(r, 0) * std::exp(x(r, c) - lse(r, 0));
                  });
}

/// Row-wise log-softmax.
inline Var log_softmax(Var a) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double lse = detail::row_log_sum_exp(x.row(r));
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) - lse;
  }
  return g.record(OpKind::log_softmax, std::move(out), {a.id},
                  [](const Matrix& y, const Matrix& go, std::span<Matrix* const> gi) {
                    for (std::size_t r = 0; r < y.rows(); ++r) {
                      double gs = 0.0;
                      for (std::size_t c = 0; c < y.cols(); ++c) gs += go(r, c);
                      for (std::size_t c = 0; c < y.cols(); ++c)
                        (*gi[0])(r, c) += go(r, c) - std::exp(y(r, c)) * gs;
                    }
                  });
}

/// Per-column Euclidean norm over the batch: 1 x cols. Derivative at a zero
/// column is taken as 0.
inline Var column_norm(Var a) {
  Graph& g = detail::graph_of(a);
  const Matrix& x = a.value();
  Matrix out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c) * x(r, c);
  for (double& v : out.values()) v = std::sqrt(v);
  return g.record(OpKind::column_norm, std::move(out), {a.id},
                  [&g, a](const Matrix& n, const Matrix& go, std::span<Matrix* const> gi) {
                    const Matrix& x = g.value(a);
                    for (std::size_t r = 0; r < x.rows(); ++r)
                      for (std::size_t c = 0; c < x.cols(); ++c)
                        if (n(0, c) > 0.0) (*gi[0])(r, c) += go(0, c) * x(r, c) / n(0, c);
                  });
}

}  // namespace semcom
