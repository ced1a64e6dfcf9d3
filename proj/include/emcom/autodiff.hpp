#pragma once

// Tape-based reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation executed on Vars during a forward pass.
// Parameters live outside the tape and are bound to leaf nodes with
// Tape::param(); Tape::backward() accumulates into Parameter::grad. A tape is
// meant to be short lived: build it, run one forward/backward, drop it.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "emcom/tensor.hpp"

namespace emcom::ad {

/// A named trainable leaf tensor together with its accumulated gradient.
/// The gradient is an accumulator written by Tape::backward, so forward
/// passes can bind parameters of a const model.
struct Parameter {
  std::string name;
  Tensor value;
  mutable Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() const { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const {
    if (!tape_) throw std::logic_error("var: not bound to a tape");
    return *tape_;
  }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) {
    return push("constant", std::move(value), false, nullptr, {});
  }

  Var param(const Parameter& p) {
    return push("param", p.value, true, &p, {});
  }

  /// Records an op node. `backward` receives the node's output gradient and
  /// must accumulate into its inputs through grad_of().
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward) {
    bool needs = false;
    for (const Var& v : inputs) {
      if (&v.tape() != this) {
        throw std::invalid_argument(std::string(op) +
                                    ": inputs live on different tapes");
      }
      needs = needs || nodes_[v.id()].needs_grad;
    }
    if (!value.all_finite()) {
      throw NumericError(std::string(op) + ": non-finite value in output " +
                         shape_string(value.shape()));
    }
    return push(op, std::move(value), needs, nullptr,
                needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }
  const char* op_name(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad_of(const Var& v) {
    Node& n = nodes_[v.id()];
    if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  /// Propagates d(loss)/d(node) back to every parameter leaf reachable from
  /// `loss` and adds it to the bound Parameter::grad.
  void backward(const Var& loss) {
    if (&loss.tape() != this) {
      throw std::invalid_argument("backward: loss lives on another tape");
    }
    if (loss.value().size() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got " +
                                  shape_string(loss.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    grad_of(loss)[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0 || !n.backward) continue;
      // The node vector does not grow during backward, so this reference
      // stays valid while the closure writes into other nodes.
      n.backward(*this, n.grad);
    }
    for (Node& n : nodes_) {
      if (!n.param || n.grad.size() == 0) continue;
      if (!n.grad.all_finite()) {
        throw NumericError("backward: non-finite gradient for parameter '" +
                           n.param->name + "'");
      }
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    bool needs_grad;
    const Parameter* param;
    BackwardFn backward;
  };

  Var push(const char* op, Tensor value, bool needs, const Parameter* p,
           BackwardFn fn) {
    nodes_.push_back(Node{op, std::move(value), Tensor(), needs, p,
                          std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape().value(id_); }

namespace detail {

[[noreturn]] inline void shape_error(const char* op, const std::string& what) {
  throw std::invalid_argument(std::string(op) + ": " + what);
}

inline void require_rank2(const char* op, const Var& v) {
  if (v.value().rank() != 2) {
    shape_error(op, "expected a matrix, got " + shape_string(v.shape()));
  }
}

inline void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_error(op, "shape mismatch " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

// Row-major GEMM kernels backed by Eigen. All of them accumulate into C.
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  MutMap(c, M, N).noalias() += ConstMap(a, M, K) * ConstMap(b, K, N);
}

// C[m,n] += A[m,k] * B[n,k]^T
inline void gemm_nt(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  MutMap(c, M, N).noalias() += ConstMap(a, M, K) * ConstMap(b, N, K).transpose();
}

// C[m,n] += A[k,m]^T * B[k,n]
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
                    const double* a, const double* b, double* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k),
             N = static_cast<Eigen::Index>(n);
  MutMap(c, M, N).noalias() += ConstMap(a, K, M).transpose() * ConstMap(b, K, N);
}

// Elementwise op; `df` maps an input element to the local derivative.
template <class F, class DF>
Var unary(const char* op, const Var& a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape().record(
      op, std::move(y), {a}, [a, df](Tape& t, const Tensor& g) {
        const Tensor& x = a.value();
        Tensor& ga = t.grad_of(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i]);
      });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(const Var& a, const Var& b) {
  detail::require_same("add", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return a.tape().record("add", std::move(y), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           if (t.needs_grad(a)) {
                             Tensor& ga = t.grad_of(a);
                             for (std::size_t i = 0; i < g.size(); ++i)
                               ga[i] += g[i];
                           }
                           if (t.needs_grad(b)) {
                             Tensor& gb = t.grad_of(b);
                             for (std::size_t i = 0; i < g.size(); ++i)
                               gb[i] += g[i];
                           }
                         });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same("sub", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return a.tape().record("sub", std::move(y), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           if (t.needs_grad(a)) {
                             Tensor& ga = t.grad_of(a);
                             for (std::size_t i = 0; i < g.size(); ++i)
                               ga[i] += g[i];
                           }
                           if (t.needs_grad(b)) {
                             Tensor& gb = t.grad_of(b);
                             for (std::size_t i = 0; i < g.size(); ++i)
                               gb[i] -= g[i];
                           }
                         });
}

/// Hadamard product.
inline Var mul(const Var& a, const Var& b) {
  detail::require_same("mul", a, b);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.tape().record("mul", std::move(y), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           if (t.needs_grad(a)) {
                             Tensor& ga = t.grad_of(a);
                             const Tensor& bv = b.value();
                             for (std::size_t i = 0; i < g.size(); ++i)
                               ga[i] += g[i] * bv[i];
                           }
                           if (t.needs_grad(b)) {
                             Tensor& gb = t.grad_of(b);
                             const Tensor& av = a.value();
                             for (std::size_t i = 0; i < g.size(); ++i)
                               gb[i] += g[i] * av[i];
                           }
                         });
}

inline Var scale(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.values()) v *= s;
  return a.tape().record("scale", std::move(y), {a},
                         [a, s](Tape& t, const Tensor& g) {
                           Tensor& ga = t.grad_of(a);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] += s * g[i];
                         });
}

inline Var add_scalar(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.values()) v += s;
  return a.tape().record("add_scalar", std::move(y), {a},
                         [a](Tape& t, const Tensor& g) {
                           Tensor& ga = t.grad_of(a);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] += g[i];
                         });
}

/// 1 - a, used by gated cells.
inline Var one_minus(const Var& a) { return add_scalar(scale(a, -1.0), 1.0); }

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// Nonlinearities

inline Var sigmoid(const Var& a) {
  return detail::unary(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

inline Var tanh(const Var& a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double y = std::tanh(x);
        return 1.0 - y * y;
      });
}

inline Var relu(const Var& a) {
  return detail::unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var exp(const Var& a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double x) { return std::exp(x); });
}

inline Var log(const Var& a) {
  return detail::unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x) { return 1.0 / x; });
}

// ---------------------------------------------------------------------------
// Matrix products and broadcasting

inline Var matmul(const Var& a, const Var& b) {
  detail::require_rank2("matmul", a);
  detail::require_rank2("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    detail::shape_error("matmul", "inner dimensions differ " +
                                      shape_string(a.shape()) + " x " +
                                      shape_string(b.shape()));
  }
  Tensor y({m, n});
  detail::gemm_nn(m, k, n, a.value().data(), b.value().data(), y.data());
  return a.tape().record(
      "matmul", std::move(y), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
        if (t.needs_grad(a)) {
          detail::gemm_nt(m, n, k, g.data(), b.value().data(),
                          t.grad_of(a).data());
        }
        if (t.needs_grad(b)) {
          detail::gemm_tn(k, m, n, a.value().data(), g.data(),
                          t.grad_of(b).data());
        }
      });
}

/// a[m,k] * b[n,k]^T -> [m,n]
inline Var matmul_nt(const Var& a, const Var& b) {
  detail::require_rank2("matmul_nt", a);
  detail::require_rank2("matmul_nt", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    detail::shape_error("matmul_nt", "inner dimensions differ " +
                                         shape_string(a.shape()) + " x " +
                                         shape_string(b.shape()) + "^T");
  }
  Tensor y({m, n});
  detail::gemm_nt(m, k, n, a.value().data(), b.value().data(), y.data());
  return a.tape().record(
      "matmul_nt", std::move(y), {a, b},
      [a, b, m, k, n](Tape& t, const Tensor& g) {
        if (t.needs_grad(a)) {
          detail::gemm_nn(m, n, k, g.data(), b.value().data(),
                          t.grad_of(a).data());
        }
        if (t.needs_grad(b)) {
          detail::gemm_tn(n, m, k, g.data(), a.value().data(),
                          t.grad_of(b).data());
        }
      });
}

/// Adds a bias vector (shape [n] or [1,n]) to every row of a[m,n].
inline Var add_bias(const Var& a, const Var& bias) {
  detail::require_rank2("add_bias", a);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (bias.value().size() != n) {
    detail::shape_error("add_bias", "bias " + shape_string(bias.shape()) +
                                        " does not match " +
                                        shape_string(a.shape()));
  }
  Tensor y = a.value();
  const Tensor& b = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += b[j];
  return a.tape().record("add_bias", std::move(y), {a, bias},
                         [a, bias, m, n](Tape& t, const Tensor& g) {
                           if (t.needs_grad(a)) {
                             Tensor& ga = t.grad_of(a);
                             for (std::size_t i = 0; i < g.size(); ++i)
                               ga[i] += g[i];
                           }
                           if (t.needs_grad(bias)) {
                             Tensor& gb = t.grad_of(bias);
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 gb[j] += g[i * n + j];
                           }
                         });
}

/// Scales row i of a[n,d] by c[i] (c has n entries).
inline Var mul_rows(const Var& a, const Var& c) {
  detail::require_rank2("mul_rows", a);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  if (c.value().size() != n) {
    detail::shape_error("mul_rows", "row scale " + shape_string(c.shape()) +
                                        " does not match " +
                                        shape_string(a.shape()));
  }
  Tensor y = a.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] *= c.value()[i];
  return a.tape().record(
      "mul_rows", std::move(y), {a, c}, [a, c, n, d](Tape& t, const Tensor& g) {
        if (t.needs_grad(a)) {
          Tensor& ga = t.grad_of(a);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
              ga[i * d + j] += g[i * d + j] * c.value()[i];
        }
        if (t.needs_grad(c)) {
          Tensor& gc = t.grad_of(c);
          for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j)
              s += g[i * d + j] * a.value()[i * d + j];
            gc[i] += s;
          }
        }
      });
}

/// Row-wise inner product of a[n,d] and b[n,d] -> [n,1].
inline Var row_dot(const Var& a, const Var& b) {
  detail::require_rank2("row_dot", a);
  detail::require_same("row_dot", a, b);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  Tensor y({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      s += a.value()[i * d + j] * b.value()[i * d + j];
    y[i] = s;
  }
  return a.tape().record(
      "row_dot", std::move(y), {a, b}, [a, b, n, d](Tape& t, const Tensor& g) {
        if (t.needs_grad(a)) {
          Tensor& ga = t.grad_of(a);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
              ga[i * d + j] += g[i] * b.value()[i * d + j];
        }
        if (t.needs_grad(b)) {
          Tensor& gb = t.grad_of(b);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
              gb[i * d + j] += g[i] * a.value()[i * d + j];
        }
      });
}

// ---------------------------------------------------------------------------
// Structural ops

inline Var reshape(const Var& a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    detail::shape_error("reshape", "cannot view " + shape_string(a.shape()) +
                                       " as " + shape_string(shape));
  }
  return a.tape().record("reshape", a.value().reshaped(std::move(shape)), {a},
                         [a](Tape& t, const Tensor& g) {
                           Tensor& ga = t.grad_of(a);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             ga[i] += g[i];
                         });
}

inline Var concat_cols(const Var& a, const Var& b) {
  detail::require_rank2("concat_cols", a);
  detail::require_rank2("concat_cols", b);
  const std::size_t m = a.shape()[0], n1 = a.shape()[1], n2 = b.shape()[1];
  if (b.shape()[0] != m) {
    detail::shape_error("concat_cols", "row counts differ " +
                                           shape_string(a.shape()) + " | " +
                                           shape_string(b.shape()));
  }
  const std::size_t n = n1 + n2;
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.value().data() + i * n1, n1, y.data() + i * n);
    std::copy_n(b.value().data() + i * n2, n2, y.data() + i * n + n1);
  }
  return a.tape().record(
      "concat_cols", std::move(y), {a, b},
      [a, b, m, n1, n2, n](Tape& t, const Tensor& g) {
        if (t.needs_grad(a)) {
          Tensor& ga = t.grad_of(a);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n1; ++j) ga[i * n1 + j] += g[i * n + j];
        }
        if (t.needs_grad(b)) {
          Tensor& gb = t.grad_of(b);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n2; ++j)
              gb[i * n2 + j] += g[i * n + n1 + j];
        }
      });
}

/// Columns [start, start+len) of a matrix.
inline Var slice_cols(const Var& a, std::size_t start, std::size_t len) {
  detail::require_rank2("slice_cols", a);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (len == 0 || start + len > n) {
    detail::shape_error("slice_cols", "range [" + std::to_string(start) +
                                          ", " + std::to_string(start + len) +
                                          ") outside " +
                                          shape_string(a.shape()));
  }
  Tensor y({m, len});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.value().data() + i * n + start, len, y.data() + i * len);
  return a.tape().record(
      "slice_cols", std::move(y), {a},
      [a, m, n, start, len](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_of(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < len; ++j)
            ga[i * n + start + j] += g[i * len + j];
      });
}

/// Selects rows of a[n,d]; repeated indices accumulate gradient.
inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  detail::require_rank2("gather_rows", a);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  if (index.empty()) detail::shape_error("gather_rows", "empty index");
  Tensor y({index.size(), d});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= n) {
      detail::shape_error("gather_rows", "row " + std::to_string(index[r]) +
                                             " outside " +
                                             shape_string(a.shape()));
    }
    std::copy_n(a.value().data() + index[r] * d, d, y.data() + r * d);
  }
  return a.tape().record(
      "gather_rows", std::move(y), {a},
      [a, d, index = std::move(index)](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_of(a);
        for (std::size_t r = 0; r < index.size(); ++r)
          for (std::size_t j = 0; j < d; ++j)
            ga[index[r] * d + j] += g[r * d + j];
      });
}

/// For each row i of a[m,s], picks k columns index[i*k .. i*k+k) -> [m,k].
inline Var gather_per_row(const Var& a, std::vector<std::size_t> index,
                          std::size_t k) {
  detail::require_rank2("gather_per_row", a);
  const std::size_t m = a.shape()[0], s = a.shape()[1];
  if (k == 0 || index.size() != m * k) {
    detail::shape_error("gather_per_row",
                        std::to_string(index.size()) +
                            " indices for " + std::to_string(m) + " rows of " +
                            std::to_string(k));
  }
  Tensor y({m, k});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t c = index[i * k + j];
      if (c >= s) {
        detail::shape_error("gather_per_row", "column " + std::to_string(c) +
                                                  " outside " +
                                                  shape_string(a.shape()));
      }
      y[i * k + j] = a.value()[i * s + c];
    }
  }
  return a.tape().record(
      "gather_per_row", std::move(y), {a},
      [a, m, s, k, index = std::move(index)](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_of(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j)
            ga[i * s + index[i * k + j]] += g[i * k + j];
      });
}

/// Sums rows of a[n,d] into `segments` buckets: out[segment[i]] += a[i].
inline Var segment_sum(const Var& a, std::vector<std::size_t> segment,
                       std::size_t segments) {
  detail::require_rank2("segment_sum", a);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  if (segment.size() != n) {
    detail::shape_error("segment_sum", std::to_string(segment.size()) +
                                           " segment ids for " +
                                           shape_string(a.shape()));
  }
  Tensor y({segments, d});
  for (std::size_t i = 0; i < n; ++i) {
    if (segment[i] >= segments) {
      detail::shape_error("segment_sum", "segment id " +
                                             std::to_string(segment[i]) +
                                             " >= " + std::to_string(segments));
    }
    for (std::size_t j = 0; j < d; ++j) y[segment[i] * d + j] += a.value()[i * d + j];
  }
  return a.tape().record(
      "segment_sum", std::move(y), {a},
      [a, n, d, segment = std::move(segment)](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_of(a);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j)
            ga[i * d + j] += g[segment[i] * d + j];
      });
}

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record("sum", Tensor::scalar(s), {a},
                         [a](Tape& t, const Tensor& g) {
                           Tensor& ga = t.grad_of(a);
                           for (std::size_t i = 0; i < ga.size(); ++i)
                             ga[i] += g[0];
                         });
}

inline Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Forward value is `hard`; the gradient flows unchanged into `soft`.
inline Var straight_through(const Var& soft, Tensor hard) {
  if (hard.shape() != soft.shape()) {
    detail::shape_error("straight_through",
                        "hard " + shape_string(hard.shape()) + " vs soft " +
                            shape_string(soft.shape()));
  }
  return soft.tape().record("straight_through", std::move(hard), {soft},
                            [soft](Tape& t, const Tensor& g) {
                              Tensor& gs = t.grad_of(soft);
                              for (std::size_t i = 0; i < g.size(); ++i)
                                gs[i] += g[i];
                            });
}

// ---------------------------------------------------------------------------
// Softmax family

inline Tensor softmax_rows_value(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.data() + i * n;
    double* yi = y.data() + i * n;
    const double mx = *std::max_element(xi, xi + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (yi[j] = std::exp(xi[j] - mx));
    for (std::size_t j = 0; j < n; ++j) yi[j] /= z;
  }
  return y;
}

/// Softmax over the last dimension.
inline Var softmax(const Var& a) {
  Tensor y = softmax_rows_value(a.value());
  return a.tape().record("softmax", y, {a}, [a, y](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_of(a);
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

/// Log-softmax over the last dimension.
inline Var log_softmax(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.data() + i * n;
    const double mx = *std::max_element(xi, xi + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(xi[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xi[j] - lse;
  }
  return a.tape().record(
      "log_softmax", y, {a}, [a, y, m, n](Tape& t, const Tensor& g) {
        Tensor& ga = t.grad_of(a);
        for (std::size_t i = 0; i < m; ++i) {
          double gs = 0.0;
          for (std::size_t j = 0; j < n; ++j) gs += g[i * n + j];
          for (std::size_t j = 0; j < n; ++j)
            ga[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * gs;
        }
      });
}

/// Mean negative log-likelihood of row-wise log-probabilities at `targets`.
inline Var nll(const Var& log_probs, std::vector<std::size_t> targets) {
  const Tensor& lp = log_probs.value();
  const std::size_t m = lp.rows(), n = lp.cols();
  if (targets.size() != m) {
    detail::shape_error("nll", std::to_string(targets.size()) +
                                   " targets for " + shape_string(lp.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= n) {
      throw std::out_of_range("nll: target " + std::to_string(targets[i]) +
                              " outside " + std::to_string(n) + " classes");
    }
    s -= lp[i * n + targets[i]];
  }
  const double inv = 1.0 / static_cast<double>(m);
  return log_probs.tape().record(
      "nll", Tensor::scalar(s * inv), {log_probs},
      [log_probs, n, inv, targets = std::move(targets)](Tape& t,
                                                        const Tensor& g) {
        Tensor& gl = t.grad_of(log_probs);
        for (std::size_t i = 0; i < targets.size(); ++i)
          gl[i * n + targets[i]] -= g[0] * inv;
      });
}

/// -log(predicted[target]) for a single probability vector.
inline Var cross_entropy(const Var& predicted, std::size_t target) {
  const Tensor& p = predicted.value();
  if (target >= p.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " outside " + std::to_string(p.size()) +
                            " classes");
  }
  double total = 0.0;
  for (double v : p.values()) total += v;
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("cross_entropy: distribution sums to " +
                                std::to_string(total));
  }
  const double pt = p[target];
  const double loss = pt > 0.0 ? -std::log(pt)
                               : std::numeric_limits<double>::infinity();
  return predicted.tape().record(
      "cross_entropy", Tensor::scalar(loss), {predicted},
      [predicted, target](Tape& t, const Tensor& g) {
        t.grad_of(predicted)[target] -= g[0] / predicted.value()[target];
      });
}

// ---------------------------------------------------------------------------
// Convolutional ops over [N, C, H, W] tensors

/// Valid (unpadded) stride-1 2-D convolution. weight [F, C, K, K], bias [F].
inline Var conv2d(const Var& x, const Var& weight, const Var& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 4 || ws.size() != 4 || ws[1] != xs[1] || ws[2] != ws[3] ||
      ws[2] > xs[2] || ws[3] > xs[3] || bias.value().size() != ws[0]) {
    detail::shape_error("conv2d", "input " + shape_string(xs) + ", weight " +
                                      shape_string(ws) + ", bias " +
                                      shape_string(bias.shape()));
  }
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t f = ws[0], k = ws[2];
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  Tensor y({n, f, oh, ow});
  const double* xv = x.value().data();
  const double* wv = weight.value().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < f; ++o) {
      double* yo = y.data() + (b * f + o) * oh * ow;
      std::fill_n(yo, oh * ow, bias.value()[o]);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* xc = xv + (b * c + ch) * h * w;
        for (std::size_t u = 0; u < k; ++u) {
          for (std::size_t v = 0; v < k; ++v) {
            const double kw = wv[((o * c + ch) * k + u) * k + v];
            for (std::size_t i = 0; i < oh; ++i) {
              const double* xr = xc + (i + u) * w + v;
              double* yr = yo + i * ow;
              for (std::size_t j = 0; j < ow; ++j) yr[j] += kw * xr[j];
            }
          }
        }
      }
    }
  }
  return x.tape().record(
      "conv2d", std::move(y), {x, weight, bias},
      [=](Tape& t, const Tensor& g) {
        const double* xv = x.value().data();
        const double* wv = weight.value().data();
        double* gx = t.needs_grad(x) ? t.grad_of(x).data() : nullptr;
        double* gw = t.needs_grad(weight) ? t.grad_of(weight).data() : nullptr;
        double* gb = t.needs_grad(bias) ? t.grad_of(bias).data() : nullptr;
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t o = 0; o < f; ++o) {
            const double* go = g.data() + (b * f + o) * oh * ow;
            if (gb) {
              double s = 0.0;
              for (std::size_t i = 0; i < oh * ow; ++i) s += go[i];
              gb[o] += s;
            }
            for (std::size_t ch = 0; ch < c; ++ch) {
              const std::size_t xoff = (b * c + ch) * h * w;
              for (std::size_t u = 0; u < k; ++u) {
                for (std::size_t v = 0; v < k; ++v) {
                  const std::size_t widx = ((o * c + ch) * k + u) * k + v;
                  const double kw = wv[widx];
                  double acc = 0.0;
                  for (std::size_t i = 0; i < oh; ++i) {
                    const std::size_t row = xoff + (i + u) * w + v;
                    const double* gr = go + i * ow;
                    if (gw) {
                      const double* xr = xv + row;
                      for (std::size_t j = 0; j < ow; ++j) acc += gr[j] * xr[j];
                    }
                    if (gx) {
                      double* gxr = gx + row;
                      for (std::size_t j = 0; j < ow; ++j) gxr[j] += kw * gr[j];
                    }
                  }
                  if (gw) gw[widx] += acc;
                }
              }
            }
          }
        }
      });
}

/// Non-overlapping 2x2 average pooling; odd trailing rows/cols are dropped.
inline Var avg_pool2(const Var& x) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[2] < 2 || xs[3] < 2) {
    detail::shape_error("avg_pool2", "expected [N,C,H,W] with H,W >= 2, got " +
                                         shape_string(xs));
  }
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor y({xs[0], xs[1], oh, ow});
  const double* xv = x.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double* r0 = xv + p * h * w + 2 * i * w + 2 * j;
        const double* r1 = r0 + w;
        y[(p * oh + i) * ow + j] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  return x.tape().record(
      "avg_pool2", std::move(y), {x},
      [x, planes, h, w, oh, ow](Tape& t, const Tensor& g) {
        double* gx = t.grad_of(x).data();
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
              const double q = 0.25 * g[(p * oh + i) * ow + j];
              double* r0 = gx + p * h * w + 2 * i * w + 2 * j;
              double* r1 = r0 + w;
              r0[0] += q;
              r0[1] += q;
              r1[0] += q;
              r1[1] += q;
            }
          }
        }
      });
}

}  // namespace emcom::ad
