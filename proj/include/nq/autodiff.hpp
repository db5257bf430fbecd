#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation in forward order; backward() walks the
// records in exact reverse. Values are checked for NaN/Inf as they are
// produced. Reductions accumulate in double regardless of the storage type.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nq/errors.hpp"

namespace nq::ad {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Trainable tensor living outside any tape. Gradients from every backward
// pass that involves it are added into `grad`.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<T>::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;
  const Matrix<T>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  // Propagates the node's gradient into its parents' gradients.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> value) { return push(std::move(value), false, {}, nullptr, "constant"); }
  // Leaf whose gradient accumulates across backward() calls.
  Var<T> input(Matrix<T> value, bool requires_grad = true) {
    Var<T> v = push(std::move(value), requires_grad, {}, nullptr, "input");
    if (requires_grad) ensure_grad(v.id());
    return v;
  }
  Var<T> parameter(Parameter<T>& p) {
    Var<T> v = push(p.value, true, {}, nullptr, p.name.c_str());
    nodes_[v.id()].param = &p;
    return v;
  }

  // Records an operation result. The node requires grad iff any parent does.
  Var<T> record(Matrix<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn,
                const char* op) {
    bool rg = false;
    for (const auto& p : parents) {
      check_owner(p);
      rg = rg || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), rg, std::move(fn), nullptr, op);
  }

  void backward(const Var<T>& loss) {
    if (loss.tape() != this || loss.id() >= nodes_.size()) {
      throw TapeError("backward: loss is not recorded on this tape");
    }
    auto& root = nodes_[loss.id()];
    if (root.value.rows() != 1 || root.value.cols() != 1) {
      throw TapeError("backward: loss must be 1x1");
    }
    for (std::size_t i = 0; i <= loss.id(); ++i) {
      auto& n = nodes_[i];
      if (!n.requires_grad) continue;
      bool accumulating_leaf = !n.fn && n.param == nullptr;
      if (!accumulating_leaf) n.grad.setZero(n.value.rows(), n.value.cols());
    }
    if (!root.requires_grad) return;
    root.grad(0, 0) += T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad) continue;
      if (n.fn) {
        n.fn(*this, i);
      } else if (n.param != nullptr) {
        n.param->grad += n.grad;
      }
    }
  }

  const Matrix<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix<T>& grad(const Var<T>& v) const {
    check_owner(v);
    const auto& n = nodes_[v.id()];
    if (!n.requires_grad) throw TapeError("grad: tensor does not require grad");
    return n.grad;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // For backward functions: gradient buffer of a node that requires grad.
  Matrix<T>& grad_buffer(std::size_t id) { return nodes_[id].grad; }
  const Matrix<T>& out_grad(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool requires_grad = false;
    BackwardFn fn;
    Parameter<T>* param = nullptr;
    const char* op = "";
  };

  Var<T> push(Matrix<T> value, bool rg, BackwardFn fn, Parameter<T>* param, const char* op) {
    if (!value.allFinite()) {
      throw NonFiniteError(std::string("non-finite value produced by ") + op);
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.fn = std::move(fn);
    n.param = param;
    n.op = op;
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }
  void ensure_grad(std::size_t id) {
    auto& n = nodes_[id];
    n.grad.setZero(n.value.rows(), n.value.cols());
  }
  void check_owner(const Var<T>& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
      throw TapeError("tensor belongs to a different tape");
    }
  }

  std::vector<Node> nodes_;
};

template <typename T>
const Matrix<T>& Var<T>::value() const {
  return tape_->value(id_);
}

namespace detail {

template <typename T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

template <typename T>
void accumulate(Tape<T>& tape, const Var<T>& v, const auto& delta) {
  if (tape.requires_grad(v.id())) tape.grad_buffer(v.id()) += delta;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra operators.

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "add");
  Tape<T>& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b},
                  [a, b](Tape<T>& tp, std::size_t self) {
                    detail::accumulate(tp, a, tp.out_grad(self));
                    detail::accumulate(tp, b, tp.out_grad(self));
                  },
                  "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "sub");
  Tape<T>& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b},
                  [a, b](Tape<T>& tp, std::size_t self) {
                    detail::accumulate(tp, a, tp.out_grad(self));
                    detail::accumulate(tp, b, -tp.out_grad(self));
                  },
                  "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "mul");
  Tape<T>& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [a, b](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    detail::accumulate(tp, a, g.cwiseProduct(b.value()));
                    detail::accumulate(tp, b, g.cwiseProduct(a.value()));
                  },
                  "mul");
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tape<T>& t = *a.tape();
  return t.record(a.value() * s, {a},
                  [a, s](Tape<T>& tp, std::size_t self) {
                    detail::accumulate(tp, a, tp.out_grad(self) * s);
                  },
                  "scale");
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value().array() + s;
  return t.record(std::move(out), {a},
                  [a](Tape<T>& tp, std::size_t self) { detail::accumulate(tp, a, tp.out_grad(self)); },
                  "add_scalar");
}

template <typename T>
Var<T> square(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  return t.record(a.value().cwiseAbs2(), {a},
                  [a](Tape<T>& tp, std::size_t self) {
                    detail::accumulate(tp, a, (tp.out_grad(self).cwiseProduct(a.value()) * T(2)).eval());
                  },
                  "square");
}

// Adds a 1xC row to every row of `a`.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionError("add_row: shape mismatch");
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row},
                  [a, row](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    detail::accumulate(tp, a, g);
                    detail::accumulate(tp, row, g.colwise().sum().eval());
                  },
                  "add_row");
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " disagree");
  }
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value() * b.value();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    if (tp.requires_grad(a.id())) tp.grad_buffer(a.id()).noalias() += g * b.value().transpose();
                    if (tp.requires_grad(b.id())) tp.grad_buffer(b.id()).noalias() += a.value().transpose() * g;
                  },
                  "matmul");
}

// a * b^T
template <typename T>
Var<T> matmul_bt(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_bt: column counts disagree");
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value() * b.value().transpose();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    if (tp.requires_grad(a.id())) tp.grad_buffer(a.id()).noalias() += g * b.value();
                    if (tp.requires_grad(b.id())) tp.grad_buffer(b.id()).noalias() += g.transpose() * a.value();
                  },
                  "matmul_bt");
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value().transpose();
  return t.record(std::move(out), {a},
                  [a](Tape<T>& tp, std::size_t self) {
                    detail::accumulate(tp, a, tp.out_grad(self).transpose());
                  },
                  "transpose");
}

// x * w + b, with b a 1xO row.
template <typename T>
Var<T> dense(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.cols() != w.rows()) {
    throw DimensionError("dense: input width " + std::to_string(x.cols()) + " != weight rows " +
                         std::to_string(w.rows()));
  }
  if (b.rows() != 1 || b.cols() != w.cols()) throw DimensionError("dense: bias shape mismatch");
  Tape<T>& t = *x.tape();
  Matrix<T> out(x.rows(), w.cols());
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return t.record(std::move(out), {x, w, b},
                  [x, w, b](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    if (tp.requires_grad(x.id())) tp.grad_buffer(x.id()).noalias() += g * w.value().transpose();
                    if (tp.requires_grad(w.id())) tp.grad_buffer(w.id()).noalias() += x.value().transpose() * g;
                    detail::accumulate(tp, b, g.colwise().sum().eval());
                  },
                  "dense");
}

// Affine map from sparse binary rows: out[r] = sum_{c in rows[r]} w[c] + b.
// The sparse input is a constant.
template <typename T>
Var<T> sparse_dense(std::vector<std::span<const std::uint32_t>> rows, const Var<T>& w,
                    const Var<T>& b) {
  if (b.rows() != 1 || b.cols() != w.cols()) throw DimensionError("sparse_dense: bias shape mismatch");
  const auto in_dim = static_cast<std::uint32_t>(w.rows());
  Matrix<T> out(static_cast<Eigen::Index>(rows.size()), w.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(r) = b.value().row(0);
    for (auto c : rows[r]) {
      if (c >= in_dim) throw DimensionError("sparse_dense: feature index exceeds weight rows");
      out.row(r) += w.value().row(c);
    }
  }
  Tape<T>& t = *w.tape();
  return t.record(std::move(out), {w, b},
                  [rows = std::move(rows), w, b](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    if (tp.requires_grad(w.id())) {
                      auto& gw = tp.grad_buffer(w.id());
                      for (std::size_t r = 0; r < rows.size(); ++r) {
                        for (auto c : rows[r]) gw.row(c) += g.row(r);
                      }
                    }
                    detail::accumulate(tp, b, g.colwise().sum().eval());
                  },
                  "sparse_dense");
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tape<T>& t = *a.tape();
  Matrix<T> out = a.value().cwiseMax(T(0));
  return t.record(std::move(out), {a},
                  [a](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    Matrix<T> d = (a.value().array() > T(0)).select(g.array(), T(0)).matrix();
                    detail::accumulate(tp, a, d);
                  },
                  "relu");
}

// Rows of `a` selected by index (repeats allowed); gradients scatter-add.
template <typename T>
Var<T> gather_rows(const Var<T>& a, std::vector<std::size_t> index) {
  Matrix<T> out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= static_cast<std::size_t>(a.rows())) throw DimensionError("gather_rows: index out of range");
    out.row(r) = a.value().row(index[r]);
  }
  Tape<T>& t = *a.tape();
  return t.record(std::move(out), {a},
                  [a, index = std::move(index)](Tape<T>& tp, std::size_t self) {
                    if (!tp.requires_grad(a.id())) return;
                    const auto& g = tp.out_grad(self);
                    auto& ga = tp.grad_buffer(a.id());
                    for (std::size_t r = 0; r < index.size(); ++r) ga.row(index[r]) += g.row(r);
                  },
                  "gather_rows");
}

// ---------------------------------------------------------------------------
// Normalisation.

template <typename T>
struct BatchNormStats {
  Matrix<T> running_mean;
  Matrix<T> running_var;
  T momentum = T(0.9);  // weight kept on the previous running value
  T eps = T(1e-5);

  explicit BatchNormStats(Eigen::Index width = 0)
      : running_mean(Matrix<T>::Zero(1, width)), running_var(Matrix<T>::Ones(1, width)) {}
};

// Training mode normalises with batch statistics (biased variance) and
// updates the running estimates; evaluation mode uses the running estimates.
template <typename T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>& stats,
                 bool training) {
  const auto rows = x.rows();
  const auto width = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != width || beta.rows() != 1 || beta.cols() != width) {
    throw DimensionError("batchnorm: affine parameter shape mismatch");
  }
  Tape<T>& t = *x.tape();
  if (!training) {
    Matrix<T> inv_std = (stats.running_var.array() + stats.eps).rsqrt().matrix();
    Matrix<T> xhat = (x.value().rowwise() - stats.running_mean.row(0)).array().rowwise() * inv_std.array().row(0);
    Matrix<T> out = (xhat.array().rowwise() * gamma.value().array().row(0)).rowwise() + beta.value().array().row(0);
    return t.record(std::move(out), {x, gamma, beta},
                    [x, gamma, beta, inv_std, xhat](Tape<T>& tp, std::size_t self) {
                      const auto& g = tp.out_grad(self);
                      detail::accumulate(tp, beta, g.colwise().sum().eval());
                      detail::accumulate(tp, gamma, g.cwiseProduct(xhat).colwise().sum().eval());
                      Matrix<T> scale_row = gamma.value().cwiseProduct(inv_std);
                      detail::accumulate(tp, x, (g.array().rowwise() * scale_row.array().row(0)).matrix().eval());
                    },
                    "batchnorm_eval");
  }
  if (rows < 2) throw DimensionError("batchnorm: training mode needs a batch of at least 2 rows");

  Eigen::Matrix<double, 1, Eigen::Dynamic> mean_d = x.value().template cast<double>().colwise().sum() / double(rows);
  Matrix<T> mean = mean_d.template cast<T>();
  Matrix<T> centered = x.value().rowwise() - mean.row(0);
  Eigen::Matrix<double, 1, Eigen::Dynamic> var_d =
      centered.template cast<double>().cwiseAbs2().colwise().sum() / double(rows);
  Matrix<T> var = var_d.template cast<T>();
  Matrix<T> inv_std = (var.array() + stats.eps).rsqrt().matrix();
  Matrix<T> xhat = centered.array().rowwise() * inv_std.array().row(0);
  Matrix<T> out = (xhat.array().rowwise() * gamma.value().array().row(0)).rowwise() + beta.value().array().row(0);

  const T keep = stats.momentum;
  const T unbias = T(rows) / T(rows - 1);
  stats.running_mean = keep * stats.running_mean + (T(1) - keep) * mean;
  stats.running_var = keep * stats.running_var + (T(1) - keep) * unbias * var;

  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, inv_std, xhat, rows](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    Matrix<T> sum_g = g.colwise().sum();
                    Matrix<T> sum_gx = g.cwiseProduct(xhat).colwise().sum();
                    detail::accumulate(tp, beta, sum_g);
                    detail::accumulate(tp, gamma, sum_gx);
                    if (!tp.requires_grad(x.id())) return;
                    // dx = gamma/(sigma*B) * (B*g - sum(g) - xhat*sum(g*xhat))
                    Matrix<T> coef = gamma.value().cwiseProduct(inv_std) / T(rows);
                    Matrix<T> dx = (g * T(rows)).rowwise() - sum_g.row(0);
                    dx -= (xhat.array().rowwise() * sum_gx.array().row(0)).matrix();
                    dx = (dx.array().rowwise() * coef.array().row(0)).matrix();
                    tp.grad_buffer(x.id()) += dx;
                  },
                  "batchnorm");
}

// ---------------------------------------------------------------------------
// Softmax.

// Softmax over consecutive blocks of `block` columns in every row.
template <typename T>
Var<T> softmax_blocks(const Var<T>& a, Eigen::Index block) {
  if (block <= 0 || a.cols() % block != 0) throw DimensionError("softmax_blocks: width not divisible by block");
  const Eigen::Index nblocks = a.cols() / block;
  Matrix<T> out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index j = 0; j < nblocks; ++j) {
      auto in = a.value().row(r).segment(j * block, block);
      auto o = out.row(r).segment(j * block, block);
      const T mx = in.maxCoeff();
      o = (in.array() - mx).exp().matrix();
      double s = 0.0;
      for (Eigen::Index k = 0; k < block; ++k) s += static_cast<double>(o(k));
      o /= static_cast<T>(s);
    }
  }
  Tape<T>& t = *a.tape();
  return t.record(std::move(out), {a},
                  [a, block, nblocks](Tape<T>& tp, std::size_t self) {
                    if (!tp.requires_grad(a.id())) return;
                    const auto& g = tp.out_grad(self);
                    const auto& y = tp.value(self);
                    auto& ga = tp.grad_buffer(a.id());
                    for (Eigen::Index r = 0; r < y.rows(); ++r) {
                      for (Eigen::Index j = 0; j < nblocks; ++j) {
                        auto ys = y.row(r).segment(j * block, block);
                        auto gs = g.row(r).segment(j * block, block);
                        const T dot = ys.dot(gs);
                        ga.row(r).segment(j * block, block) += (ys.array() * (gs.array() - dot)).matrix();
                      }
                    }
                  },
                  "softmax_blocks");
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  return softmax_blocks(a, a.cols());
}

// ---------------------------------------------------------------------------
// Row-wise distances and reductions.

// out[i] = sqrt(||a_i - b_i||^2 + 1e-12), as a column.
template <typename T>
Var<T> l2_distance_rows(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "l2_distance_rows");
  Matrix<T> diff = a.value() - b.value();
  Matrix<T> out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) s += static_cast<double>(diff(r, c)) * diff(r, c);
    out(r, 0) = static_cast<T>(std::sqrt(s + 1e-12));
  }
  Tape<T>& t = *a.tape();
  return t.record(std::move(out), {a, b},
                  [a, b, diff = std::move(diff)](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    const auto& d = tp.value(self);
                    Matrix<T> delta = diff.array().colwise() * (g.array() / d.array()).col(0);
                    detail::accumulate(tp, a, delta);
                    detail::accumulate(tp, b, -delta);
                  },
                  "l2_distance_rows");
}

// out[i] = <a_i, b_i>, as a column.
template <typename T>
Var<T> inner_product_rows(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "inner_product_rows");
  Matrix<T> out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) s += static_cast<double>(a.value()(r, c)) * b.value()(r, c);
    out(r, 0) = static_cast<T>(s);
  }
  Tape<T>& t = *a.tape();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    if (tp.requires_grad(a.id())) tp.grad_buffer(a.id()) += (b.value().array().colwise() * g.array().col(0)).matrix();
                    if (tp.requires_grad(b.id())) tp.grad_buffer(b.id()) += (a.value().array().colwise() * g.array().col(0)).matrix();
                  },
                  "inner_product_rows");
}

// Sum of squares of each row, as a column.
template <typename T>
Var<T> row_squared_norms(const Var<T>& a) {
  Matrix<T> out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) s += static_cast<double>(a.value()(r, c)) * a.value()(r, c);
    out(r, 0) = static_cast<T>(s);
  }
  Tape<T>& t = *a.tape();
  return t.record(std::move(out), {a},
                  [a](Tape<T>& tp, std::size_t self) {
                    const auto& g = tp.out_grad(self);
                    if (tp.requires_grad(a.id())) tp.grad_buffer(a.id()) += (a.value().array().colwise() * (T(2) * g.array()).col(0)).matrix();
                  },
                  "row_squared_norms");
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Matrix<T> out(1, 1);
  out(0, 0) = static_cast<T>(a.value().template cast<double>().sum());
  Tape<T>& t = *a.tape();
  return t.record(std::move(out), {a},
                  [a](Tape<T>& tp, std::size_t self) {
                    if (!tp.requires_grad(a.id())) return;
                    tp.grad_buffer(a.id()).array() += tp.out_grad(self)(0, 0);
                  },
                  "sum");
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.value().size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

}  // namespace nq::ad
