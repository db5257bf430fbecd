#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nq/autodiff.hpp"
#include "nq/rng.hpp"

namespace nq::nn {

using ad::BatchNormStats;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// Visitors used for checkpointing and optimisation.
template <typename T>
using ParamVisitor = std::function<void(Parameter<T>&)>;
template <typename T>
using BufferVisitor = std::function<void(const std::string& name, Matrix<T>&)>;

template <typename T>
Matrix<T> he_normal(Eigen::Index in, Eigen::Index out, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
  Matrix<T> w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(dist(rng));
  return w;
}

// Dense layer, optionally followed by batch-norm and ReLU.
template <typename T>
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, Eigen::Index in, Eigen::Index out, bool norm_relu, Rng& rng)
      : weight_(name + ".weight", he_normal<T>(in, out, rng)),
        bias_(name + ".bias", Matrix<T>::Zero(1, out)),
        norm_relu_(norm_relu),
        name_(name) {
    if (norm_relu_) {
      gamma_ = Parameter<T>(name + ".bn.gamma", Matrix<T>::Ones(1, out));
      beta_ = Parameter<T>(name + ".bn.beta", Matrix<T>::Zero(1, out));
      stats_ = BatchNormStats<T>(out);
    }
  }

  Eigen::Index in_dim() const { return weight_.value.rows(); }
  Eigen::Index out_dim() const { return weight_.value.cols(); }
  bool norm_relu() const { return norm_relu_; }

  Var<T> forward(Tape<T>& tape, const Var<T>& x, bool training) {
    Var<T> h = ad::dense(x, tape.parameter(weight_), tape.parameter(bias_));
    return finish(tape, h, training);
  }

  // First layer over sparse binary input rows.
  Var<T> forward_sparse(Tape<T>& tape, std::vector<std::span<const std::uint32_t>> rows, bool training) {
    Var<T> h = ad::sparse_dense(std::move(rows), tape.parameter(weight_), tape.parameter(bias_));
    return finish(tape, h, training);
  }

  void visit(const ParamVisitor<T>& f) {
    f(weight_);
    f(bias_);
    if (norm_relu_) {
      f(gamma_);
      f(beta_);
    }
  }
  void visit_buffers(const BufferVisitor<T>& f) {
    if (!norm_relu_) return;
    f(name_ + ".bn.running_mean", stats_.running_mean);
    f(name_ + ".bn.running_var", stats_.running_var);
  }

 private:
  Var<T> finish(Tape<T>& tape, Var<T> h, bool training) {
    if (!norm_relu_) return h;
    h = ad::batchnorm(h, tape.parameter(gamma_), tape.parameter(beta_), stats_, training);
    return ad::relu(h);
  }

  Parameter<T> weight_;
  Parameter<T> bias_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  BatchNormStats<T> stats_;
  bool norm_relu_ = false;
  std::string name_;
};

// Stack of dense layers; `widths` lists every output width in order.
// Hidden layers use batch-norm + ReLU; the last layer does too unless
// `linear_output` is set.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, Eigen::Index in, const std::vector<Eigen::Index>& widths, bool linear_output,
      Rng& rng) {
    Eigen::Index prev = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      bool last = i + 1 == widths.size();
      layers_.emplace_back(name + "." + std::to_string(i), prev, widths[i], !(last && linear_output), rng);
      prev = widths[i];
    }
  }

  bool empty() const { return layers_.empty(); }
  std::size_t depth() const { return layers_.size(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }
  Eigen::Index in_dim() const { return layers_.front().in_dim(); }

  Var<T> forward(Tape<T>& tape, Var<T> x, bool training) {
    for (auto& l : layers_) x = l.forward(tape, x, training);
    return x;
  }
  Var<T> forward_sparse(Tape<T>& tape, std::vector<std::span<const std::uint32_t>> rows, bool training) {
    Var<T> x = layers_.front().forward_sparse(tape, std::move(rows), training);
    for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i].forward(tape, x, training);
    return x;
  }

  void visit(const ParamVisitor<T>& f) {
    for (auto& l : layers_) l.visit(f);
  }
  void visit_buffers(const BufferVisitor<T>& f) {
    for (auto& l : layers_) l.visit_buffers(f);
  }

 private:
  std::vector<DenseLayer<T>> layers_;
};

}  // namespace nq::nn
