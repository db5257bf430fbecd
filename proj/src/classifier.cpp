#include "nq/classifier.hpp"

#include <cmath>
#include <stdexcept>

namespace nq {

FeatureMatrix LRClassifier::prepare(const FeatureMatrix& x) const {
  if (x.cols() != w_.rows()) throw std::invalid_argument("classifier: feature dimension mismatch");
  return (x.rowwise() - mean_).array().rowwise() * scale_.array();
}

LRClassifier LRClassifier::fit(const FeatureMatrix& x, std::span<const int> labels, std::size_t num_classes,
                               const LRConfig& cfg) {
  if (x.cols() == 0) throw std::invalid_argument("classifier: zero-dimensional features");
  if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw std::invalid_argument("classifier: label count does not match rows");
  }
  if (!x.allFinite()) throw std::invalid_argument("classifier: non-finite feature value");
  if (num_classes < 2) throw std::invalid_argument("classifier: need at least two classes");

  LRClassifier m;
  const auto n = x.rows();
  const auto d = x.cols();
  const auto c = static_cast<Eigen::Index>(num_classes);
  m.mean_ = Eigen::RowVectorXd::Zero(d);
  m.scale_ = Eigen::RowVectorXd::Ones(d);
  if (cfg.standardise) {
    m.mean_ = x.colwise().mean();
    Eigen::RowVectorXd sd = ((x.rowwise() - m.mean_).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index j = 0; j < d; ++j) m.scale_(j) = sd(j) > 1e-12 ? 1.0 / sd(j) : 1.0;
  }
  m.w_ = FeatureMatrix::Zero(d, c);
  m.b_ = Eigen::VectorXd::Zero(c);
  const FeatureMatrix xs = (x.rowwise() - m.mean_).array().rowwise() * m.scale_.array();

  FeatureMatrix y = FeatureMatrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= c) throw std::invalid_argument("classifier: label out of range");
    y(i, l) = 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    FeatureMatrix z = (xs * m.w_).rowwise() + m.b_.transpose();
    FeatureMatrix p = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    FeatureMatrix r = (p - y) * inv_n;
    FeatureMatrix gw = xs.transpose() * r + cfg.l2 * m.w_;
    Eigen::VectorXd gb = r.colwise().sum().transpose();
    m.iterations_ = it + 1;
    const double norm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
    if (norm < cfg.tolerance) break;
    m.w_ -= cfg.learning_rate * gw;
    m.b_ -= cfg.learning_rate * gb;
  }
  return m;
}

FeatureMatrix LRClassifier::scores(const FeatureMatrix& x) const {
  if (!x.allFinite()) throw std::invalid_argument("classifier: non-finite feature value");
  return (prepare(x) * w_).rowwise() + b_.transpose();
}

std::vector<int> LRClassifier::predict(const FeatureMatrix& x) const {
  const FeatureMatrix s = scores(x);
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < s.cols(); ++k) {
      if (s(i, k) > s(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace nq
