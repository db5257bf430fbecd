#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nq {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LRConfig {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::size_t max_iterations = 2000;
  double tolerance = 1e-5;  // stop once the gradient norm falls below
  bool standardise = true;
  std::uint64_t seed = 0;
};

// One-vs-rest logistic regression trained by full-batch gradient descent
// with L2 regularisation on the weights. Weights start at zero, so the fit
// is a pure function of the data.
class LRClassifier {
 public:
  // Throws std::invalid_argument on NaN features, zero feature dimension,
  // label/row mismatch or fewer than two classes.
  static LRClassifier fit(const FeatureMatrix& x, std::span<const int> labels, std::size_t num_classes,
                          const LRConfig& cfg = {});

  FeatureMatrix scores(const FeatureMatrix& x) const;
  std::vector<int> predict(const FeatureMatrix& x) const;

  const FeatureMatrix& weights() const { return w_; }
  const Eigen::VectorXd& bias() const { return b_; }
  std::size_t iterations() const { return iterations_; }

 private:
  FeatureMatrix prepare(const FeatureMatrix& x) const;

  FeatureMatrix w_;  // dims x classes
  Eigen::VectorXd b_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
  std::size_t iterations_ = 0;
};

}  // namespace nq
