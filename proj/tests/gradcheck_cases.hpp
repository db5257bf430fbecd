#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nq/embed_model.hpp"
#include "nq/quantiser.hpp"
#include "support.hpp"

namespace nqtest {

struct GradCase {
  std::string name;
  double error = 0;
};

namespace detail {

// sum(out .* W) with a fixed random W, so every output entry carries a
// distinct weight.
inline VarD project(const VarD& out, const Mat& w) { return nq::ad::sum(nq::ad::mul(out, out.tape()->constant(w))); }

inline double min_abs(const Mat& m) { return m.cwiseAbs().minCoeff(); }

}  // namespace detail

// Finite-difference checks of every operator and loss for one seed.
inline std::vector<GradCase> gradient_suite(std::uint64_t seed) {
  namespace ad = nq::ad;
  using detail::project;
  std::mt19937_64 rng(seed);
  std::vector<GradCase> out;
  auto run = [&](const std::string& name, const Builder& f, const std::vector<Mat>& xs) {
    out.push_back({name, grad_check(f, xs).max_rel_error});
  };
  auto rnd = [&](Eigen::Index r, Eigen::Index c) { return random_matrix(r, c, rng); };

  const Mat w34 = rnd(3, 4);
  run("add", [&](TapeD&, const auto& v) { return project(ad::add(v[0], v[1]), w34); }, {rnd(3, 4), rnd(3, 4)});
  run("sub", [&](TapeD&, const auto& v) { return project(ad::sub(v[0], v[1]), w34); }, {rnd(3, 4), rnd(3, 4)});
  run("mul", [&](TapeD&, const auto& v) { return project(ad::mul(v[0], v[1]), w34); }, {rnd(3, 4), rnd(3, 4)});
  run("scale", [&](TapeD&, const auto& v) { return project(ad::scale(v[0], -1.7), w34); }, {rnd(3, 4)});
  run("add_scalar", [&](TapeD&, const auto& v) { return project(ad::square(ad::add_scalar(v[0], 0.3)), w34); },
      {rnd(3, 4)});
  run("square", [&](TapeD&, const auto& v) { return project(ad::square(v[0]), w34); }, {rnd(3, 4)});
  run("add_row", [&](TapeD&, const auto& v) { return project(ad::add_row(v[0], v[1]), w34); }, {rnd(3, 4), rnd(1, 4)});

  const Mat w32 = rnd(3, 2);
  run("matmul", [&](TapeD&, const auto& v) { return project(ad::matmul(v[0], v[1]), w32); }, {rnd(3, 4), rnd(4, 2)});
  const Mat w35 = rnd(3, 5);
  run("matmul_bt", [&](TapeD&, const auto& v) { return project(ad::matmul_bt(v[0], v[1]), w35); },
      {rnd(3, 4), rnd(5, 4)});
  const Mat w43 = rnd(4, 3);
  run("transpose", [&](TapeD&, const auto& v) { return project(ad::transpose(v[0]), w43); }, {rnd(3, 4)});
  run("dense", [&](TapeD&, const auto& v) { return project(ad::dense(v[0], v[1], v[2]), w32); },
      {rnd(3, 4), rnd(4, 2), rnd(1, 2)});

  const std::vector<std::vector<std::uint32_t>> sparse{{0, 2}, {}, {1, 2, 3}};
  run("sparse_dense",
      [&](TapeD&, const auto& v) {
        std::vector<std::span<const std::uint32_t>> rows(sparse.begin(), sparse.end());
        return project(ad::sparse_dense(std::move(rows), v[0], v[1]), w32);
      },
      {rnd(4, 2), rnd(1, 2)});

  run("relu", [&](TapeD&, const auto& v) { return project(ad::relu(v[0]), w34); }, {away_from_zero(rnd(3, 4))});
  const Mat w54 = rnd(5, 4);
  run("gather_rows", [&](TapeD&, const auto& v) { return project(ad::gather_rows(v[0], {2, 0, 2, 1, 2}), w54); },
      {rnd(3, 4)});

  const Mat w64 = rnd(6, 4);
  run("batchnorm_train",
      [&](TapeD&, const auto& v) {
        ad::BatchNormStats<double> stats(4);
        return project(ad::batchnorm(v[0], v[1], v[2], stats, true), w64);
      },
      {rnd(6, 4), rnd(1, 4), rnd(1, 4)});
  ad::BatchNormStats<double> frozen(4);
  frozen.running_mean = rnd(1, 4);
  frozen.running_var = rnd(1, 4).cwiseAbs().array() + 0.5;
  run("batchnorm_eval",
      [&](TapeD&, const auto& v) {
        auto stats = frozen;
        return project(ad::batchnorm(v[0], v[1], v[2], stats, false), w64);
      },
      {rnd(6, 4), rnd(1, 4), rnd(1, 4)});

  const Mat w36 = rnd(3, 6);
  run("softmax_blocks", [&](TapeD&, const auto& v) { return project(ad::softmax_blocks(v[0], 3), w36); },
      {rnd(3, 6)});
  run("softmax_rows", [&](TapeD&, const auto& v) { return project(ad::softmax_rows(v[0]), w34); }, {rnd(3, 4)});
  const Mat w31 = rnd(3, 1);
  run("l2_distance_rows", [&](TapeD&, const auto& v) { return project(ad::l2_distance_rows(v[0], v[1]), w31); },
      {rnd(3, 4), rnd(3, 4)});
  run("inner_product_rows",
      [&](TapeD&, const auto& v) { return project(ad::inner_product_rows(v[0], v[1]), w31); },
      {rnd(3, 4), rnd(3, 4)});
  run("row_squared_norms", [&](TapeD&, const auto& v) { return project(ad::row_squared_norms(v[0]), w31); },
      {rnd(3, 4)});
  run("sum", [&](TapeD&, const auto& v) { return ad::sum(ad::square(v[0])); }, {rnd(3, 4)});
  run("mean", [&](TapeD&, const auto& v) { return ad::mean(ad::square(v[0])); }, {rnd(3, 4)});

  const Mat noise = nq::gumbel_noise<double>(3, 8, rng);
  const Mat w38 = rnd(3, 8);
  run("gumbel_softmax",
      [&](TapeD&, const auto& v) { return project(nq::gumbel_softmax(v[0], 4, 0.7, &noise), w38); }, {rnd(3, 8)});

  // Adaptive margin loss on a 6-row z; hinge arguments kept clear of zero.
  {
    std::vector<nq::Triplet> trip{{0, 1, 2, 1, 3}, {3, 4, 5, 1, 2}, {2, 0, 4, 2, 4}, {5, 3, 1, 1, 2}};
    nq::MarginConfig adaptive;
    nq::MarginConfig fixed;
    fixed.mode = nq::MarginMode::kFixed;
    fixed.fixed_value = 1.5;
    auto hinge_args = [&](const Mat& z, const nq::MarginConfig& cfg) {
      Mat a(static_cast<Eigen::Index>(trip.size()), 1);
      for (std::size_t k = 0; k < trip.size(); ++k) {
        const auto& t = trip[k];
        const double m = cfg.mode == nq::MarginMode::kAdaptive ? double(t.delta_an) - double(t.delta_ap) : cfg.fixed_value;
        a(k, 0) = (z.row(t.anchor) - z.row(t.positive)).norm() - (z.row(t.anchor) - z.row(t.negative)).norm() + m;
      }
      return a;
    };
    for (const auto* cfg : {&adaptive, &fixed}) {
      Mat z = rnd(6, 3);
      while (detail::min_abs(hinge_args(z, *cfg)) < 0.05) z = rnd(6, 3);
      run(cfg == &adaptive ? "loss_adaptive_margin" : "loss_fixed_margin",
          [&](TapeD&, const auto& v) { return nq::adaptive_margin_loss(v[0], std::span<const nq::Triplet>(trip), *cfg); },
          {z});
    }
  }

  {
    std::vector<nq::LabelPair> pairs{{0, 1, true}, {2, 3, false}, {1, 4, false}, {4, 0, true}};
    run("loss_semantic",
        [&](TapeD&, const auto& v) {
          return nq::semantic_margin_loss(v[0], std::span<const nq::LabelPair>(pairs), 3.0);
        },
        {rnd(5, 3)});
  }

  run("loss_quantisation", [&](TapeD&, const auto& v) { return nq::quantisation_loss(v[0], v[1]); },
      {rnd(4, 3), rnd(4, 3)});

  // Rank loss on soft rows of M=2 books, K=4; hinge arguments kept clear of zero.
  {
    nq::HardCodes codes;
    codes.rows = 4;
    codes.books = 2;
    codes.index = {0, 1, 2, 3, 1, 1, 3, 0};
    const std::vector<std::size_t> pos{0, 1, 2}, neg{1, 2, 3};
    const Mat qp = nq::one_hot<double>(codes, pos, 4);
    const Mat qn = nq::one_hot<double>(codes, neg, 4);
    auto soft = [](const Mat& logits) {
      TapeD t;
      return ad::softmax_blocks(t.constant(logits), 4).value();
    };
    Mat logits = rnd(3, 8);
    auto args = [&](const Mat& l) {
      Mat u = soft(l);
      return Mat(((u.cwiseProduct(qn - qp)).rowwise().sum().array() + 1.0).matrix());
    };
    while (detail::min_abs(args(logits)) < 0.05) logits = rnd(3, 8);
    run("loss_rank",
        [&](TapeD&, const auto& v) { return nq::rank_loss(ad::softmax_blocks(v[0], 4), qp, qn); }, {logits});
  }
  return out;
}

}  // namespace nqtest
