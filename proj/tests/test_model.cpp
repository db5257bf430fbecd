#include "doctest.h"
#include "nq/embed_model.hpp"
#include "nq/model.hpp"
#include "nq/objective.hpp"
#include "nq/quantiser.hpp"
#include "support.hpp"

using namespace nq;
using nqtest::Mat;
using nqtest::TapeD;

namespace {

double adaptive(const Mat& z, std::vector<Triplet> t, MarginConfig cfg = {}) {
  TapeD tape;
  return adaptive_margin_loss(tape.constant(z), std::span<const Triplet>(t), cfg).value()(0, 0);
}

ModelShape tiny_shape() {
  ModelShape s;
  s.input_dim = 6;
  s.encoder_widths = {5, 4};
  s.quant_hidden = {4};
  s.books = 4;
  s.book_size = 4;
  return s;
}

SparseBinaryMatrix tiny_features() {
  return SparseBinaryMatrix(6, {{0, 1}, {2}, {3, 4, 5}, {0, 5}, {1, 2, 3}, {4}});
}

Batch tiny_batch(Rng& rng, Eigen::Index mk) {
  Batch b;
  b.nodes = {0, 1, 2, 3, 4, 5};
  b.triplets = {{0, 1, 2, 1, 3}, {3, 4, 5, 1, 2}, {2, 0, 4, 2, 4}};
  b.pairs = {{0, 1, true}, {2, 3, false}, {4, 5, false}};
  b.gumbel = gumbel_noise<double>(6, mk, rng);
  return b;
}

}  // namespace

TEST_CASE("adaptive margin loss: hand cases") {
  Mat z(3, 2);
  z << 0, 0, 0, 0, 2, 0;
  CHECK(adaptive(z, {{0, 1, 2, 1, 3}}) == doctest::Approx(0.0));
  CHECK(adaptive(Mat::Zero(3, 2), {{0, 1, 2, 1, 3}}) == doctest::Approx(2.0));
  Mat far(3, 2);
  far << 0, 0, 1, 0, 10, 0;
  CHECK(adaptive(far, {{0, 1, 2, 1, 3}}) == 0.0);
  MarginConfig fixed;
  fixed.mode = MarginMode::kFixed;
  fixed.fixed_value = 5;
  CHECK(adaptive(Mat::Zero(3, 2), {{0, 1, 2, 1, 3}}, fixed) == doctest::Approx(5.0));
  TapeD t;
  CHECK_THROWS(adaptive_margin_loss(t.constant(z), std::span<const Triplet>(), MarginConfig{}));
}

TEST_CASE("semantic margin loss: hand cases") {
  auto loss = [](const Mat& z, LabelPair p, double mc) {
    TapeD t;
    std::vector<LabelPair> pairs{p};
    return semantic_margin_loss(t.constant(z), std::span<const LabelPair>(pairs), mc).value()(0, 0);
  };
  CHECK(loss(Mat::Ones(2, 2), {0, 1, true}, 100) < 1e-9);
  Mat z(2, 2);
  z << 0, 0, 60, 80;
  CHECK(loss(z, {0, 1, false}, 100) == doctest::Approx(0.0));
  z << 0, 0, 3, 4;
  CHECK(loss(z, {0, 1, true}, 100) == doctest::Approx(25.0));
}

TEST_CASE("encoder: eval mode is deterministic and finite") {
  Rng rng(3);
  Encoder<float> enc(6, {8, 4}, rng);
  SparseBinaryMatrix x(6, {{}, {1, 2}, {1, 2}});
  std::vector<NodeId> nodes{0, 1, 2};
  ad::Tape<float> t;
  auto z = enc.forward(t, x, nodes, false);
  CHECK(z.value().allFinite());
  CHECK(z.value().row(1) == z.value().row(2));
  SparseBinaryMatrix wrong(7, {{}});
  std::vector<NodeId> one{0};
  CHECK_THROWS_AS(enc.forward(t, wrong, one, false), DimensionError);
}

TEST_CASE("default model embeds to width 128") {
  ModelShape s;
  s.input_dim = 20;
  Model<float> model(s, 1);
  SparseBinaryMatrix x(20, {{0, 3}, {5}, {}});
  CHECK(model.embed_all(x).cols() == 128);
  CHECK(model.embed_all(x).rows() == 3);
}

TEST_CASE("gumbel softmax and hard assignment") {
  Rng rng(9);
  ad::Tape<double> t;
  Mat logits = nqtest::random_matrix(5, 12, rng, 3.0);
  auto noise = gumbel_noise<double>(5, 12, rng);
  auto u = gumbel_softmax(t.constant(logits), 4, 0.5, &noise).value();
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    for (int j = 0; j < 3; ++j) CHECK(u.row(r).segment(j * 4, 4).sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
  auto uniform = gumbel_softmax(t.constant(Mat::Constant(1, 4, 0.7)), 4, 1.0, nullptr).value();
  for (int c = 0; c < 4; ++c) CHECK(uniform(0, c) == doctest::Approx(0.25));

  // Annealing: the largest entry tends to one as tau shrinks.
  Mat one(1, 4);
  one << 0.3, 0.1, -0.2, 0.25;
  Mat g = gumbel_noise<double>(1, 4, rng);
  double prev = 0;
  for (double tau : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    double mx = gumbel_softmax(t.constant(one), 4, tau, &g).value().maxCoeff();
    CHECK(mx >= prev - 1e-12);
    prev = mx;
  }
  CHECK(prev >= 0.999);

  Mat row(1, 3);
  row << 0.1, 0.7, 0.2;
  CHECK(hard_assign(row, 3).index[0] == 1);
  Mat tie(1, 2);
  tie << 0.5, 0.5;
  CHECK(hard_assign(tie, 2).index[0] == 0);

  auto soft = gumbel_softmax(t.constant(logits), 4, 1.0, nullptr).value();
  CHECK(hard_assign(soft, 4).index == hard_assign(logits, 4).index);
  CHECK_THROWS(gumbel_softmax(t.constant(logits), 4, 0.0, nullptr));
}

TEST_CASE("reconstruction: soft and hard paths") {
  Rng rng(2);
  Codebooks<double> cb(4, 4, 3, rng);
  HardCodes q;
  q.rows = 1;
  q.books = 4;
  q.index = {2, 2, 1, 3};
  std::vector<std::size_t> rows{0};
  Mat u = one_hot<double>(q, rows, 4);
  ad::Tape<double> t;
  Mat soft = codeword_mix(t, t.constant(u), cb).value();
  Mat expected = cb.codeword(0, 2) + cb.codeword(1, 2) + cb.codeword(2, 1) + cb.codeword(3, 3);
  CHECK((soft - expected).norm() < 1e-12);
  CHECK((codeword_sum(q, cb) - soft).norm() < 1e-12);

  Codebooks<double> zero(4, 4, Mat::Zero(16, 3));
  Mat uni = Mat::Constant(1, 16, 0.25);
  CHECK(codeword_mix(t, t.constant(uni), zero).value().norm() == 0.0);

  q.index = {4, 0, 0, 0};
  CHECK_THROWS_AS(codeword_sum(q, cb), BoundsError);
}

TEST_CASE("quantisation loss") {
  ad::Tape<double> t;
  Mat z = Mat::Zero(1, 3);
  Mat r(1, 3);
  r << 0, 2, 0;
  CHECK(quantisation_loss(t.constant(z), t.constant(r)).value()(0, 0) == doctest::Approx(4.0));
  CHECK(quantisation_loss(t.constant(r), t.constant(r)).value()(0, 0) == 0.0);
}

TEST_CASE("rank loss: degenerate and separated triplets") {
  HardCodes q;
  q.rows = 3;
  q.books = 8;
  for (int i = 0; i < 8; ++i) q.index.push_back(1);
  for (int i = 0; i < 8; ++i) q.index.push_back(1);
  for (int i = 0; i < 8; ++i) q.index.push_back(2);
  std::vector<std::size_t> a{0}, same{1}, other{2};
  Mat u = one_hot<double>(q, a, 4);
  Mat qa = one_hot<double>(q, same, 4);
  Mat qb = one_hot<double>(q, other, 4);
  ad::Tape<double> t;
  CHECK(rank_loss(t.constant(u), qa, qa).value()(0, 0) == doctest::Approx(1.0));
  CHECK(rank_loss(t.constant(u), qa, qb).value()(0, 0) == 0.0);
  // Bound for row-stochastic u.
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto soft = gumbel_softmax(t.constant(nqtest::random_matrix(1, 32, rng, 2.0)), 4, 1.0, nullptr);
    double v = rank_loss(soft, qa, qb).value()(0, 0);
    CHECK(v >= 0.0);
    CHECK(v <= 9.0);
  }
}

TEST_CASE("joint objective: parameter gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Model<double> model(tiny_shape(), seed);
    auto x = tiny_features();
    Rng rng(seed);
    auto batch = tiny_batch(rng, 16);
    ObjectiveWeights w;
    w.alpha = 0.3;
    w.beta = 0.7;

    auto evaluate = [&]() {
      ad::Tape<double> tape;
      return joint_objective(tape, model, x, batch, w).total.value()(0, 0);
    };
    model.zero_grad();
    {
      ad::Tape<double> tape;
      auto terms = joint_objective(tape, model, x, batch, w);
      const auto& v = terms.values;
      CHECK(v.total == doctest::Approx(v.adaptive + v.rank + w.alpha * v.semantic + w.beta * v.quant).epsilon(1e-12));
      tape.backward(terms.total);
    }
    const double h = 1e-5;
    model.visit([&](ad::Parameter<double>& p) {
      Mat fd(p.value.rows(), p.value.cols());
      for (Eigen::Index e = 0; e < p.value.size(); ++e) {
        const double keep = p.value.data()[e];
        p.value.data()[e] = keep + h;
        const double up = evaluate();
        p.value.data()[e] = keep - h;
        const double down = evaluate();
        p.value.data()[e] = keep;
        fd.data()[e] = (up - down) / (2 * h);
      }
      INFO(p.name << " seed " << seed);
      CHECK(nqtest::rel_error(p.grad, fd) <= 1e-4);
    });
  }
}
