#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "nq/autodiff.hpp"
#include "nq/graph.hpp"
#include "nq/nn.hpp"
#include "nq/sampling.hpp"

namespace nq {

enum class MarginMode { kAdaptive, kFixed };

struct MarginConfig {
  MarginMode mode = MarginMode::kAdaptive;
  double fixed_value = 50.0;
  double semantic_margin = 100.0;  // M_c
  double fraction_t = 0.10;

  void validate() const {
    if (mode == MarginMode::kFixed && !(fixed_value > 0)) throw std::invalid_argument("fixed margin must be > 0");
    if (!(semantic_margin > 0)) throw std::invalid_argument("semantic margin must be > 0");
    if (!(fraction_t > 0 && fraction_t <= 1)) throw std::invalid_argument("fraction_T must lie in (0, 1]");
  }
};

// Attribute encoder: dense layers with batch-norm + ReLU after each, the
// last one producing the embedding.
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(Eigen::Index input_dim, const std::vector<Eigen::Index>& widths, Rng& rng)
      : mlp_("encoder", input_dim, widths, /*linear_output=*/false, rng) {}

  Eigen::Index input_dim() const { return mlp_.in_dim(); }
  Eigen::Index output_dim() const { return mlp_.out_dim(); }

  ad::Var<T> forward(ad::Tape<T>& tape, const SparseBinaryMatrix& x, std::span<const NodeId> nodes,
                     bool training) {
    if (x.cols() != static_cast<std::size_t>(input_dim())) {
      throw DimensionError("encoder: attribute dimension " + std::to_string(x.cols()) + " != " +
                           std::to_string(input_dim()));
    }
    std::vector<std::span<const std::uint32_t>> rows;
    rows.reserve(nodes.size());
    for (NodeId v : nodes) rows.push_back(x.row(v));
    return mlp_.forward_sparse(tape, std::move(rows), training);
  }

  void visit(const nn::ParamVisitor<T>& f) { mlp_.visit(f); }
  void visit_buffers(const nn::BufferVisitor<T>& f) { mlp_.visit_buffers(f); }

 private:
  nn::Mlp<T> mlp_;
};

// Mean over triplets of max(D(a,p) - D(a,n) + margin, 0), D = Euclidean.
// Triplet node ids index rows of `z`. The margin is delta_an - delta_ap in
// adaptive mode and the configured constant in fixed mode.
template <typename T>
ad::Var<T> adaptive_margin_loss(const ad::Var<T>& z, std::span<const Triplet> triplets, const MarginConfig& cfg) {
  if (triplets.empty()) throw std::invalid_argument("adaptive_margin_loss: empty triplet list");
  std::vector<std::size_t> ia, ip, in;
  ad::Matrix<T> margin(static_cast<Eigen::Index>(triplets.size()), 1);
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    ia.push_back(t.anchor);
    ip.push_back(t.positive);
    in.push_back(t.negative);
    margin(k, 0) = cfg.mode == MarginMode::kAdaptive ? T(int(t.delta_an) - int(t.delta_ap))
                                                     : static_cast<T>(cfg.fixed_value);
  }
  ad::Tape<T>& tape = *z.tape();
  auto za = ad::gather_rows(z, std::move(ia));
  auto zp = ad::gather_rows(z, std::move(ip));
  auto zn = ad::gather_rows(z, std::move(in));
  auto gap = ad::sub(ad::l2_distance_rows(za, zp), ad::l2_distance_rows(za, zn));
  auto hinge = ad::relu(ad::add(gap, tape.constant(std::move(margin))));
  return ad::mean(hinge);
}

// Mean over pairs of (D(i,j) - S_ij)^2 with S = 0 for intersecting label
// sets and M_c otherwise. Pair ids index rows of `z`.
template <typename T>
ad::Var<T> semantic_margin_loss(const ad::Var<T>& z, std::span<const LabelPair> pairs, double semantic_margin) {
  if (pairs.empty()) throw std::invalid_argument("semantic_margin_loss: empty pair list");
  std::vector<std::size_t> ii, jj;
  ad::Matrix<T> target(static_cast<Eigen::Index>(pairs.size()), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    ii.push_back(pairs[k].i);
    jj.push_back(pairs[k].j);
    target(k, 0) = pairs[k].same_label ? T(0) : static_cast<T>(semantic_margin);
  }
  ad::Tape<T>& tape = *z.tape();
  auto d = ad::l2_distance_rows(ad::gather_rows(z, std::move(ii)), ad::gather_rows(z, std::move(jj)));
  return ad::mean(ad::square(ad::sub(d, tape.constant(std::move(target)))));
}

}  // namespace nq
