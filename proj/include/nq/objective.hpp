#pragma once

#include <optional>
#include <vector>

#include "nq/embed_model.hpp"
#include "nq/model.hpp"
#include "nq/quantiser.hpp"
#include "nq/sampling.hpp"

namespace nq {

// One optimisation step's worth of data. Triplet and pair ids are row
// indices into `nodes`.
struct Batch {
  std::vector<NodeId> nodes;
  std::vector<Triplet> triplets;
  std::vector<LabelPair> pairs;
  ad::Matrix<double> gumbel;  // nodes.size() x M*K; empty means no noise
};

struct ObjectiveWeights {
  double alpha = 0.05;
  double beta = 0.5;
  double tau = 1.0;
  bool rank_loss = true;
  MarginConfig margin;
};

struct LossBreakdown {
  double adaptive = 0;  // l_a
  double rank = 0;      // l_r
  double semantic = 0;  // l_c
  double quant = 0;     // l_q
  double total = 0;
};

template <typename T>
struct ObjectiveTerms {
  ad::Var<T> total;
  LossBreakdown values;
};

// l = l_a + l_r + alpha*l_c + beta*l_q on one batch, recorded on `tape`.
// `partial` receives each component as soon as it is computed, so a caller
// can report what was known when a non-finite value aborted the pass.
template <typename T>
ObjectiveTerms<T> joint_objective(ad::Tape<T>& tape, Model<T>& model, const SparseBinaryMatrix& x, const Batch& batch,
                                  const ObjectiveWeights& w, LossBreakdown* partial = nullptr) {
  LossBreakdown scratch;
  LossBreakdown& out = partial ? *partial : scratch;
  const auto k = model.shape().book_size;

  auto z = model.encoder().forward(tape, x, batch.nodes, /*training=*/true);

  auto l_a = adaptive_margin_loss(z, std::span<const Triplet>(batch.triplets), w.margin);
  out.adaptive = l_a.value()(0, 0);
  ad::Var<T> total = l_a;

  if (!batch.pairs.empty()) {
    auto l_c = semantic_margin_loss(z, std::span<const LabelPair>(batch.pairs), w.margin.semantic_margin);
    out.semantic = l_c.value()(0, 0);
    total = ad::add(total, ad::scale(l_c, static_cast<T>(w.alpha)));
  }

  auto logits = model.quant_encoder().forward(tape, z, model.codebooks(), /*training=*/true);
  std::optional<ad::Matrix<T>> noise;
  if (batch.gumbel.size() > 0) noise = batch.gumbel.template cast<T>();
  auto u = gumbel_softmax(logits, k, static_cast<T>(w.tau), noise ? &*noise : nullptr);
  auto mix = codeword_mix(tape, u, model.codebooks());
  auto recon = model.decoder().forward(tape, mix, /*training=*/true);
  auto l_q = quantisation_loss(z, recon);
  out.quant = l_q.value()(0, 0);
  total = ad::add(total, ad::scale(l_q, static_cast<T>(w.beta)));

  if (w.rank_loss) {
    auto codes = hard_assign(u.value(), k);
    std::vector<std::size_t> anchors, pos, neg;
    for (const auto& t : batch.triplets) {
      anchors.push_back(t.anchor);
      pos.push_back(t.positive);
      neg.push_back(t.negative);
    }
    auto q_pos = one_hot<T>(codes, pos, k);
    auto q_neg = one_hot<T>(codes, neg, k);
    auto l_r = rank_loss(ad::gather_rows(u, std::move(anchors)), q_pos, q_neg);
    out.rank = l_r.value()(0, 0);
    total = ad::add(total, l_r);
  }
  out.total = total.value()(0, 0);
  return {total, out};
}

}  // namespace nq
