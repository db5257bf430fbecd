#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nq/graph.hpp"
#include "nq/path_matrix.hpp"
#include "nq/rng.hpp"

namespace nq {

struct Triplet {
  NodeId anchor = 0;
  NodeId positive = 0;
  NodeId negative = 0;
  Hop delta_ap = 0;
  Hop delta_an = 0;
};

// Draws (anchor, positive, negative) with delta_ap < delta_an, both finite.
// Anchor uniform over qualifying nodes; then a uniformly chosen pair of
// distinct non-empty hop rings (the nearer one supplies the positive), then
// uniform nodes within each ring. Unreachable nodes are never drawn.
class TripletSampler {
 public:
  // Throws DegenerateGraphError when no node has two non-empty rings.
  explicit TripletSampler(const PathMatrix& pm);

  Triplet sample(Rng& rng) const;
  // Uses `anchor` when it qualifies, otherwise resamples a different one.
  Triplet sample_for(NodeId anchor, Rng& rng) const;

  bool qualifies(NodeId anchor) const { return ring_count_[anchor] >= 2; }
  std::size_t qualifying_anchors() const { return anchors_.size(); }

 private:
  Triplet draw(NodeId anchor, Rng& rng) const;

  const PathMatrix* pm_;
  std::vector<std::uint8_t> ring_count_;
  std::vector<NodeId> anchors_;
};

struct LabelPair {
  NodeId i = 0;
  NodeId j = 0;
  bool same_label = false;
};

// Semi-supervision source: a fixed seeded subset of round(T*N) labelled
// nodes chosen once; pairs are drawn uniformly from it. same_label holds
// when the two label sets intersect.
class LabelPairSampler {
 public:
  // Throws DegenerateGraphError when fewer than two labelled nodes end up
  // in the subset.
  LabelPairSampler(const Graph& g, double fraction_t, Rng& subset_rng);

  std::vector<LabelPair> sample(std::size_t count, Rng& rng) const;
  const std::vector<NodeId>& subset() const { return subset_; }

 private:
  const Graph* g_;
  std::vector<NodeId> subset_;
};

bool labels_intersect(const Graph& g, NodeId a, NodeId b);

}  // namespace nq
