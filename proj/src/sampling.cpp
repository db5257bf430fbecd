#include "nq/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace nq {

namespace {

constexpr int kMaxAnchorAttempts = 1000;

std::uint8_t count_rings(std::span<const Hop> row, unsigned max_hop) {
  std::array<bool, 256> seen{};
  std::uint8_t rings = 0;
  for (Hop h : row) {
    if (h == 0 || h == kUnreachable || h > max_hop) continue;
    if (!seen[h]) {
      seen[h] = true;
      ++rings;
    }
  }
  return rings;
}

}  // namespace

TripletSampler::TripletSampler(const PathMatrix& pm) : pm_(&pm) {
  ring_count_.assign(pm.size(), 0);
  if (pm.is_dense()) {
    for (NodeId a = 0; a < pm.size(); ++a) {
      ring_count_[a] = count_rings(pm.row(a), pm.max_hop());
      if (ring_count_[a] >= 2) anchors_.push_back(a);
    }
  } else {
    // Lazy storage: qualification is checked per draw.
    std::fill(ring_count_.begin(), ring_count_.end(), 2);
    anchors_.resize(pm.size());
    for (NodeId a = 0; a < pm.size(); ++a) anchors_[a] = a;
  }
  if (anchors_.empty()) {
    throw DegenerateGraphError("degenerate graph: no anchor has two distinct finite hop rings");
  }
}

Triplet TripletSampler::sample(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, anchors_.size() - 1);
  return sample_for(anchors_[pick(rng)], rng);
}

Triplet TripletSampler::sample_for(NodeId anchor, Rng& rng) const {
  if (anchor >= ring_count_.size()) throw BoundsError("anchor out of range");
  std::uniform_int_distribution<std::size_t> pick(0, anchors_.size() - 1);
  for (int attempt = 0; attempt < kMaxAnchorAttempts; ++attempt) {
    if (ring_count_[anchor] >= 2) {
      if (pm_->is_dense() || count_rings(pm_->row(anchor), pm_->max_hop()) >= 2) {
        return draw(anchor, rng);
      }
    }
    anchor = anchors_[pick(rng)];
  }
  throw DegenerateGraphError("degenerate graph: no qualifying anchor found after " +
                             std::to_string(kMaxAnchorAttempts) + " attempts");
}

Triplet TripletSampler::draw(NodeId anchor, Rng& rng) const {
  auto holder = pm_->row_shared(anchor);
  std::span<const Hop> row = *holder;
  const unsigned h_max = pm_->max_hop();

  std::array<std::size_t, 256> ring_size{};
  for (Hop h : row) {
    if (h != 0 && h != kUnreachable && h <= h_max) ++ring_size[h];
  }
  std::vector<Hop> rings;
  for (unsigned h = 1; h <= h_max; ++h) {
    if (ring_size[h] > 0) rings.push_back(static_cast<Hop>(h));
  }

  // Uniform unordered pair of distinct rings.
  std::uniform_int_distribution<std::size_t> first(0, rings.size() - 1);
  std::uniform_int_distribution<std::size_t> second(0, rings.size() - 2);
  std::size_t x = first(rng);
  std::size_t y = second(rng);
  if (y >= x) ++y;
  Hop near = rings[std::min(x, y)];
  Hop far = rings[std::max(x, y)];

  auto nth_in_ring = [&](Hop ring) {
    std::uniform_int_distribution<std::size_t> within(0, ring_size[ring] - 1);
    std::size_t k = within(rng);
    for (NodeId v = 0; v < row.size(); ++v) {
      if (row[v] == ring && k-- == 0) return v;
    }
    return NodeId{0};  // unreachable
  };
  Triplet t;
  t.anchor = anchor;
  t.positive = nth_in_ring(near);
  t.negative = nth_in_ring(far);
  t.delta_ap = near;
  t.delta_an = far;
  return t;
}

bool labels_intersect(const Graph& g, NodeId a, NodeId b) {
  auto la = g.labels(a);
  auto lb = g.labels(b);
  std::size_t i = 0, j = 0;
  while (i < la.size() && j < lb.size()) {
    if (la[i] == lb[j]) return true;
    if (la[i] < lb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

LabelPairSampler::LabelPairSampler(const Graph& g, double fraction_t, Rng& subset_rng) : g_(&g) {
  if (!(fraction_t > 0.0 && fraction_t <= 1.0)) {
    throw std::invalid_argument("fraction_T must lie in (0, 1]");
  }
  std::vector<NodeId> labelled;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (!g.labels(v).empty()) labelled.push_back(v);
  }
  auto target = static_cast<std::size_t>(std::llround(fraction_t * g.num_nodes()));
  target = std::min(target, labelled.size());
  std::shuffle(labelled.begin(), labelled.end(), subset_rng);
  labelled.resize(target);
  std::sort(labelled.begin(), labelled.end());
  subset_ = std::move(labelled);
  if (subset_.size() < 2) {
    throw DegenerateGraphError("semi-supervision needs at least two labelled nodes, got " +
                               std::to_string(subset_.size()));
  }
}

std::vector<LabelPair> LabelPairSampler::sample(std::size_t count, Rng& rng) const {
  std::vector<LabelPair> out;
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> first(0, subset_.size() - 1);
  std::uniform_int_distribution<std::size_t> second(0, subset_.size() - 2);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t x = first(rng);
    std::size_t y = second(rng);
    if (y >= x) ++y;
    NodeId a = subset_[x];
    NodeId b = subset_[y];
    out.push_back({a, b, labels_intersect(*g_, a, b)});
  }
  return out;
}

}  // namespace nq
