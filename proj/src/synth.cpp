#include "nq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nq/rng.hpp"

namespace nq {

namespace {

// Visits the indices in [begin, end) kept by independent Bernoulli(p) trials,
// skipping geometrically between hits.
template <typename F>
void bernoulli_run(std::size_t begin, std::size_t end, double p, Rng& rng, F&& on_hit) {
  if (p <= 0.0 || begin >= end) return;
  if (p >= 1.0) {
    for (std::size_t i = begin; i < end; ++i) on_hit(i);
    return;
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double log_q = std::log1p(-p);
  std::size_t i = begin;
  while (true) {
    const double u = 1.0 - uni(rng);  // (0, 1]
    const double skip = std::floor(std::log(u) / log_q);
    if (skip >= static_cast<double>(end - i)) return;
    i += static_cast<std::size_t>(skip);
    on_hit(i);
    ++i;
    if (i >= end) return;
  }
}

}  // namespace

Graph make_sbm(const SbmSpec& spec) {
  if (spec.nodes == 0 || spec.communities == 0 || spec.communities > spec.nodes) {
    throw std::invalid_argument("sbm: need 1 <= communities <= nodes");
  }
  if (spec.attr_dim < spec.communities) throw std::invalid_argument("sbm: attr_dim must cover every community");
  for (double p : {spec.p_in, spec.p_out, spec.attr_on, spec.attr_noise}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sbm: probabilities must lie in [0, 1]");
  }
  Rng rng = make_rng(spec.seed, kStreamSynth);
  const std::size_t n = spec.nodes;
  const std::size_t c = spec.communities;

  // Slot s belongs to community s*c/n; node perm[s] occupies slot s.
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> block_start(c + 1);
  for (std::size_t b = 0; b <= c; ++b) block_start[b] = b * n / c;
  std::vector<std::size_t> community(n);
  for (std::size_t b = 0; b < c; ++b) {
    for (std::size_t s = block_start[b]; s < block_start[b + 1]; ++s) community[perm[s]] = b;
  }

  std::vector<Edge> edges;
  for (std::size_t b = 0; b < c; ++b) {
    for (std::size_t s = block_start[b]; s < block_start[b + 1]; ++s) {
      bernoulli_run(s + 1, block_start[b + 1], spec.p_in, rng, [&](std::size_t t) { edges.emplace_back(perm[s], perm[t]); });
      bernoulli_run(block_start[b + 1], n, spec.p_out, rng, [&](std::size_t t) { edges.emplace_back(perm[s], perm[t]); });
    }
  }
  Graph g(n, edges);

  std::vector<std::vector<std::uint32_t>> attrs(n);
  for (NodeId v = 0; v < n; ++v) {
    const std::size_t lo = community[v] * spec.attr_dim / c;
    const std::size_t hi = (community[v] + 1) * spec.attr_dim / c;
    auto& row = attrs[v];
    bernoulli_run(0, lo, spec.attr_noise, rng, [&](std::size_t d) { row.push_back(static_cast<std::uint32_t>(d)); });
    bernoulli_run(lo, hi, spec.attr_on, rng, [&](std::size_t d) { row.push_back(static_cast<std::uint32_t>(d)); });
    bernoulli_run(hi, spec.attr_dim, spec.attr_noise, rng, [&](std::size_t d) { row.push_back(static_cast<std::uint32_t>(d)); });
  }
  g.set_attributes(SparseBinaryMatrix(spec.attr_dim, std::move(attrs)));

  std::vector<std::vector<LabelId>> labels(n);
  for (NodeId v = 0; v < n; ++v) labels[v] = {static_cast<LabelId>(community[v])};
  g.set_labels(c, std::move(labels));
  return g;
}

}  // namespace nq
