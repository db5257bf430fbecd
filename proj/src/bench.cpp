#include "nq/bench.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "nq/rng.hpp"

namespace nq {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::uint64_t fold(std::uint64_t acc, const TopK& top) {
  for (const auto& r : top.items) acc = acc * 1099511628211ull + r.node;
  return acc;
}

}  // namespace

RankingBench bench_ranking(const CodeStore& store, const LookupTables& tables, const ad::Matrix<float>& z,
                           std::span<const NodeId> queries, std::size_t k) {
  if (queries.empty()) throw std::invalid_argument("bench: need at least one query");
  if (static_cast<std::size_t>(z.rows()) != store.num_nodes()) {
    throw std::invalid_argument("bench: embedding rows do not match the code store");
  }
  RankingBench b;
  b.queries = queries.size();
  b.candidates = store.num_nodes();

  const Eigen::VectorXf norms = z.rowwise().squaredNorm();
  Eigen::VectorXf dot(z.rows());
  std::vector<float> scores(store.num_nodes());
  auto t0 = Clock::now();
  for (NodeId q : queries) {
    dot.noalias() = z * z.row(q).transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) scores[i] = 2.0f * dot(i) - norms(i) - norms(q);
    b.checksum = fold(b.checksum, top_k_from_scores(scores, q, k, {}));
  }
  b.float_ms = elapsed_ms(t0) / static_cast<double>(queries.size());

  t0 = Clock::now();
  for (NodeId q : queries) b.checksum = fold(b.checksum, recommend_top_k(store, tables, q, k));
  b.lookup_ms = elapsed_ms(t0) / static_cast<double>(queries.size());
  b.speedup = b.lookup_ms > 0 ? b.float_ms / b.lookup_ms : 0.0;
  return b;
}

CodeStore random_store(std::size_t n, std::size_t m, std::size_t k, std::size_t l, std::uint64_t seed) {
  Rng rng = make_rng(seed, kStreamSynth, 1);
  HardCodes q;
  q.rows = n;
  q.books = m;
  q.index.resize(n * m);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(k - 1));
  for (auto& v : q.index) v = pick(rng);
  std::normal_distribution<float> normal(0.0f, 1.0f / std::sqrt(static_cast<float>(l)));
  ad::Matrix<float> c(static_cast<Eigen::Index>(m * k), static_cast<Eigen::Index>(l));
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = normal(rng);
  return CodeStore(std::move(q), Codebooks<float>(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k), std::move(c)),
                   Checkpoint{});
}

ad::Matrix<float> random_embeddings(std::size_t n, std::size_t l, std::uint64_t seed) {
  Rng rng = make_rng(seed, kStreamSynth, 2);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  ad::Matrix<float> z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  return z;
}

}  // namespace nq
