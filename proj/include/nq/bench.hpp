#pragma once

#include <cstdint>
#include <span>

#include "nq/codestore.hpp"

namespace nq {

struct RankingBench {
  std::size_t queries = 0;
  std::size_t candidates = 0;
  double float_ms = 0;   // mean per-query time, float L2 ranking
  double lookup_ms = 0;  // mean per-query time, table ranking
  double speedup = 0;
  std::uint64_t checksum = 0;  // keeps the measured work observable
};

// Full ranking of every candidate for each query, selecting the top k:
// float path scores -||z_i - z_q||^2 via z*z_q and cached norms; lookup path
// sums M table entries per candidate. Throws std::invalid_argument for an
// empty query list or mismatched row counts.
RankingBench bench_ranking(const CodeStore& store, const LookupTables& tables, const ad::Matrix<float>& z,
                           std::span<const NodeId> queries, std::size_t k = 50);

// Random codes, codebooks and float embeddings of the given size.
CodeStore random_store(std::size_t n, std::size_t m, std::size_t k, std::size_t l, std::uint64_t seed);
ad::Matrix<float> random_embeddings(std::size_t n, std::size_t l, std::uint64_t seed);

}  // namespace nq
