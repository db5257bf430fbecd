#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "nq/graph.hpp"

namespace nq {

using Hop = std::uint8_t;
inline constexpr Hop kUnreachable = 255;

// Hop distances from `source`, truncated at `max_hop`; farther or
// disconnected nodes get kUnreachable.
std::vector<Hop> bfs_row(const Graph& g, NodeId source, unsigned max_hop);

// Truncated all-pairs shortest hop counts. Stored densely up to
// `dense_limit` nodes; above that, rows are recomputed by BFS on demand and
// kept in a bounded LRU cache; the graph must then outlive the matrix.
class PathMatrix {
 public:
  static constexpr std::size_t kDefaultDenseLimit = 50000;
  static constexpr std::size_t kDefaultCacheRows = 4096;

  PathMatrix(const Graph& g, unsigned max_hop, std::size_t dense_limit = kDefaultDenseLimit,
             std::size_t cache_rows = kDefaultCacheRows);
  // Dense matrix from raw row-major hops (used by the NQPM reader).
  PathMatrix(std::size_t n, unsigned max_hop, std::vector<Hop> dense);

  PathMatrix(const PathMatrix&) = delete;
  PathMatrix& operator=(const PathMatrix&) = delete;
  PathMatrix(PathMatrix&&) = default;
  PathMatrix& operator=(PathMatrix&&) = default;

  std::size_t size() const { return n_; }
  unsigned max_hop() const { return max_hop_; }
  bool is_dense() const { return !dense_.empty() || n_ == 0; }

  Hop operator()(NodeId i, NodeId j) const { return row(i)[j]; }
  // The returned span stays valid while the matrix lives (dense) or until
  // the row is evicted (lazy). Lazy callers that need stability should use
  // row_copy().
  std::span<const Hop> row(NodeId i) const;
  std::shared_ptr<const std::vector<Hop>> row_shared(NodeId i) const;

  // Row-major N*N hops; only valid for dense storage.
  std::span<const Hop> dense() const { return dense_; }

 private:
  const Graph* graph_ = nullptr;
  std::size_t n_ = 0;
  unsigned max_hop_ = 0;
  std::vector<Hop> dense_;

  struct Cache {
    std::size_t capacity = 0;
    std::list<NodeId> order;
    std::unordered_map<NodeId, std::pair<std::shared_ptr<const std::vector<Hop>>,
                                         std::list<NodeId>::iterator>>
        rows;
    std::mutex mu;
  };
  std::unique_ptr<Cache> cache_;
};

// NQPM file: 16-byte header (magic "NQPM", u16 version, u64 N, u16 H) then
// N*N row-major u8 hop values with 255 for unreachable. Little-endian.
void write_path_matrix(const std::filesystem::path& file, const PathMatrix& pm);
PathMatrix read_path_matrix(const std::filesystem::path& file);

}  // namespace nq
