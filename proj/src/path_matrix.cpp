#include "nq/path_matrix.hpp"

#include <algorithm>

#include "nq/binary_io.hpp"

namespace nq {

std::vector<Hop> bfs_row(const Graph& g, NodeId source, unsigned max_hop) {
  std::vector<Hop> dist(g.num_nodes(), kUnreachable);
  std::vector<NodeId> frontier{source}, next;
  dist[source] = 0;
  for (unsigned hop = 1; hop <= max_hop && !frontier.empty(); ++hop) {
    next.clear();
    for (NodeId u : frontier) {
      for (NodeId v : g.neighbours(u)) {
        if (dist[v] == kUnreachable) {
          dist[v] = static_cast<Hop>(hop);
          next.push_back(v);
        }
      }
    }
    frontier.swap(next);
  }
  return dist;
}

PathMatrix::PathMatrix(const Graph& g, unsigned max_hop, std::size_t dense_limit,
                       std::size_t cache_rows)
    : graph_(&g), n_(g.num_nodes()), max_hop_(max_hop) {
  if (max_hop < 1 || max_hop >= kUnreachable) {
    throw std::invalid_argument("max_hop must be in [1, 254]");
  }
  if (n_ <= dense_limit) {
    dense_.resize(n_ * n_);
    for (NodeId s = 0; s < n_; ++s) {
      auto r = bfs_row(g, s, max_hop);
      std::copy(r.begin(), r.end(), dense_.begin() + static_cast<std::ptrdiff_t>(s * n_));
    }
  } else {
    cache_ = std::make_unique<Cache>();
    cache_->capacity = std::max<std::size_t>(cache_rows, 1);
  }
}

PathMatrix::PathMatrix(std::size_t n, unsigned max_hop, std::vector<Hop> dense)
    : n_(n), max_hop_(max_hop), dense_(std::move(dense)) {
  if (dense_.size() != n * n) throw FormatError("path matrix payload size mismatch");
}

std::shared_ptr<const std::vector<Hop>> PathMatrix::row_shared(NodeId i) const {
  if (i >= n_) throw BoundsError("path matrix row out of range");
  if (is_dense()) {
    auto start = dense_.begin() + static_cast<std::ptrdiff_t>(i * n_);
    return std::make_shared<const std::vector<Hop>>(start, start + static_cast<std::ptrdiff_t>(n_));
  }
  std::lock_guard lock(cache_->mu);
  auto it = cache_->rows.find(i);
  if (it != cache_->rows.end()) {
    cache_->order.splice(cache_->order.begin(), cache_->order, it->second.second);
    return it->second.first;
  }
  auto row = std::make_shared<const std::vector<Hop>>(bfs_row(*graph_, i, max_hop_));
  cache_->order.push_front(i);
  cache_->rows.emplace(i, std::make_pair(row, cache_->order.begin()));
  if (cache_->rows.size() > cache_->capacity) {
    cache_->rows.erase(cache_->order.back());
    cache_->order.pop_back();
  }
  return row;
}

std::span<const Hop> PathMatrix::row(NodeId i) const {
  if (i >= n_) throw BoundsError("path matrix row out of range");
  if (is_dense()) return {dense_.data() + i * n_, n_};
  // Keeps the last lazily fetched row alive for this thread.
  thread_local std::shared_ptr<const std::vector<Hop>> pinned;
  pinned = row_shared(i);
  return *pinned;
}

void write_path_matrix(const std::filesystem::path& file, const PathMatrix& pm) {
  io::Writer w;
  w.magic("NQPM");
  w.u16(1);
  w.u64(pm.size());
  w.u16(static_cast<std::uint16_t>(pm.max_hop()));
  for (NodeId i = 0; i < pm.size(); ++i) {
    auto r = pm.row_shared(i);
    w.bytes(*r);
  }
  w.save(file);
}

PathMatrix read_path_matrix(const std::filesystem::path& file) {
  auto r = io::Reader::from_file(file);
  r.expect_magic("NQPM");
  if (auto v = r.u16(); v != 1) throw FormatError("unsupported NQPM version " + std::to_string(v));
  auto n = r.u64();
  auto h = r.u16();
  if (r.remaining() != n * n) throw FormatError("NQPM payload size mismatch");
  auto payload = r.bytes(n * n);
  return PathMatrix(n, h, std::vector<Hop>(payload.begin(), payload.end()));
}

}  // namespace nq
