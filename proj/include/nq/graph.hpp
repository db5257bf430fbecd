#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "nq/errors.hpp"

namespace nq {

using NodeId = std::uint32_t;
using LabelId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Row-compressed binary matrix; each row lists the column indices of its
// 1-bits in ascending order.
class SparseBinaryMatrix {
 public:
  SparseBinaryMatrix() = default;
  SparseBinaryMatrix(std::size_t cols, std::vector<std::vector<std::uint32_t>> rows);

  std::size_t rows() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return indices_.size(); }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  // Identity rows, used as one-hot input when a graph has no attributes.
  static SparseBinaryMatrix identity(std::size_t n);

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
};

// Undirected, unweighted graph with optional binary attributes and
// (possibly multi-) labels.
class Graph {
 public:
  Graph() = default;

  // Builds from an edge list; self-loops and duplicates are dropped and
  // direction is symmetrised.
  Graph(std::size_t num_nodes, std::span<const Edge> edges, Diagnostics* diag = nullptr);

  std::size_t num_nodes() const { return offsets_.size() - 1; }
  std::size_t num_edges() const { return neighbours_.size() / 2; }
  std::span<const NodeId> neighbours(NodeId v) const {
    return {neighbours_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId a, NodeId b) const;
  // Each undirected edge once, as (smaller, larger), sorted.
  std::vector<Edge> edges() const;

  bool has_attributes() const { return attributes_.has_value(); }
  const SparseBinaryMatrix& attributes() const { return *attributes_; }
  void set_attributes(SparseBinaryMatrix attrs);
  // Attributes if present, otherwise one-hot node identity rows.
  SparseBinaryMatrix input_features() const;

  bool has_labels() const { return num_labels_ > 0; }
  std::size_t num_labels() const { return num_labels_; }
  std::span<const LabelId> labels(NodeId v) const { return labels_[v]; }
  void set_labels(std::size_t num_labels, std::vector<std::vector<LabelId>> labels);
  // Smallest label of each node, or -1 when unlabelled.
  std::vector<int> primary_labels() const;

  // Same nodes, attributes and labels; only the listed edges.
  Graph with_edges(std::span<const Edge> edges) const;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> neighbours_;
  std::optional<SparseBinaryMatrix> attributes_;
  std::size_t num_labels_ = 0;
  std::vector<std::vector<LabelId>> labels_;
};

// Ids at or above this bound are rejected by the loaders.
inline constexpr std::uint64_t kMaxNodeId = (1ull << 31) - 1;

// Edge file: whitespace-separated id pairs, '#' starts a comment.
// Attribute file: line i lists the 1-bit indices of node i; an optional
// "# dim=D" header declares the column count.
// Label file: "node_id label[,label...]"; an optional "# classes=C" header
// declares the label count.
Graph load_graph(const std::filesystem::path& edge_file,
                 const std::optional<std::filesystem::path>& attr_file = std::nullopt,
                 const std::optional<std::filesystem::path>& label_file = std::nullopt,
                 Diagnostics* diag = nullptr);

void write_edges(const std::filesystem::path& file, std::span<const Edge> edges);
void write_attributes(const std::filesystem::path& file, const SparseBinaryMatrix& attrs);
void write_labels(const std::filesystem::path& file, const Graph& g);

}  // namespace nq
