#pragma once

#include <optional>

#include "nq/checkpoint.hpp"
#include "nq/codestore.hpp"
#include "nq/config.hpp"
#include "nq/protocols.hpp"

namespace nq {

SplitSpec split_spec(const TrainConfig& cfg);

// The graph a run trains on: the full graph minus the held-out link
// prediction edges when the split is enabled.
struct PreparedGraph {
  Graph train;
  std::optional<EdgeSplit> split;
};
PreparedGraph prepare_training_graph(const Graph& full, const TrainConfig& cfg);

// Continuous embeddings, the exported code store, its lookup tables and the
// decoder reconstructions, all for every node of `full`.
struct Representations {
  ad::Matrix<float> continuous;
  CodeStore store;
  LookupTables tables;
  ad::Matrix<float> reconstructed;
};
Representations build_representations(const Graph& full, const Checkpoint& ck,
                                      std::optional<CodeStore> store = std::nullopt);

}  // namespace nq
