#include "nq/pipeline.hpp"

#include "nq/trainer.hpp"

namespace nq {

SplitSpec split_spec(const TrainConfig& cfg) {
  SplitSpec s;
  s.val_edge_fraction = cfg.split_val_fraction;
  s.test_edge_fraction = cfg.split_test_fraction;
  s.seed = cfg.seed;
  return s;
}

PreparedGraph prepare_training_graph(const Graph& full, const TrainConfig& cfg) {
  if (!cfg.split_enabled) return {full, std::nullopt};
  auto split = split_edges(full, split_spec(cfg));
  Graph train = full.with_edges(split.train);
  return {std::move(train), std::move(split)};
}

Representations build_representations(const Graph& full, const Checkpoint& ck, std::optional<CodeStore> store) {
  auto model = load_model(ck);
  auto x = full.input_features();
  if (static_cast<Eigen::Index>(x.cols()) != model->shape().input_dim) {
    throw DimensionError("graph feature dimension " + std::to_string(x.cols()) + " != checkpoint input dimension " +
                         std::to_string(model->shape().input_dim));
  }
  auto z = model->embed_all(x);
  CodeStore s = store ? std::move(*store) : export_codes(full, ck);
  if (s.num_nodes() != full.num_nodes()) throw DimensionError("code store node count does not match the graph");
  LookupTables tables(s.codebooks());
  auto recon = s.reconstruct_embeddings();
  return {std::move(z), std::move(s), std::move(tables), std::move(recon)};
}

}  // namespace nq
