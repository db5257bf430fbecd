#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nq/checkpoint.hpp"
#include "nq/config.hpp"
#include "nq/model.hpp"
#include "nq/objective.hpp"
#include "nq/path_matrix.hpp"
#include "nq/sampling.hpp"

namespace nq {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Schedule {
  double alpha = 0;
  double beta = 0;
};

// alpha = 0.1 * s, beta = 1 - s with s = 1/(1 + exp(-omega*mu)). mu outside
// [0, 1] is clamped with a warning.
Schedule schedules(double mu, double omega, Diagnostics* diag = nullptr);

// Linear warmup from base/div to base over the first `warmup` share of the
// steps, then cosine annealing down to base/final_div.
double one_cycle_lr(std::size_t step, std::size_t total_steps, double base_lr, double warmup = 0.3,
                    double div = 25.0, double final_div = 1e4);

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown mean;
  double alpha = 0;
  double beta = 0;
  double lr = 0;
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const EpochLog& row);

// SGD with momentum: v = m*v + g; p -= lr*v.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}
  void step(Model<float>& model, double lr);
  std::map<std::string, ad::Matrix<float>>& velocity() { return velocity_; }
  const std::map<std::string, ad::Matrix<float>>& velocity() const { return velocity_; }

 private:
  double momentum_;
  std::map<std::string, ad::Matrix<float>> velocity_;
};

// Joint optimisation of the four losses over a fixed training graph.
// Every random stream is derived from (seed, epoch), so a run resumed from
// a checkpoint continues exactly as an uninterrupted one.
class Trainer {
 public:
  // Throws DegenerateGraphError when the graph offers no valid triplet.
  Trainer(const Graph& graph, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  Model<float>& model() { return *model_; }
  std::size_t epochs_completed() const { return epochs_completed_; }
  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const { return steps_per_epoch() * cfg_.epochs; }
  const PathMatrix& path_matrix() const { return *paths_; }
  const SparseBinaryMatrix& features() const { return features_; }
  bool semi_supervised() const { return pairs_ != nullptr; }

  // Assembles a batch around `anchors` (one triplet per anchor).
  Batch make_batch(std::span<const NodeId> anchors, Rng& triplet_rng, Rng& pair_rng, Rng& gumbel_rng) const;
  ObjectiveWeights weights_at(std::size_t global_step) const;

  // Forward, backward and one SGD update at the schedule of `global_step`.
  // Throws TrainingAborted when a loss is non-finite.
  LossBreakdown train_step(const Batch& batch, std::size_t global_step);

  EpochLog run_epoch();
  // Runs the remaining epochs; `on_epoch` sees each log row.
  std::vector<EpochLog> fit(const std::function<void(const EpochLog&)>& on_epoch = {});

  Checkpoint checkpoint();
  void restore(const Checkpoint& ck);

 private:
  const Graph* graph_;
  TrainConfig cfg_;
  SparseBinaryMatrix features_;
  std::unique_ptr<PathMatrix> paths_;
  std::unique_ptr<TripletSampler> triplets_;
  std::unique_ptr<LabelPairSampler> pairs_;
  std::unique_ptr<Model<float>> model_;
  SgdMomentum optimiser_;
  std::size_t epochs_completed_ = 0;
};

// Model tensors (parameters and batch-norm buffers) and the config into a
// checkpoint; and back.
void store_model(Model<float>& model, const TrainConfig& cfg, Checkpoint& ck);
std::unique_ptr<Model<float>> load_model(const Checkpoint& ck);
TrainConfig checkpoint_config(const Checkpoint& ck);

}  // namespace nq
