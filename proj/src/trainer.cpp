#include "nq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace nq {

Schedule schedules(double mu, double omega, Diagnostics* diag) {
  if (mu < 0.0 || mu > 1.0) {
    warn(diag, "training progress " + std::to_string(mu) + " clamped to [0, 1]");
    mu = std::clamp(mu, 0.0, 1.0);
  }
  const double s = 1.0 / (1.0 + std::exp(-omega * mu));
  return {0.1 * s, 1.0 - s};
}

double one_cycle_lr(std::size_t step, std::size_t total_steps, double base_lr, double warmup, double div,
                    double final_div) {
  const double start = base_lr / div;
  const double end = base_lr / final_div;
  if (total_steps == 0) return start;
  step = std::min(step, total_steps);
  const double warm = warmup * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s <= warm) return start + (base_lr - start) * (warm > 0 ? s / warm : 1.0);
  const double progress = (s - warm) / (static_cast<double>(total_steps) - warm);
  return end + (base_lr - end) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void write_log_header(std::ostream& out) { out << "epoch,l_a,l_r,l_c,l_q,alpha,beta,lr\n"; }

void write_log_row(std::ostream& out, const EpochLog& row) {
  std::ostringstream s;
  s << std::setprecision(9) << row.epoch << ',' << row.mean.adaptive << ',' << row.mean.rank << ','
    << row.mean.semantic << ',' << row.mean.quant << ',' << row.alpha << ',' << row.beta << ',' << row.lr << '\n';
  out << s.str();
}

void SgdMomentum::step(Model<float>& model, double lr) {
  const float m = static_cast<float>(momentum_);
  const float rate = static_cast<float>(lr);
  model.visit([&](ad::Parameter<float>& p) {
    auto it = velocity_.find(p.name);
    if (it == velocity_.end()) {
      it = velocity_.emplace(p.name, ad::Matrix<float>::Zero(p.value.rows(), p.value.cols())).first;
    }
    it->second = m * it->second + p.grad;
    p.value -= rate * it->second;
  });
}

Trainer::Trainer(const Graph& graph, TrainConfig cfg)
    : graph_(&graph), cfg_(std::move(cfg)), features_(graph.input_features()), optimiser_(cfg_.momentum) {
  cfg_.validate();
  cfg_.margin.validate();
  paths_ = std::make_unique<PathMatrix>(graph, cfg_.max_hop);
  triplets_ = std::make_unique<TripletSampler>(*paths_);
  if (graph.has_labels()) {
    Rng subset_rng = make_rng(cfg_.seed, kStreamLabelSubset);
    pairs_ = std::make_unique<LabelPairSampler>(graph, cfg_.margin.fraction_t, subset_rng);
  }
  model_ = std::make_unique<Model<float>>(ModelShape::from_config(cfg_, features_.cols()), cfg_.seed);
}

std::size_t Trainer::steps_per_epoch() const {
  return (graph_->num_nodes() + cfg_.batch_size - 1) / cfg_.batch_size;
}

Batch Trainer::make_batch(std::span<const NodeId> anchors, Rng& triplet_rng, Rng& pair_rng, Rng& gumbel_rng) const {
  std::vector<Triplet> global;
  global.reserve(anchors.size());
  for (NodeId a : anchors) global.push_back(triplets_->sample_for(a, triplet_rng));
  std::vector<LabelPair> pairs;
  if (pairs_) pairs = pairs_->sample(cfg_.label_pairs_per_batch(), pair_rng);

  Batch b;
  for (const auto& t : global) {
    b.nodes.push_back(t.anchor);
    b.nodes.push_back(t.positive);
    b.nodes.push_back(t.negative);
  }
  for (const auto& p : pairs) {
    b.nodes.push_back(p.i);
    b.nodes.push_back(p.j);
  }
  std::sort(b.nodes.begin(), b.nodes.end());
  b.nodes.erase(std::unique(b.nodes.begin(), b.nodes.end()), b.nodes.end());
  auto local = [&](NodeId v) {
    return static_cast<NodeId>(std::lower_bound(b.nodes.begin(), b.nodes.end(), v) - b.nodes.begin());
  };
  for (auto t : global) {
    t.anchor = local(t.anchor);
    t.positive = local(t.positive);
    t.negative = local(t.negative);
    b.triplets.push_back(t);
  }
  for (auto p : pairs) {
    p.i = local(p.i);
    p.j = local(p.j);
    b.pairs.push_back(p);
  }
  const auto width = static_cast<Eigen::Index>(cfg_.books * cfg_.book_size);
  b.gumbel = gumbel_noise<float>(static_cast<Eigen::Index>(b.nodes.size()), width, gumbel_rng).cast<double>();
  return b;
}

ObjectiveWeights Trainer::weights_at(std::size_t global_step) const {
  const double mu = total_steps() ? static_cast<double>(global_step) / static_cast<double>(total_steps()) : 0.0;
  auto sch = schedules(std::min(mu, 1.0), cfg_.omega);
  ObjectiveWeights w;
  w.alpha = sch.alpha;
  w.beta = sch.beta;
  w.tau = cfg_.tau;
  w.rank_loss = !cfg_.no_rank_loss;
  w.margin = cfg_.margin;
  return w;
}

LossBreakdown Trainer::train_step(const Batch& batch, std::size_t global_step) {
  const auto w = weights_at(global_step);
  const double lr = one_cycle_lr(global_step, total_steps(), cfg_.lr, cfg_.onecycle_warmup, cfg_.onecycle_div,
                                 cfg_.onecycle_final_div);
  LossBreakdown partial;
  auto describe = [&](const std::string& why) {
    std::ostringstream s;
    s << "training aborted at step " << global_step << ": " << why << " (l_a=" << partial.adaptive
      << ", l_r=" << partial.rank << ", l_c=" << partial.semantic << ", l_q=" << partial.quant
      << ", alpha=" << w.alpha << ", beta=" << w.beta << ", lr=" << lr << ")";
    return s.str();
  };
  model_->zero_grad();
  ad::Tape<float> tape;
  try {
    auto terms = joint_objective(tape, *model_, features_, batch, w, &partial);
    if (!std::isfinite(terms.values.total)) throw TrainingAborted(describe("non-finite total loss"));
    tape.backward(terms.total);
    optimiser_.step(*model_, lr);
    bool finite = true;
    model_->visit([&](ad::Parameter<float>& p) { finite = finite && p.value.allFinite(); });
    if (!finite) throw TrainingAborted(describe("non-finite parameters after update"));
    return terms.values;
  } catch (const ad::NonFiniteError& e) {
    throw TrainingAborted(describe(e.what()));
  }
}

EpochLog Trainer::run_epoch() {
  const std::size_t epoch = epochs_completed_;
  Rng order_rng = make_rng(cfg_.seed, kStreamOrder, epoch);
  Rng triplet_rng = make_rng(cfg_.seed, kStreamTriplets, epoch);
  Rng pair_rng = make_rng(cfg_.seed, kStreamLabelPairs, epoch);
  Rng gumbel_rng = make_rng(cfg_.seed, kStreamGumbel, epoch);

  std::vector<NodeId> order(graph_->num_nodes());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::shuffle(order.begin(), order.end(), order_rng);

  EpochLog log;
  log.epoch = epoch + 1;
  std::size_t steps = 0;
  const std::size_t base_step = epoch * steps_per_epoch();
  for (std::size_t s = 0; s < order.size(); s += cfg_.batch_size) {
    std::span<const NodeId> anchors(order.data() + s, std::min(cfg_.batch_size, order.size() - s));
    Batch batch = make_batch(anchors, triplet_rng, pair_rng, gumbel_rng);
    const std::size_t step = base_step + steps;
    auto l = train_step(batch, step);
    log.mean.adaptive += l.adaptive;
    log.mean.rank += l.rank;
    log.mean.semantic += l.semantic;
    log.mean.quant += l.quant;
    log.mean.total += l.total;
    auto w = weights_at(step);
    log.alpha = w.alpha;
    log.beta = w.beta;
    log.lr = one_cycle_lr(step, total_steps(), cfg_.lr, cfg_.onecycle_warmup, cfg_.onecycle_div,
                          cfg_.onecycle_final_div);
    ++steps;
  }
  if (steps > 0) {
    const double n = static_cast<double>(steps);
    log.mean.adaptive /= n;
    log.mean.rank /= n;
    log.mean.semantic /= n;
    log.mean.quant /= n;
    log.mean.total /= n;
  }
  ++epochs_completed_;
  return log;
}

std::vector<EpochLog> Trainer::fit(const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  while (epochs_completed_ < cfg_.epochs) {
    logs.push_back(run_epoch());
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

Checkpoint Trainer::checkpoint() {
  Checkpoint ck;
  store_model(*model_, cfg_, ck);
  ck.set_text("state", "epochs_completed=" + std::to_string(epochs_completed_) + "\n");
  for (const auto& [name, v] : optimiser_.velocity()) ck.add_tensor("opt.velocity." + name, v);
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  model_ = load_model(ck);
  auto state = parse_key_values(ck.text("state"));
  epochs_completed_ = std::stoull(state.at("epochs_completed"));
  optimiser_.velocity().clear();
  const std::string prefix = "opt.velocity.";
  for (const auto& t : ck.tensors()) {
    if (t.name.rfind(prefix, 0) == 0) optimiser_.velocity()[t.name.substr(prefix.size())] = t.value;
  }
}

void store_model(Model<float>& model, const TrainConfig& cfg, Checkpoint& ck) {
  ck.set_text("config", format_key_values(cfg.to_key_values()));
  ck.set_text("model", "input_dim=" + std::to_string(model.shape().input_dim) + "\n");
  model.visit([&](ad::Parameter<float>& p) { ck.add_tensor("param." + p.name, p.value); });
  model.visit_buffers([&](const std::string& name, ad::Matrix<float>& b) { ck.add_tensor("buffer." + name, b); });
}

TrainConfig checkpoint_config(const Checkpoint& ck) {
  return TrainConfig::from_key_values(parse_key_values(ck.text("config")));
}

std::unique_ptr<Model<float>> load_model(const Checkpoint& ck) {
  auto cfg = checkpoint_config(ck);
  auto meta = parse_key_values(ck.text("model"));
  auto shape = ModelShape::from_config(cfg, std::stoull(meta.at("input_dim")));
  auto model = std::make_unique<Model<float>>(shape, cfg.seed);
  auto assign = [&](const std::string& name, ad::Matrix<float>& dst) {
    const auto& src = ck.tensor(name);
    if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
      throw FormatError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    dst = src;
  };
  model->visit([&](ad::Parameter<float>& p) {
    assign("param." + p.name, p.value);
    p.zero_grad();
  });
  model->visit_buffers([&](const std::string& name, ad::Matrix<float>& b) { assign("buffer." + name, b); });
  return model;
}

}  // namespace nq
