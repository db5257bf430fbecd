#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nq/checkpoint.hpp"
#include "nq/config.hpp"
#include "nq/synth.hpp"
#include "nq/trainer.hpp"

using namespace nq;

namespace {

Graph small_sbm(std::uint64_t seed = 1) {
  SbmSpec s;
  s.nodes = 100;
  s.attr_dim = 50;
  s.p_in = 0.2;
  s.p_out = 0.02;
  s.seed = seed;
  return make_sbm(s);
}

TrainConfig small_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 3;
  c.batch_size = 40;
  c.encoder_hidden = {32};
  c.dim = 16;
  c.quant_hidden = {16};
  c.books = 2;
  c.book_size = 16;
  return c;
}

std::vector<std::uint8_t> bytes(Trainer& t) { return t.checkpoint().serialize(); }

}  // namespace

TEST_CASE("schedules: closed-form values") {
  auto s0 = schedules(0.0, 0.5);
  CHECK(s0.alpha == doctest::Approx(0.05));
  CHECK(s0.beta == doctest::Approx(0.5));
  auto s1 = schedules(1.0, 0.5);
  CHECK(s1.alpha == doctest::Approx(0.06225).epsilon(1e-4));
  CHECK(s1.beta == doctest::Approx(0.37754).epsilon(1e-4));
  double prev_a = 0, prev_b = 1;
  for (int i = 0; i <= 20; ++i) {
    auto s = schedules(i / 20.0, 0.5);
    CHECK(s.alpha >= prev_a);
    CHECK(s.beta <= prev_b);
    prev_a = s.alpha;
    prev_b = s.beta;
  }
  Diagnostics d;
  d.quiet = true;
  auto clamped = schedules(1.5, 0.5, &d);
  CHECK(clamped.alpha == s1.alpha);
  CHECK(d.warnings.size() == 1);
}

TEST_CASE("one cycle: endpoints and peak") {
  CHECK(one_cycle_lr(0, 1000, 0.01) == doctest::Approx(0.01 / 25));
  CHECK(one_cycle_lr(300, 1000, 0.01) == doctest::Approx(0.01));
  CHECK(std::abs(one_cycle_lr(1000, 1000, 0.01) - 0.01 / 1e4) < 1e-9);
  for (std::size_t s = 300; s < 1000; s += 50) CHECK(one_cycle_lr(s + 50, 1000, 0.01) <= one_cycle_lr(s, 1000, 0.01));
}

TEST_CASE("config: unknown keys and bad values name the key") {
  TrainConfig c;
  try {
    c.set("no_such_key", "1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "no_such_key");
  }
  CHECK_THROWS_AS(c.set("epochs", "many"), ConfigError);
  c.apply_overrides({"margin.mode=fixed", "margin.value=50", "no_rank_loss=true", "fraction_T=0.3"});
  CHECK(c.margin.mode == MarginMode::kFixed);
  CHECK(c.margin.fixed_value == 50);
  CHECK(c.no_rank_loss);
  auto back = TrainConfig::from_key_values(c.to_key_values());
  CHECK(back.to_key_values() == c.to_key_values());
}

TEST_CASE("checkpoint container round-trips bit-exactly") {
  Checkpoint ck;
  ck.set_text("config", "a=1\n");
  ad::Matrix<float> m(2, 3);
  m << 1, 2, 3, 4, 5, -6.5f;
  ck.add_tensor("param.x", m);
  auto b1 = ck.serialize();
  auto back = Checkpoint::deserialize(b1);
  CHECK(back.serialize() == b1);
  CHECK(back.tensor("param.x") == m);
  b1.resize(b1.size() - 3);
  CHECK_THROWS_AS(Checkpoint::deserialize(b1), FormatError);
}

TEST_CASE("degenerate graph fails before training") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {2, 0}};
  Graph tri(3, e);
  CHECK_THROWS_AS(Trainer(tri, small_config()), DegenerateGraphError);
}

TEST_CASE("training is deterministic for a seed") {
  auto g = small_sbm();
  Trainer a(g, small_config(7));
  Trainer b(g, small_config(7));
  auto la = a.fit();
  auto lb = b.fit();
  REQUIRE(la.size() == 3);
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].mean.total == lb[i].mean.total);
    CHECK(la[i].mean.quant == lb[i].mean.quant);
  }
  CHECK(bytes(a) == bytes(b));
  Trainer c(g, small_config(8));
  c.fit();
  CHECK(bytes(a) != bytes(c));
}

TEST_CASE("zero epochs leaves the initialisation untouched") {
  auto g = small_sbm();
  auto cfg = small_config();
  cfg.epochs = 0;
  Trainer t(g, cfg);
  auto init = bytes(t);
  CHECK(t.fit().empty());
  CHECK(bytes(t) == init);
  Model<float> fresh(ModelShape::from_config(cfg, g.input_features().cols()), cfg.seed);
  auto ck = t.checkpoint();
  fresh.visit([&](ad::Parameter<float>& p) { CHECK(ck.tensor("param." + p.name) == p.value); });
}

TEST_CASE("resume: continuing equals an uninterrupted run, zero extra epochs is a no-op") {
  auto g = small_sbm();
  auto cfg = small_config(3);
  cfg.epochs = 4;
  Trainer full(g, cfg);
  full.fit();

  Trainer first(g, cfg);
  first.run_epoch();
  first.run_epoch();
  auto mid = Checkpoint::deserialize(first.checkpoint().serialize());
  Trainer second(g, cfg);
  second.restore(mid);
  CHECK(second.epochs_completed() == 2);
  second.fit();
  CHECK(bytes(second) == bytes(full));

  auto done = full.checkpoint();
  Trainer again(g, cfg);
  again.restore(done);
  CHECK(again.fit().empty());
  CHECK(again.checkpoint().serialize() == done.serialize());
}

TEST_CASE("no_rank_loss reports an exactly zero rank term") {
  auto g = small_sbm();
  auto cfg = small_config();
  cfg.no_rank_loss = true;
  Trainer t(g, cfg);
  for (const auto& row : t.fit()) CHECK(row.mean.rank == 0.0);
  std::ostringstream log;
  write_log_header(log);
  CHECK(log.str() == "epoch,l_a,l_r,l_c,l_q,alpha,beta,lr\n");
}

TEST_CASE("train_step: total equals the weighted recombination") {
  auto g = small_sbm();
  auto cfg = small_config();
  Trainer t(g, cfg);
  Rng r1(1), r2(2), r3(3);
  std::vector<NodeId> anchors{0, 5, 9, 17, 33, 50, 70, 99};
  auto batch = t.make_batch(anchors, r1, r2, r3);
  for (std::size_t step : {0u, 2u, 5u}) {
    auto w = t.weights_at(step);
    auto l = t.train_step(batch, step);
    CHECK(std::abs(l.total - (l.adaptive + l.rank + w.alpha * l.semantic + w.beta * l.quant)) <= 1e-6 * std::max(1.0, std::abs(l.total)));
  }
}

TEST_CASE("a small SGD step on a frozen batch does not increase its loss") {
  auto g = small_sbm();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = small_config(seed);
    cfg.lr = 1e-4;
    Trainer t(g, cfg);
    Rng r1(seed), r2(seed + 100), r3(seed + 200);
    std::vector<NodeId> anchors;
    for (NodeId v = 0; v < 40; ++v) anchors.push_back(v);
    auto batch = t.make_batch(anchors, r1, r2, r3);
    const std::size_t peak = static_cast<std::size_t>(0.3 * static_cast<double>(t.total_steps()));
    auto before = t.train_step(batch, peak);
    auto after = t.train_step(batch, peak);
    INFO("seed " << seed);
    CHECK(after.total <= before.total);
  }
}

TEST_CASE("quantisation loss decreases on a 100-node SBM over 50 epochs") {
  auto g = small_sbm();
  TrainConfig cfg;
  cfg.epochs = 50;
  auto log = Trainer(g, cfg).fit();
  CHECK(log.back().mean.quant < log.front().mean.quant);
}

TEST_CASE("divergence aborts with the component magnitudes") {
  auto g = small_sbm();
  auto cfg = small_config();
  cfg.lr = 1e9;
  cfg.epochs = 30;
  Trainer t(g, cfg);
  try {
    t.fit();
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(std::string(e.what()).find("l_q=") != std::string::npos);
  }
}
