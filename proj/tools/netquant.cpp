#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nq/bench.hpp"
#include "nq/binary_io.hpp"
#include "nq/codestore.hpp"
#include "nq/config.hpp"
#include "nq/pipeline.hpp"
#include "nq/protocols.hpp"
#include "nq/synth.hpp"
#include "nq/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " not given");
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

std::vector<double> parse_list(const std::string& text, double scale) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item) * scale);
    } catch (const std::exception&) {
      throw UsageError("bad list entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

struct GraphFiles {
  std::string edges, attributes, labels;

  void add_options(CLI::App* app) {
    app->add_option("--edges", edges, "Edge list file");
    app->add_option("--attributes", attributes, "Attribute file");
    app->add_option("--labels", labels, "Label file");
  }
  // Fills unset paths from a config.
  void fallback(const nq::TrainConfig& cfg) {
    if (edges.empty()) edges = cfg.graph_edges;
    if (attributes.empty()) attributes = cfg.graph_attributes;
    if (labels.empty()) labels = cfg.graph_labels;
  }
  nq::Graph load() const {
    require_file(edges, "edge file");
    std::optional<fs::path> a, l;
    if (!attributes.empty()) {
      require_file(attributes, "attribute file");
      a = attributes;
    }
    if (!labels.empty()) {
      require_file(labels, "label file");
      l = labels;
    }
    return nq::load_graph(edges, a, l);
  }
};

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  nq::SbmSpec spec;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  auto g = nq::make_sbm(a.spec);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  const auto edges = g.edges();
  nq::write_edges(dir / "edges.txt", edges);
  nq::write_attributes(dir / "attributes.txt", g.attributes());
  nq::write_labels(dir / "labels.txt", g);
  std::cout << "nodes=" << g.num_nodes() << " edges=" << g.num_edges() << " communities=" << a.spec.communities
            << " dir=" << a.out << '\n';
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  GraphFiles graph;
  std::string out;
  std::size_t checkpoint_every = 0;
  bool resume = false;
  bool quiet = false;
};

json input_hashes(const GraphFiles& g) {
  json j = json::object();
  auto add = [&](const std::string& key, const std::string& path) {
    if (path.empty()) return;
    j[key] = {{"path", path}, {"fnv1a", nq::io::hex64(nq::io::fnv1a_file(path))}};
  };
  add("edges", g.edges);
  add("attributes", g.attributes);
  add("labels", g.labels);
  return j;
}

int cmd_train(TrainArgs a) {
  nq::TrainConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg = nq::TrainConfig::from_file(a.config);
  }
  cfg.apply_overrides(a.overrides);
  if (!a.graph.edges.empty()) cfg.set("graph.edges", a.graph.edges);
  if (!a.graph.attributes.empty()) cfg.set("graph.attributes", a.graph.attributes);
  if (!a.graph.labels.empty()) cfg.set("graph.labels", a.graph.labels);
  cfg.validate();
  cfg.margin.validate();
  a.graph.fallback(cfg);
  if (a.out.empty()) throw UsageError("--out not given");

  const fs::path dir(a.out);
  const fs::path manifest_file = dir / "manifest.json";
  const fs::path ck_file = dir / "checkpoint.nqck";
  const fs::path log_file = dir / "log.csv";
  const auto hashes = input_hashes(a.graph);
  const auto config_kv = cfg.to_key_values();

  auto full = a.graph.load();
  auto prepared = nq::prepare_training_graph(full, cfg);
  nq::Trainer trainer(prepared.train, cfg);

  std::vector<std::string> kept_log;
  if (a.resume) {
    require_file(manifest_file, "manifest");
    require_file(ck_file, "checkpoint");
    json old = json::parse(std::ifstream(manifest_file));
    if (old.at("inputs") != hashes) throw UsageError("resume: input files changed since the original run");
    if (old.at("config") != json(config_kv)) throw UsageError("resume: configuration differs from the original run");
    trainer.restore(nq::Checkpoint::load(ck_file));
    std::ifstream in(log_file);
    std::string line;
    std::getline(in, line);
    while (kept_log.size() < trainer.epochs_completed() && std::getline(in, line)) kept_log.push_back(line);
    if (kept_log.size() != trainer.epochs_completed()) throw UsageError("resume: log shorter than the checkpoint");
  } else {
    fs::create_directories(dir);
    json m;
    m["tool"] = "netquant";
    m["version"] = kToolVersion;
    m["command"] = "train";
    m["seed"] = cfg.seed;
    m["config"] = config_kv;
    m["inputs"] = hashes;
    m["started"] = now_utc();
    if (prepared.split) {
      m["split"] = {{"train_edges", prepared.split->train.size()},
                    {"val_edges", prepared.split->val.size()},
                    {"test_edges", prepared.split->test.size()}};
    }
    std::ofstream(manifest_file) << m.dump(2) << '\n';
  }

  std::ofstream log(log_file, std::ios::trunc);
  nq::write_log_header(log);
  for (const auto& row : kept_log) log << row << '\n';
  log.flush();

  trainer.fit([&](const nq::EpochLog& row) {
    nq::write_log_row(log, row);
    log.flush();
    if (!a.quiet) {
      std::cerr << "epoch " << row.epoch << "/" << cfg.epochs << " l_a=" << fmt(row.mean.adaptive)
                << " l_r=" << fmt(row.mean.rank) << " l_c=" << fmt(row.mean.semantic)
                << " l_q=" << fmt(row.mean.quant) << '\n';
    }
    if (a.checkpoint_every > 0 && row.epoch % a.checkpoint_every == 0 && row.epoch < cfg.epochs) {
      trainer.checkpoint().save(ck_file);
    }
  });
  trainer.checkpoint().save(ck_file);
  std::cout << "checkpoint " << ck_file.string() << " fnv1a=" << nq::io::hex64(nq::io::fnv1a_file(ck_file)) << '\n';
  return 0;
}

// ---- encode ----------------------------------------------------------------

struct EncodeArgs {
  std::string checkpoint;
  GraphFiles graph;
  std::string out;
};

void print_storage(const nq::StorageReport& r) {
  std::cout << "storage codes_bytes=" << static_cast<std::uint64_t>(r.code_bytes)
            << " codebook_bytes=" << static_cast<std::uint64_t>(r.codebook_bytes)
            << " float_bytes=" << static_cast<std::uint64_t>(r.float_bytes) << " codes_MB=" << fmt(r.code_bytes / 1e6)
            << " codebooks_MB=" << fmt(r.codebook_bytes / 1e6) << " float_MB=" << fmt(r.float_bytes / 1e6) << '\n';
}

int cmd_encode(EncodeArgs a) {
  require_file(a.checkpoint, "checkpoint");
  auto ck = nq::Checkpoint::load(a.checkpoint);
  a.graph.fallback(nq::checkpoint_config(ck));
  auto g = a.graph.load();
  auto store = nq::export_codes(g, ck);
  if (a.out.empty()) throw UsageError("--out not given");
  store.save(a.out);
  std::cout << "codestore " << a.out << " N=" << store.num_nodes() << " M=" << store.num_books()
            << " K=" << store.book_size() << " L=" << store.dim() << " payload_bytes=" << store.payload_bytes()
            << " fnv1a=" << nq::io::hex64(nq::io::fnv1a_file(a.out)) << '\n';
  print_storage(nq::storage_report(store.num_nodes(), store.num_books(), store.book_size(), store.dim()));
  return 0;
}

// ---- recommend -------------------------------------------------------------

struct RecommendArgs {
  std::string store;
  std::uint32_t node = 0;
  std::size_t k = 10;
  std::string exclude_edges;
};

int cmd_recommend(const RecommendArgs& a) {
  require_file(a.store, "code store");
  auto store = nq::CodeStore::load(a.store);
  if (a.node >= store.num_nodes()) throw UsageError("node id out of range");
  if (a.k < 1) throw UsageError("k must be >= 1");
  std::vector<nq::NodeId> exclude;
  if (!a.exclude_edges.empty()) {
    require_file(a.exclude_edges, "edge file");
    auto g = nq::load_graph(a.exclude_edges);
    if (a.node < g.num_nodes()) exclude.assign(g.neighbours(a.node).begin(), g.neighbours(a.node).end());
  }
  nq::LookupTables tables(store.codebooks());
  auto top = nq::recommend_top_k(store, tables, a.node, a.k, exclude);
  if (top.truncated) std::cerr << "warning: only " << top.items.size() << " candidates available\n";
  std::cout << "rank\tnode_id\tscore\n";
  for (std::size_t i = 0; i < top.items.size(); ++i) {
    std::cout << (i + 1) << '\t' << top.items[i].node << '\t' << fmt(top.items[i].score) << '\n';
  }
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string store;
  GraphFiles graph;
  std::vector<std::string> protocols;
  std::string variant = "both";
  std::string fractions = "0.02,0.04,0.06,0.08,0.10";
  std::string train_ratios = "20,40,60,80";
  std::size_t repeats = 10;
  std::size_t pairs_per_class = 1000;
  bool lenient_path = false;
  std::size_t k = 50;
  std::size_t max_queries = 0;
  std::string out;
};

int cmd_evaluate(EvaluateArgs a) {
  require_file(a.checkpoint, "checkpoint");
  if (a.out.empty()) throw UsageError("--out not given");
  if (a.variant != "continuous" && a.variant != "discrete" && a.variant != "both") {
    throw UsageError("--variant must be continuous, discrete or both");
  }
  auto ck = nq::Checkpoint::load(a.checkpoint);
  const auto cfg = nq::checkpoint_config(ck);
  a.graph.fallback(cfg);
  auto full = a.graph.load();
  for (const auto& p : a.protocols) {
    if ((p == "classify") && !full.has_labels()) throw UsageError("protocol '" + p + "' needs a labelled graph");
    if (p != "link" && p != "classify" && p != "path" && p != "ndcg") throw UsageError("unknown protocol '" + p + "'");
  }
  std::optional<nq::CodeStore> given;
  if (!a.store.empty()) {
    require_file(a.store, "code store");
    given = nq::CodeStore::load(a.store);
  }
  auto rep = nq::build_representations(full, ck, std::move(given));
  const bool cont = a.variant != "discrete";
  const bool disc = a.variant != "continuous";
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  nq::Diagnostics diag;
  std::ostringstream summary;

  for (const auto& p : a.protocols) {
    if (p == "link") {
      if (!cfg.split_enabled) throw UsageError("link protocol needs a checkpoint trained with split.enabled=true");
      auto split = nq::split_edges(full, nq::split_spec(cfg));
      std::ofstream csv(dir / "link.csv");
      csv << "variant,auc\n";
      auto emit = [&](const std::string& name, const nq::PairScorer& s) {
        const double auc = nq::link_prediction_auc(s, split.test, split.test_negative);
        csv << name << ',' << fmt(auc) << '\n';
        summary << "link  " << std::setw(14) << std::left << name << " AUC " << fmt(auc) << '\n';
      };
      if (cont) emit("continuous", nq::l2_scorer(rep.continuous));
      if (disc) {
        emit("discrete", nq::code_scorer(rep.store, rep.tables));
        emit("reconstructed", nq::l2_scorer(rep.reconstructed));
      }
    } else if (p == "classify") {
      auto fr = parse_list(a.fractions, 1.0);
      auto labels = full.primary_labels();
      std::ofstream csv(dir / "classify.csv");
      csv << "variant,train_fraction,macro_f1,micro_f1\n";
      auto emit = [&](const std::string& name, const nq::ad::Matrix<float>& z) {
        auto res = nq::node_classification(nq::to_features(z), labels, fr, a.repeats, cfg.seed);
        for (const auto& r : res) {
          csv << name << ',' << fmt(r.train_fraction) << ',' << fmt(r.macro_f1) << ',' << fmt(r.micro_f1) << '\n';
          summary << "class " << std::setw(14) << std::left << name << " T=" << fmt(r.train_fraction)
                  << " macro " << fmt(r.macro_f1) << " micro " << fmt(r.micro_f1) << '\n';
        }
      };
      if (cont) emit("continuous", rep.continuous);
      if (disc) emit("discrete", rep.reconstructed);
    } else if (p == "path") {
      auto ratios = parse_list(a.train_ratios, 0.01);
      nq::PathMatrix pm(full, std::max(5u, cfg.max_hop));
      nq::PathSampleSpec ps;
      ps.pairs_per_class = a.pairs_per_class;
      ps.seed = cfg.seed;
      ps.drop_empty_classes = a.lenient_path;
      auto pairs = nq::sample_path_pairs(pm, ps, &diag);
      std::ofstream csv(dir / "path.csv");
      std::ofstream per(dir / "path_per_class.csv");
      csv << "variant,train_ratio,macro_f1,micro_f1,average_f1\n";
      per << "variant,train_ratio,class,f1\n";
      auto emit = [&](const std::string& name, const nq::ad::Matrix<float>& z) {
        auto res = nq::path_prediction(nq::to_features(z), pairs, ratios, cfg.seed);
        for (const auto& r : res) {
          csv << name << ',' << fmt(r.train_ratio) << ',' << fmt(r.macro_f1) << ',' << fmt(r.micro_f1) << ','
              << fmt(r.average_f1) << '\n';
          for (std::size_t c = 0; c < r.per_class.size(); ++c) {
            per << name << ',' << fmt(r.train_ratio) << ',' << nq::path_class_name(static_cast<int>(c)) << ','
                << (std::isnan(r.per_class[c]) ? std::string("nan") : fmt(r.per_class[c])) << '\n';
          }
          summary << "path  " << std::setw(14) << std::left << name << " ratio=" << fmt(r.train_ratio)
                  << " macro " << fmt(r.macro_f1) << " micro " << fmt(r.micro_f1) << '\n';
        }
      };
      if (cont) emit("continuous", rep.continuous);
      if (disc) emit("discrete", rep.reconstructed);
    } else if (p == "ndcg") {
      nq::NdcgSpec ns;
      ns.k = a.k;
      ns.repeats = a.repeats;
      ns.seed = cfg.seed;
      ns.max_queries = a.max_queries;
      std::ofstream csv(dir / "ndcg.csv");
      csv << "variant,k,ndcg,evaluated,excluded\n";
      auto emit = [&](const std::string& name, const nq::QueryScorer& s) {
        auto r = nq::node_recommendation_ndcg(s, full, ns, &diag);
        csv << name << ',' << ns.k << ',' << fmt(r.ndcg) << ',' << r.evaluated << ',' << r.excluded << '\n';
        summary << "ndcg  " << std::setw(14) << std::left << name << " NDCG@" << ns.k << ' ' << fmt(r.ndcg)
                << " (excluded " << r.excluded << ")\n";
      };
      if (cont) emit("continuous", nq::l2_query_scorer(rep.continuous));
      if (disc) emit("discrete", nq::code_query_scorer(rep.store, rep.tables));
    }
  }
  std::cout << summary.str();
  return 0;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string store;
  std::string checkpoint;
  GraphFiles graph;
  std::size_t synthetic = 0;
  std::size_t queries = 100;
  std::size_t k = 50;
  std::uint64_t seed = 1;
};

int cmd_bench(BenchArgs a) {
  if (a.queries == 0) throw UsageError("need at least one query");
  std::optional<nq::CodeStore> store;
  nq::ad::Matrix<float> z;
  if (a.synthetic > 0) {
    store = nq::random_store(a.synthetic, 8, 256, 128, a.seed);
    z = nq::random_embeddings(a.synthetic, 128, a.seed);
  } else {
    require_file(a.store, "code store");
    require_file(a.checkpoint, "checkpoint");
    store = nq::CodeStore::load(a.store);
    auto ck = nq::Checkpoint::load(a.checkpoint);
    a.graph.fallback(nq::checkpoint_config(ck));
    auto g = a.graph.load();
    z = nq::load_model(ck)->embed_all(g.input_features());
    if (static_cast<std::size_t>(z.rows()) != store->num_nodes()) throw UsageError("store and graph sizes differ");
  }
  nq::LookupTables tables(store->codebooks());
  nq::Rng rng = nq::make_rng(a.seed, nq::kStreamEval, 0xbe);
  std::uniform_int_distribution<nq::NodeId> pick(0, static_cast<nq::NodeId>(store->num_nodes() - 1));
  std::vector<nq::NodeId> q(a.queries);
  for (auto& v : q) v = pick(rng);
  auto r = nq::bench_ranking(*store, tables, z, q, a.k);
  std::cout << "queries=" << r.queries << " candidates=" << r.candidates << " float_l2_ms=" << fmt(r.float_ms)
            << " lookup_ms=" << fmt(r.lookup_ms) << " speedup=" << fmt(r.speedup) << '\n';
  print_storage(nq::storage_report(store->num_nodes(), store->num_books(), store->book_size(), store->dim()));
  return 0;
}

// ---- paths -----------------------------------------------------------------

struct PathsArgs {
  GraphFiles graph;
  unsigned max_hop = 6;
  std::string out;
};

int cmd_paths(const PathsArgs& a) {
  auto g = a.graph.load();
  nq::PathMatrix pm(g, a.max_hop);
  if (a.out.empty()) throw UsageError("--out not given");
  nq::write_path_matrix(a.out, pm);
  std::cout << "path matrix N=" << pm.size() << " H=" << pm.max_hop() << " -> " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netquant: structure-preserving node quantisation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a stochastic block model fixture");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--nodes", synth.spec.nodes);
  s->add_option("--communities", synth.spec.communities);
  s->add_option("--p-in", synth.spec.p_in);
  s->add_option("--p-out", synth.spec.p_out);
  s->add_option("--attr-dim", synth.spec.attr_dim);
  s->add_option("--attr-on", synth.spec.attr_on);
  s->add_option("--attr-noise", synth.spec.attr_noise);
  s->add_option("--seed", synth.spec.seed);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoint, log and manifest");
  t->add_option("--config", train.config, "key=value config file");
  t->add_option("--set", train.overrides, "Override key=value (repeatable)");
  train.graph.add_options(t);
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--checkpoint-every", train.checkpoint_every, "Save a checkpoint every N epochs");
  t->add_flag("--resume", train.resume, "Continue from the checkpoint in --out");
  t->add_flag("--quiet", train.quiet);

  EncodeArgs encode;
  auto* e = app.add_subcommand("encode", "Export packed codes to a code store");
  e->add_option("--checkpoint", encode.checkpoint)->required();
  encode.graph.add_options(e);
  e->add_option("--out", encode.out)->required();

  RecommendArgs rec;
  auto* r = app.add_subcommand("recommend", "Top-k nodes by code similarity (TSV)");
  r->add_option("--store", rec.store)->required();
  r->add_option("--node", rec.node)->required();
  r->add_option("--k", rec.k);
  r->add_option("--exclude-edges", rec.exclude_edges, "Exclude the query's neighbours in this edge file");

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "Run evaluation protocols and write CSVs");
  v->add_option("--checkpoint", ev.checkpoint)->required();
  v->add_option("--store", ev.store, "Code store (exported from the checkpoint when omitted)");
  ev.graph.add_options(v);
  v->add_option("--protocol", ev.protocols, "link, classify, path or ndcg (repeatable)")->required();
  v->add_option("--variant", ev.variant, "continuous, discrete or both");
  v->add_option("--fractions", ev.fractions, "Classification training fractions");
  v->add_option("--train-ratios", ev.train_ratios, "Path prediction training ratios in percent");
  v->add_option("--repeats", ev.repeats);
  v->add_option("--pairs-per-class", ev.pairs_per_class);
  v->add_flag("--lenient-path", ev.lenient_path, "Drop empty path classes instead of failing");
  v->add_option("--k", ev.k, "NDCG cutoff");
  v->add_option("--max-queries", ev.max_queries, "NDCG query sample (0 = all)");
  v->add_option("--out", ev.out)->required();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Float L2 vs table-lookup ranking latency");
  b->add_option("--store", bench.store);
  b->add_option("--checkpoint", bench.checkpoint);
  bench.graph.add_options(b);
  b->add_option("--synthetic", bench.synthetic, "Use a random store and embeddings of this many nodes");
  b->add_option("--queries", bench.queries);
  b->add_option("--k", bench.k);
  b->add_option("--seed", bench.seed);

  PathsArgs paths;
  auto* p = app.add_subcommand("paths", "Write the shortest-path matrix (NQPM)");
  paths.graph.add_options(p);
  p->add_option("--max-hop", paths.max_hop);
  p->add_option("--out", paths.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*t) return cmd_train(train);
    if (*e) return cmd_encode(encode);
    if (*r) return cmd_recommend(rec);
    if (*v) return cmd_evaluate(ev);
    if (*b) return cmd_bench(bench);
    if (*p) return cmd_paths(paths);
  } catch (const nq::ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const nq::DimensionError& err) {
    std::cerr << "dimension error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const nq::ParseError& err) {
    std::cerr << "parse error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const nq::TrainingAborted& err) {
    std::cerr << err.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
