#include "nq/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace nq {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "expected unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_uint(key, item));
  }
  return out;
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string format_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  using Setter = std::function<void(TrainConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"seed", [](TrainConfig& c, const std::string& s) { c.seed = parse_uint("seed", s); }},
      {"epochs", [](TrainConfig& c, const std::string& s) { c.epochs = parse_uint("epochs", s); }},
      {"batch_size", [](TrainConfig& c, const std::string& s) { c.batch_size = parse_uint("batch_size", s); }},
      {"pairs_per_batch", [](TrainConfig& c, const std::string& s) { c.pairs_per_batch = parse_uint("pairs_per_batch", s); }},
      {"lr", [](TrainConfig& c, const std::string& s) { c.lr = parse_double("lr", s); }},
      {"momentum", [](TrainConfig& c, const std::string& s) { c.momentum = parse_double("momentum", s); }},
      {"tau", [](TrainConfig& c, const std::string& s) { c.tau = parse_double("tau", s); }},
      {"omega", [](TrainConfig& c, const std::string& s) { c.omega = parse_double("omega", s); }},
      {"onecycle.warmup", [](TrainConfig& c, const std::string& s) { c.onecycle_warmup = parse_double("onecycle.warmup", s); }},
      {"onecycle.div", [](TrainConfig& c, const std::string& s) { c.onecycle_div = parse_double("onecycle.div", s); }},
      {"onecycle.final_div", [](TrainConfig& c, const std::string& s) { c.onecycle_final_div = parse_double("onecycle.final_div", s); }},
      {"margin.mode",
       [](TrainConfig& c, const std::string& s) {
         if (s == "adaptive") {
           c.margin.mode = MarginMode::kAdaptive;
         } else if (s == "fixed") {
           c.margin.mode = MarginMode::kFixed;
         } else {
           throw ConfigError("margin.mode", "expected adaptive|fixed, got '" + s + "'");
         }
       }},
      {"margin.value", [](TrainConfig& c, const std::string& s) { c.margin.fixed_value = parse_double("margin.value", s); }},
      {"margin.semantic", [](TrainConfig& c, const std::string& s) { c.margin.semantic_margin = parse_double("margin.semantic", s); }},
      {"fraction_T", [](TrainConfig& c, const std::string& s) { c.margin.fraction_t = parse_double("fraction_T", s); }},
      {"no_rank_loss", [](TrainConfig& c, const std::string& s) { c.no_rank_loss = parse_bool("no_rank_loss", s); }},
      {"max_hop", [](TrainConfig& c, const std::string& s) { c.max_hop = static_cast<unsigned>(parse_uint("max_hop", s)); }},
      {"M", [](TrainConfig& c, const std::string& s) { c.books = parse_uint("M", s); }},
      {"K", [](TrainConfig& c, const std::string& s) { c.book_size = parse_uint("K", s); }},
      {"L", [](TrainConfig& c, const std::string& s) { c.dim = parse_uint("L", s); }},
      {"encoder.hidden", [](TrainConfig& c, const std::string& s) { c.encoder_hidden = parse_list("encoder.hidden", s); }},
      {"quant.hidden", [](TrainConfig& c, const std::string& s) { c.quant_hidden = parse_list("quant.hidden", s); }},
      {"quant.encoder",
       [](TrainConfig& c, const std::string& s) {
         if (s == "mlp") {
           c.quant_encoder = QuantEncoderKind::kMlp;
         } else if (s == "distance") {
           c.quant_encoder = QuantEncoderKind::kDistance;
         } else {
           throw ConfigError("quant.encoder", "expected mlp|distance, got '" + s + "'");
         }
       }},
      {"quant.decoder",
       [](TrainConfig& c, const std::string& s) {
         if (s == "mlp") {
           c.decoder = DecoderKind::kMlp;
         } else if (s == "identity") {
           c.decoder = DecoderKind::kIdentity;
         } else {
           throw ConfigError("quant.decoder", "expected mlp|identity, got '" + s + "'");
         }
       }},
      {"split.enabled", [](TrainConfig& c, const std::string& s) { c.split_enabled = parse_bool("split.enabled", s); }},
      {"split.val_fraction", [](TrainConfig& c, const std::string& s) { c.split_val_fraction = parse_double("split.val_fraction", s); }},
      {"split.test_fraction", [](TrainConfig& c, const std::string& s) { c.split_test_fraction = parse_double("split.test_fraction", s); }},
      {"graph.edges", [](TrainConfig& c, const std::string& s) { c.graph_edges = s; }},
      {"graph.attributes", [](TrainConfig& c, const std::string& s) { c.graph_attributes = s; }},
      {"graph.labels", [](TrainConfig& c, const std::string& s) { c.graph_labels = s; }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError(key, "unknown configuration key");
  it->second(*this, v);
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size", "must be >= 2");
  if (!(lr > 0)) throw ConfigError("lr", "must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (!(tau > 0)) throw ConfigError("tau", "must be > 0");
  if (!(omega > 0)) throw ConfigError("omega", "must be > 0");
  if (!(onecycle_warmup > 0 && onecycle_warmup < 1)) throw ConfigError("onecycle.warmup", "must lie in (0, 1)");
  if (!(onecycle_div >= 1)) throw ConfigError("onecycle.div", "must be >= 1");
  if (!(onecycle_final_div >= 1)) throw ConfigError("onecycle.final_div", "must be >= 1");
  if (margin.mode == MarginMode::kFixed && !(margin.fixed_value > 0)) throw ConfigError("margin.value", "must be > 0");
  if (!(margin.semantic_margin > 0)) throw ConfigError("margin.semantic", "must be > 0");
  if (!(margin.fraction_t > 0 && margin.fraction_t <= 1)) throw ConfigError("fraction_T", "must lie in (0, 1]");
  if (max_hop < 2 || max_hop > 254) throw ConfigError("max_hop", "must lie in [2, 254]");
  if (books < 1) throw ConfigError("M", "must be >= 1");
  if (book_size < 2) throw ConfigError("K", "must be >= 2");
  if ((books * Codebooks<float>::index_bits(static_cast<Eigen::Index>(book_size))) % 8 != 0) {
    throw ConfigError("K", "M*log2(K) must be a multiple of 8");
  }
  if (dim < 1) throw ConfigError("L", "must be >= 1");
  if (quant_encoder == QuantEncoderKind::kDistance && decoder != DecoderKind::kIdentity) {
    throw ConfigError("quant.encoder", "distance encoder requires quant.decoder=identity");
  }
  if (split_enabled) {
    if (!(split_val_fraction >= 0 && split_test_fraction > 0 && split_val_fraction + split_test_fraction < 1)) {
      throw ConfigError("split.test_fraction", "split fractions must be non-negative with a sum below 1");
    }
  }
}

std::map<std::string, std::string> TrainConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["epochs"] = std::to_string(epochs);
  kv["batch_size"] = std::to_string(batch_size);
  kv["pairs_per_batch"] = std::to_string(pairs_per_batch);
  kv["lr"] = format_double(lr);
  kv["momentum"] = format_double(momentum);
  kv["tau"] = format_double(tau);
  kv["omega"] = format_double(omega);
  kv["onecycle.warmup"] = format_double(onecycle_warmup);
  kv["onecycle.div"] = format_double(onecycle_div);
  kv["onecycle.final_div"] = format_double(onecycle_final_div);
  kv["margin.mode"] = margin.mode == MarginMode::kAdaptive ? "adaptive" : "fixed";
  kv["margin.value"] = format_double(margin.fixed_value);
  kv["margin.semantic"] = format_double(margin.semantic_margin);
  kv["fraction_T"] = format_double(margin.fraction_t);
  kv["no_rank_loss"] = no_rank_loss ? "true" : "false";
  kv["max_hop"] = std::to_string(max_hop);
  kv["M"] = std::to_string(books);
  kv["K"] = std::to_string(book_size);
  kv["L"] = std::to_string(dim);
  kv["encoder.hidden"] = format_list(encoder_hidden);
  kv["quant.hidden"] = format_list(quant_hidden);
  kv["quant.encoder"] = quant_encoder == QuantEncoderKind::kMlp ? "mlp" : "distance";
  kv["quant.decoder"] = decoder == DecoderKind::kMlp ? "mlp" : "identity";
  kv["split.enabled"] = split_enabled ? "true" : "false";
  kv["split.val_fraction"] = format_double(split_val_fraction);
  kv["split.test_fraction"] = format_double(split_test_fraction);
  kv["graph.edges"] = graph_edges;
  kv["graph.attributes"] = graph_attributes;
  kv["graph.labels"] = graph_labels;
  return kv;
}

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open config file");
  TrainConfig c;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key=value");
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

void TrainConfig::apply_overrides(const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must be key=value");
    set(trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

}  // namespace nq
