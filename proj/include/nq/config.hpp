#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nq/embed_model.hpp"
#include "nq/quantiser.hpp"

namespace nq {

// Every training knob, addressable by a flat dotted key (see set()).
struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 50;
  std::size_t batch_size = 100;
  std::size_t pairs_per_batch = 0;  // 0: batch_size / 2
  double lr = 0.001;
  double momentum = 0.9;
  double tau = 1.0;
  double omega = 0.5;

  double onecycle_warmup = 0.3;
  double onecycle_div = 25.0;
  double onecycle_final_div = 1e4;

  MarginConfig margin;
  bool no_rank_loss = false;
  unsigned max_hop = 6;

  std::size_t books = 8;        // M
  std::size_t book_size = 256;  // K
  std::size_t dim = 128;        // L
  std::vector<std::size_t> encoder_hidden{512, 256};
  std::vector<std::size_t> quant_hidden{256, 256};
  QuantEncoderKind quant_encoder = QuantEncoderKind::kMlp;
  DecoderKind decoder = DecoderKind::kMlp;

  bool split_enabled = true;
  double split_val_fraction = 0.05;
  double split_test_fraction = 0.10;

  std::string graph_edges;
  std::string graph_attributes;
  std::string graph_labels;

  // Throws ConfigError naming the key when it is unknown or the value does
  // not parse.
  void set(const std::string& key, const std::string& value);
  // Throws ConfigError when a value is out of range.
  void validate() const;

  std::size_t label_pairs_per_batch() const { return pairs_per_batch ? pairs_per_batch : batch_size / 2; }

  std::map<std::string, std::string> to_key_values() const;
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv);
  // "key=value" lines; '#' comments and blank lines ignored.
  static TrainConfig from_file(const std::filesystem::path& file);
  // Applies "key=value" overrides in order.
  void apply_overrides(const std::vector<std::string>& overrides);
};

}  // namespace nq
