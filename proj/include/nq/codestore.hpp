#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "nq/checkpoint.hpp"
#include "nq/graph.hpp"
#include "nq/model.hpp"
#include "nq/quantiser.hpp"

namespace nq {

// Packs and unpacks ceil(log2 K)-bit indices, LSB first, row by row. Each
// node's row occupies exactly M*bits/8 bytes.
std::vector<std::uint8_t> pack_codes(const HardCodes& q, std::size_t book_size);
HardCodes unpack_codes(std::span<const std::uint8_t> packed, std::size_t rows, std::size_t books,
                       std::size_t book_size);

// Discrete node representation: packed codes, codebooks and decoder.
//
// NQCS file layout (little-endian):
//   "NQCS" | u16 version | u64 N | u16 M | u32 K | u32 L
//   packed codes, N*M*bits/8 bytes
//   codebooks, M*K*L f32 (codebook-major, then codeword, then dimension)
//   decoder: NQCK container bytes prefixed by a u64 length (length 0 means
//   identity decoder)
class CodeStore {
 public:
  static constexpr std::uint16_t kVersion = 1;

  CodeStore() = default;
  // `decoder` holds a "decoder" text section (kind, hidden widths) and the
  // decoder's param./buffer. tensors; an empty checkpoint means identity.
  CodeStore(HardCodes codes, Codebooks<float> codebooks, Checkpoint decoder);

  std::size_t num_nodes() const { return codes_.rows; }
  std::size_t num_books() const { return codes_.books; }
  std::size_t book_size() const { return static_cast<std::size_t>(codebooks_.book_size()); }
  std::size_t dim() const { return static_cast<std::size_t>(codebooks_.width()); }
  const HardCodes& codes() const { return codes_; }
  std::uint32_t code(std::size_t node, std::size_t book) const { return codes_(node, book); }
  const Codebooks<float>& codebooks() const { return codebooks_; }
  std::size_t payload_bytes() const;
  bool has_decoder() const { return decoder_.has_text("decoder"); }
  // Book-major byte copy of the codes (book j at [j*N, (j+1)*N)) when
  // K <= 256, otherwise empty.
  const std::vector<std::uint8_t>& narrow_codes() const { return narrow_; }

  // z~_i = D(sum_m C_m[Q[i][m]]) for every node.
  ad::Matrix<float> reconstruct_embeddings() const;
  // sum_m C_m[Q[i][m]] without the decoder.
  ad::Matrix<float> codeword_sums() const;

  std::vector<std::uint8_t> serialize() const;
  static CodeStore deserialize(std::vector<std::uint8_t> bytes);
  void save(const std::filesystem::path& file) const;
  static CodeStore load(const std::filesystem::path& file);

 private:
  HardCodes codes_;
  Codebooks<float> codebooks_;
  Checkpoint decoder_;
  std::vector<std::uint8_t> narrow_;
};

// Eval-mode codes for every node of `g` from a trained model.
// Throws DimensionError when the graph's features do not match the model.
CodeStore export_codes(const Graph& g, const Checkpoint& ck);

// Per codebook, the K x K table of codeword inner products.
class LookupTables {
 public:
  explicit LookupTables(const Codebooks<float>& cb);

  std::size_t num_books() const { return tables_.size(); }
  std::size_t book_size() const { return k_; }
  float operator()(std::size_t book, std::uint32_t a, std::uint32_t b) const {
    return tables_[book][static_cast<std::size_t>(a) * k_ + b];
  }
  const float* row(std::size_t book, std::uint32_t a) const { return tables_[book].data() + static_cast<std::size_t>(a) * k_; }

 private:
  std::size_t k_ = 0;
  std::vector<std::vector<float>> tables_;
};

// sum_m T_m[Q[i][m]][Q[j][m]], accumulated in double. Throws BoundsError for an
// out-of-range id.
double code_similarity(const CodeStore& store, const LookupTables& tables, NodeId i, NodeId j);

// Similarity of `query` to every node, one table row per codebook.
std::vector<float> code_similarities(const CodeStore& store, const LookupTables& tables, NodeId query);

struct Ranked {
  NodeId node = 0;
  float score = 0;
};

struct TopK {
  std::vector<Ranked> items;
  bool truncated = false;  // fewer than k candidates were available
};

// Orders by score descending, then node id ascending.
bool ranks_before(const Ranked& a, const Ranked& b);

// Top-k by code similarity, excluding the query and `exclude`.
TopK recommend_top_k(const CodeStore& store, const LookupTables& tables, NodeId query, std::size_t k,
                     std::span<const NodeId> exclude = {});

// Top-k of an arbitrary score vector under the same exclusion and tie rules.
TopK top_k_from_scores(std::span<const float> scores, NodeId query, std::size_t k, std::span<const NodeId> exclude);

struct StorageReport {
  double code_bytes = 0;
  double codebook_bytes = 0;
  double float_bytes = 0;
};

// codes = N*M*log2(K)/8, codebooks = M*K*L*4, float baseline = N*L*4.
StorageReport storage_report(std::size_t n, std::size_t m, std::size_t k, std::size_t l);

}  // namespace nq
