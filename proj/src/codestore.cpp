#include "nq/codestore.hpp"

#include <algorithm>
#include <limits>

#if defined(__AVX2__) || defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "nq/binary_io.hpp"
#include "nq/trainer.hpp"

namespace nq {

namespace {

std::size_t row_bytes(std::size_t books, std::size_t book_size) {
  const auto bits = Codebooks<float>::index_bits(static_cast<Eigen::Index>(book_size));
  return books * bits / 8;
}

std::vector<Eigen::Index> parse_widths(const std::string& s) {
  std::vector<Eigen::Index> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    if (next > pos) out.push_back(std::stoll(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> pack_codes(const HardCodes& q, std::size_t book_size) {
  Codebooks<float>::validate_shape(static_cast<Eigen::Index>(q.books), static_cast<Eigen::Index>(book_size));
  const auto bits = Codebooks<float>::index_bits(static_cast<Eigen::Index>(book_size));
  const std::size_t stride = row_bytes(q.books, book_size);
  std::vector<std::uint8_t> out(q.rows * stride, 0);
  for (std::size_t r = 0; r < q.rows; ++r) {
    std::size_t bit = 0;
    std::uint8_t* row = out.data() + r * stride;
    for (std::size_t j = 0; j < q.books; ++j) {
      const auto v = q(r, j);
      if (v >= book_size) throw BoundsError("pack_codes: index >= K");
      for (unsigned b = 0; b < bits; ++b, ++bit) {
        if ((v >> b) & 1u) row[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
      }
    }
  }
  return out;
}

HardCodes unpack_codes(std::span<const std::uint8_t> packed, std::size_t rows, std::size_t books,
                       std::size_t book_size) {
  Codebooks<float>::validate_shape(static_cast<Eigen::Index>(books), static_cast<Eigen::Index>(book_size));
  const auto bits = Codebooks<float>::index_bits(static_cast<Eigen::Index>(book_size));
  const std::size_t stride = row_bytes(books, book_size);
  if (packed.size() != rows * stride) throw FormatError("unpack_codes: payload size mismatch");
  HardCodes q;
  q.rows = rows;
  q.books = books;
  q.index.resize(rows * books);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* row = packed.data() + r * stride;
    std::size_t bit = 0;
    for (std::size_t j = 0; j < books; ++j) {
      std::uint32_t v = 0;
      for (unsigned b = 0; b < bits; ++b, ++bit) {
        if ((row[bit / 8] >> (bit % 8)) & 1u) v |= 1u << b;
      }
      if (v >= book_size) throw FormatError("unpack_codes: index >= K");
      q.index[r * books + j] = v;
    }
  }
  return q;
}

CodeStore::CodeStore(HardCodes codes, Codebooks<float> codebooks, Checkpoint decoder)
    : codes_(std::move(codes)), codebooks_(std::move(codebooks)), decoder_(std::move(decoder)) {
  if (codes_.books != static_cast<std::size_t>(codebooks_.num_books())) {
    throw DimensionError("code store: code width != codebook count");
  }
  for (auto v : codes_.index) {
    if (v >= static_cast<std::uint32_t>(codebooks_.book_size())) throw BoundsError("code store: index >= K");
  }
  if (codebooks_.book_size() <= 256) {
    narrow_.resize(codes_.index.size());
    for (std::size_t r = 0; r < codes_.rows; ++r) {
      for (std::size_t j = 0; j < codes_.books; ++j) narrow_[j * codes_.rows + r] = static_cast<std::uint8_t>(codes_(r, j));
    }
  }
}

std::size_t CodeStore::payload_bytes() const { return codes_.rows * row_bytes(codes_.books, book_size()); }

ad::Matrix<float> CodeStore::codeword_sums() const { return codeword_sum(codes_, codebooks_); }

ad::Matrix<float> CodeStore::reconstruct_embeddings() const {
  ad::Matrix<float> mix = codeword_sums();
  if (!has_decoder()) return mix;
  auto meta = parse_key_values(decoder_.text("decoder"));
  Rng unused(0);
  QuantDecoder<float> dec(DecoderKind::kMlp, codebooks_.width(), parse_widths(meta.at("hidden")), unused);
  dec.visit([&](ad::Parameter<float>& p) { p.value = decoder_.tensor("param." + p.name); });
  dec.visit_buffers([&](const std::string& name, ad::Matrix<float>& b) { b = decoder_.tensor("buffer." + name); });
  ad::Matrix<float> out(mix.rows(), mix.cols());
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index s = 0; s < mix.rows(); s += kChunk) {
    auto n = std::min(kChunk, mix.rows() - s);
    ad::Tape<float> tape;
    out.middleRows(s, n) = dec.forward(tape, tape.constant(mix.middleRows(s, n)), false).value();
  }
  return out;
}

std::vector<std::uint8_t> CodeStore::serialize() const {
  io::Writer w;
  w.magic("NQCS");
  w.u16(kVersion);
  w.u64(codes_.rows);
  w.u16(static_cast<std::uint16_t>(codes_.books));
  w.u32(static_cast<std::uint32_t>(book_size()));
  w.u32(static_cast<std::uint32_t>(dim()));
  w.bytes(pack_codes(codes_, book_size()));
  const auto& c = codebooks_.stacked();
  w.f32s({c.data(), static_cast<std::size_t>(c.size())});
  if (has_decoder()) {
    auto bytes = decoder_.serialize();
    w.u64(bytes.size());
    w.bytes(bytes);
  } else {
    w.u64(0);
  }
  return w.buffer();
}

CodeStore CodeStore::deserialize(std::vector<std::uint8_t> bytes) {
  io::Reader r(std::move(bytes));
  r.expect_magic("NQCS");
  if (auto v = r.u16(); v != kVersion) throw FormatError("unsupported NQCS version " + std::to_string(v));
  const auto n = r.u64();
  const auto m = r.u16();
  const auto k = r.u32();
  const auto l = r.u32();
  const auto packed = r.bytes(n * row_bytes(m, k));
  auto codes = unpack_codes(packed, n, m, k);
  ad::Matrix<float> stacked(static_cast<Eigen::Index>(m) * k, l);
  r.f32s({stacked.data(), static_cast<std::size_t>(stacked.size())});
  Checkpoint dec;
  if (auto len = r.u64(); len > 0) {
    auto raw = r.bytes(len);
    dec = Checkpoint::deserialize({raw.begin(), raw.end()});
  }
  if (!r.done()) throw FormatError("trailing bytes after NQCS decoder section");
  return CodeStore(std::move(codes), Codebooks<float>(m, k, std::move(stacked)), std::move(dec));
}

void CodeStore::save(const std::filesystem::path& file) const {
  io::Writer w;
  w.bytes(serialize());
  w.save(file);
}

CodeStore CodeStore::load(const std::filesystem::path& file) { return deserialize(io::read_file(file)); }

CodeStore export_codes(const Graph& g, const Checkpoint& ck) {
  auto model = load_model(ck);
  auto x = g.input_features();
  if (static_cast<Eigen::Index>(x.cols()) != model->shape().input_dim) {
    throw DimensionError("graph feature dimension " + std::to_string(x.cols()) + " != checkpoint input dimension " +
                         std::to_string(model->shape().input_dim));
  }
  auto z = model->embed_all(x);
  auto codes = model->assign_codes(z);
  Checkpoint dec;
  if (model->decoder().kind() == DecoderKind::kMlp) {
    auto cfg = checkpoint_config(ck);
    std::string hidden;
    for (std::size_t i = 0; i < cfg.quant_hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(cfg.quant_hidden[i]);
    dec.set_text("decoder", "hidden=" + hidden + "\nkind=mlp\n");
    model->decoder().visit([&](ad::Parameter<float>& p) { dec.add_tensor("param." + p.name, p.value); });
    model->decoder().visit_buffers(
        [&](const std::string& name, ad::Matrix<float>& b) { dec.add_tensor("buffer." + name, b); });
  }
  return CodeStore(std::move(codes), model->codebooks(), std::move(dec));
}

LookupTables::LookupTables(const Codebooks<float>& cb) : k_(static_cast<std::size_t>(cb.book_size())) {
  const auto k = cb.book_size();
  tables_.resize(static_cast<std::size_t>(cb.num_books()));
  for (Eigen::Index j = 0; j < cb.num_books(); ++j) {
    auto block = cb.stacked().middleRows(j * k, k);
    ad::Matrix<float> t = (block.cast<double>() * block.cast<double>().transpose()).cast<float>();
    tables_[j].assign(t.data(), t.data() + t.size());
  }
}

double code_similarity(const CodeStore& store, const LookupTables& tables, NodeId i, NodeId j) {
  if (i >= store.num_nodes() || j >= store.num_nodes()) throw BoundsError("code_similarity: node id out of range");
  double s = 0.0;
  for (std::size_t m = 0; m < store.num_books(); ++m) s += tables(m, store.code(i, m), store.code(j, m));
  return s;
}

namespace {

constexpr std::size_t kScanBlock = 1024;

// Book-major byte codes; sums books in order 0..M-1 like code_similarity.
void score_block_narrow(const std::uint8_t* codes, std::size_t n, std::size_t m, const float* const* rows,
                        std::size_t start, std::size_t len, float* out) {
  std::size_t i = 0;
#if defined(__AVX512F__)
  for (; i + 16 <= len; i += 16) {
    __m512 acc = _mm512_setzero_ps();
    for (std::size_t j = 0; j < m; ++j) {
      const __m128i c = _mm_loadu_si128(reinterpret_cast<const __m128i*>(codes + j * n + start + i));
      acc = _mm512_add_ps(acc, _mm512_i32gather_ps(_mm512_cvtepu8_epi32(c), rows[j], 4));
    }
    _mm512_storeu_ps(out + i, acc);
  }
#elif defined(__AVX2__)
  for (; i + 8 <= len; i += 8) {
    __m256 acc = _mm256_setzero_ps();
    for (std::size_t j = 0; j < m; ++j) {
      const __m128i c = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(codes + j * n + start + i));
      acc = _mm256_add_ps(acc, _mm256_i32gather_ps(rows[j], _mm256_cvtepu8_epi32(c), 4));
    }
    _mm256_storeu_ps(out + i, acc);
  }
#endif
  for (; i < len; ++i) {
    float s = 0.0f;
    for (std::size_t j = 0; j < m; ++j) s += rows[j][codes[j * n + start + i]];
    out[i] = s;
  }
}

void score_block_wide(const std::uint32_t* codes, std::size_t m, const float* const* rows, std::size_t len,
                      float* out) {
  for (std::size_t i = 0; i < len; ++i) {
    const std::uint32_t* c = codes + i * m;
    float s = 0.0f;
    for (std::size_t j = 0; j < m; ++j) s += rows[j][c[j]];
    out[i] = s;
  }
}

// Scores every node against `query` in blocks; f(first_node, scores, len).
template <typename F>
void scan_similarities(const CodeStore& store, const LookupTables& tables, NodeId query, F&& f) {
  const std::size_t m = store.num_books();
  std::vector<const float*> rows(m);
  for (std::size_t j = 0; j < m; ++j) rows[j] = tables.row(j, store.code(query, j));
  const std::size_t n = store.num_nodes();
  alignas(64) float buf[kScanBlock];
  for (std::size_t start = 0; start < n; start += kScanBlock) {
    const std::size_t len = std::min(kScanBlock, n - start);
    if (!store.narrow_codes().empty()) {
      score_block_narrow(store.narrow_codes().data(), n, m, rows.data(), start, len, buf);
    } else {
      score_block_wide(store.codes().index.data() + start * m, m, rows.data(), len, buf);
    }
    f(static_cast<NodeId>(start), buf, len);
  }
}

// Keeps the k best candidates seen so far; the heap front is the weakest.
// With a positive slack it also remembers every candidate that came within
// `slack` of the running k-th score, so a caller whose scores carry a bounded
// error can re-rank the band exactly.
class TopKCollector {
 public:
  TopKCollector(std::size_t k, NodeId query, std::span<const NodeId> exclude, float slack = 0.0f)
      : k_(k), slack_(slack), skip_(exclude.begin(), exclude.end()) {
    if (k < 1) throw std::invalid_argument("top-k: k must be >= 1");
    skip_.push_back(query);
    std::sort(skip_.begin(), skip_.end());
    skip_.erase(std::unique(skip_.begin(), skip_.end()), skip_.end());
    heap_.reserve(k + 1);
  }

  void offer_block(NodeId first, const float* scores, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
      if (scores[i] < floor_) continue;
      offer(first + static_cast<NodeId>(i), scores[i]);
    }
  }

  void offer(NodeId v, float score) {
    if (slack_ > 0.0f) {
      if (score < floor_ || std::binary_search(skip_.begin(), skip_.end(), v)) return;
      band_.push_back({v, score});
      if (band_.size() >= 2 * k_ + 1024) prune_band();
    }
    if (heap_.size() == k_) {
      const Ranked& worst = heap_.front();
      if (score < worst.score || (score == worst.score && v > worst.node)) return;
    }
    if (slack_ == 0.0f && std::binary_search(skip_.begin(), skip_.end(), v)) return;
    const Ranked c{v, score};
    if (heap_.size() == k_) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = c;
    } else {
      heap_.push_back(c);
    }
    std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    if (heap_.size() == k_) floor_ = heap_.front().score - slack_;
  }

  TopK finish(std::size_t num_candidates) {
    std::sort_heap(heap_.begin(), heap_.end(), ranks_before);
    return wrap(std::move(heap_), num_candidates);
  }

  // Re-scores the band with `exact` and returns its k best under the same rule.
  template <typename Exact>
  TopK finish_exact(std::size_t num_candidates, Exact exact) {
    prune_band();
    std::vector<std::pair<double, NodeId>> scored;
    scored.reserve(band_.size());
    for (const auto& c : band_) scored.emplace_back(exact(c.node), c.node);
    const auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    const std::size_t keep = std::min(k_, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    std::vector<Ranked> items;
    items.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) items.push_back({scored[i].second, static_cast<float>(scored[i].first)});
    return wrap(std::move(items), num_candidates);
  }

 private:
  void prune_band() {
    std::erase_if(band_, [&](const Ranked& c) { return c.score < floor_; });
  }

  TopK wrap(std::vector<Ranked> items, std::size_t num_candidates) const {
    std::size_t excluded = 0;
    for (NodeId v : skip_) excluded += v < num_candidates ? 1 : 0;
    TopK out;
    out.truncated = num_candidates - excluded < k_;
    out.items = std::move(items);
    return out;
  }

  std::size_t k_;
  float slack_;
  float floor_ = -std::numeric_limits<float>::infinity();
  std::vector<NodeId> skip_;
  std::vector<Ranked> heap_;
  std::vector<Ranked> band_;
};

}  // namespace

std::vector<float> code_similarities(const CodeStore& store, const LookupTables& tables, NodeId query) {
  if (query >= store.num_nodes()) throw BoundsError("code_similarities: node id out of range");
  std::vector<float> out(store.num_nodes());
  scan_similarities(store, tables, query,
                    [&](NodeId first, const float* s, std::size_t len) { std::copy(s, s + len, out.begin() + first); });
  return out;
}

bool ranks_before(const Ranked& a, const Ranked& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.node < b.node;
}

TopK top_k_from_scores(std::span<const float> scores, NodeId query, std::size_t k, std::span<const NodeId> exclude) {
  TopKCollector top(k, query, exclude);
  top.offer_block(0, scores.data(), scores.size());
  return top.finish(scores.size());
}

TopK recommend_top_k(const CodeStore& store, const LookupTables& tables, NodeId query, std::size_t k,
                     std::span<const NodeId> exclude) {
  if (query >= store.num_nodes()) throw BoundsError("recommend: node id out of range");
  // Float sums of M terms differ from the double sum by at most M * 2^-24 *
  // sum_m max|row_m|; candidates within twice that of the k-th float score are
  // re-ranked with code_similarity.
  double bound = 0.0;
  for (std::size_t j = 0; j < store.num_books(); ++j) {
    const float* r = tables.row(j, store.code(query, j));
    float mx = 0.0f;
    for (std::size_t b = 0; b < tables.book_size(); ++b) mx = std::max(mx, std::abs(r[b]));
    bound += mx;
  }
  bound *= static_cast<double>(store.num_books()) * 0x1.0p-24;
  const float slack = std::max(static_cast<float>(2.0 * bound) * 1.0001f, std::numeric_limits<float>::min());
  TopKCollector top(k, query, exclude, slack);
  scan_similarities(store, tables, query,
                    [&](NodeId first, const float* s, std::size_t len) { top.offer_block(first, s, len); });
  return top.finish_exact(store.num_nodes(), [&](NodeId v) { return code_similarity(store, tables, query, v); });
}

StorageReport storage_report(std::size_t n, std::size_t m, std::size_t k, std::size_t l) {
  const auto bits = Codebooks<float>::index_bits(static_cast<Eigen::Index>(k));
  StorageReport r;
  r.code_bytes = static_cast<double>(n) * static_cast<double>(m) * bits / 8.0;
  r.codebook_bytes = static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(l) * 4.0;
  r.float_bytes = static_cast<double>(n) * static_cast<double>(l) * 4.0;
  return r;
}

}  // namespace nq
