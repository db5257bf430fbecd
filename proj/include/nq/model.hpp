#pragma once

#include <span>
#include <string>
#include <vector>

#include "nq/config.hpp"
#include "nq/embed_model.hpp"
#include "nq/graph.hpp"
#include "nq/quantiser.hpp"
#include "nq/rng.hpp"

namespace nq {

struct ModelShape {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> encoder_widths{512, 256, 128};  // last entry is L
  std::vector<Eigen::Index> quant_hidden{256, 256};
  Eigen::Index books = 8;
  Eigen::Index book_size = 256;
  QuantEncoderKind quant_encoder = QuantEncoderKind::kMlp;
  DecoderKind decoder = DecoderKind::kMlp;

  Eigen::Index dim() const { return encoder_widths.back(); }

  static ModelShape from_config(const TrainConfig& cfg, std::size_t input_dim) {
    ModelShape s;
    s.input_dim = static_cast<Eigen::Index>(input_dim);
    s.encoder_widths.assign(cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    s.encoder_widths.push_back(static_cast<Eigen::Index>(cfg.dim));
    s.quant_hidden.assign(cfg.quant_hidden.begin(), cfg.quant_hidden.end());
    s.books = static_cast<Eigen::Index>(cfg.books);
    s.book_size = static_cast<Eigen::Index>(cfg.book_size);
    s.quant_encoder = cfg.quant_encoder;
    s.decoder = cfg.decoder;
    return s;
  }
};

// Attribute encoder, quantisation encoder, codebooks and decoder.
template <typename T>
class Model {
 public:
  Model(const ModelShape& shape, std::uint64_t seed) : shape_(shape) {
    Rng rng = make_rng(seed, kStreamInit);
    encoder_ = Encoder<T>(shape.input_dim, shape.encoder_widths, rng);
    quant_encoder_ = QuantEncoder<T>(shape.quant_encoder, shape.dim(), shape.quant_hidden, shape.books,
                                     shape.book_size, rng);
    codebooks_ = Codebooks<T>(shape.books, shape.book_size, shape.dim(), rng);
    decoder_ = QuantDecoder<T>(shape.decoder, shape.dim(), shape.quant_hidden, rng);
  }

  const ModelShape& shape() const { return shape_; }
  Encoder<T>& encoder() { return encoder_; }
  QuantEncoder<T>& quant_encoder() { return quant_encoder_; }
  QuantDecoder<T>& decoder() { return decoder_; }
  Codebooks<T>& codebooks() { return codebooks_; }
  const Codebooks<T>& codebooks() const { return codebooks_; }

  // Parameters in a fixed order: encoder, quant encoder, codebooks, decoder.
  void visit(const nn::ParamVisitor<T>& f) {
    encoder_.visit(f);
    quant_encoder_.visit(f);
    f(codebooks_.parameter());
    decoder_.visit(f);
  }
  void visit_buffers(const nn::BufferVisitor<T>& f) {
    encoder_.visit_buffers(f);
    quant_encoder_.visit_buffers(f);
    decoder_.visit_buffers(f);
  }
  void zero_grad() {
    visit([](ad::Parameter<T>& p) { p.zero_grad(); });
  }

  // Evaluation-mode embeddings for `nodes`, processed in chunks.
  ad::Matrix<T> embed(const SparseBinaryMatrix& x, std::span<const NodeId> nodes, std::size_t chunk = 2048) {
    ad::Matrix<T> out(static_cast<Eigen::Index>(nodes.size()), shape_.dim());
    for (std::size_t s = 0; s < nodes.size(); s += chunk) {
      auto part = nodes.subspan(s, std::min(chunk, nodes.size() - s));
      ad::Tape<T> tape;
      auto z = encoder_.forward(tape, x, part, /*training=*/false);
      out.middleRows(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(part.size())) = z.value();
    }
    return out;
  }
  ad::Matrix<T> embed_all(const SparseBinaryMatrix& x) {
    std::vector<NodeId> all(x.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<NodeId>(i);
    return embed(x, all);
  }

  // Evaluation-mode logits (rows x M*K).
  ad::Matrix<T> logits(const ad::Matrix<T>& z) {
    ad::Tape<T> tape;
    return quant_encoder_.forward(tape, tape.constant(z), codebooks_, /*training=*/false).value();
  }

  // Hard codes without noise: argmax of softmax(logits) per codebook.
  HardCodes assign_codes(const ad::Matrix<T>& z, std::size_t chunk = 2048) {
    HardCodes all;
    all.books = static_cast<std::size_t>(shape_.books);
    all.rows = static_cast<std::size_t>(z.rows());
    all.index.reserve(all.rows * all.books);
    for (Eigen::Index s = 0; s < z.rows(); s += static_cast<Eigen::Index>(chunk)) {
      auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), z.rows() - s);
      ad::Tape<T> tape;
      auto lg = quant_encoder_.forward(tape, tape.constant(z.middleRows(s, n)), codebooks_, false);
      auto u = gumbel_softmax(lg, shape_.book_size, T(1), nullptr);
      auto q = hard_assign(u.value(), shape_.book_size);
      all.index.insert(all.index.end(), q.index.begin(), q.index.end());
    }
    return all;
  }

  // Evaluation-mode decoder applied to codeword mixtures.
  ad::Matrix<T> decode(const ad::Matrix<T>& mix) {
    ad::Tape<T> tape;
    return decoder_.forward(tape, tape.constant(mix), /*training=*/false).value();
  }

 private:
  ModelShape shape_;
  Encoder<T> encoder_;
  QuantEncoder<T> quant_encoder_;
  Codebooks<T> codebooks_;
  QuantDecoder<T> decoder_;
};

}  // namespace nq
