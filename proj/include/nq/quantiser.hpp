#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "nq/autodiff.hpp"
#include "nq/nn.hpp"
#include "nq/rng.hpp"

namespace nq {

// M codebooks of K codewords of width L, stored stacked as an (M*K) x L
// parameter: rows [j*K, (j+1)*K) belong to codebook j.
template <typename T>
class Codebooks {
 public:
  Codebooks() = default;
  Codebooks(Eigen::Index m, Eigen::Index k, Eigen::Index l, Rng& rng) : m_(m), k_(k) {
    validate_shape(m, k);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(l)));
    ad::Matrix<T> c(m * k, l);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<T>(dist(rng));
    stacked_ = ad::Parameter<T>("codebooks", std::move(c));
  }
  Codebooks(Eigen::Index m, Eigen::Index k, ad::Matrix<T> stacked) : m_(m), k_(k) {
    validate_shape(m, k);
    if (stacked.rows() != m * k) throw DimensionError("codebooks: stacked rows != M*K");
    stacked_ = ad::Parameter<T>("codebooks", std::move(stacked));
  }

  Eigen::Index num_books() const { return m_; }
  Eigen::Index book_size() const { return k_; }
  Eigen::Index width() const { return stacked_.value.cols(); }
  const ad::Matrix<T>& stacked() const { return stacked_.value; }
  auto codeword(Eigen::Index book, Eigen::Index index) const { return stacked_.value.row(book * k_ + index); }
  ad::Parameter<T>& parameter() { return stacked_; }

  // Bits per index, ceil(log2 K).
  static unsigned index_bits(Eigen::Index k) {
    unsigned b = 0;
    while ((Eigen::Index{1} << b) < k) ++b;
    return b;
  }
  static void validate_shape(Eigen::Index m, Eigen::Index k) {
    if (m < 1 || k < 2) throw std::invalid_argument("codebooks: need M >= 1 and K >= 2");
    if ((m * index_bits(k)) % 8 != 0) throw std::invalid_argument("codebooks: M*log2(K) must be a multiple of 8");
  }

 private:
  Eigen::Index m_ = 0;
  Eigen::Index k_ = 0;
  ad::Parameter<T> stacked_;
};

// Per node, one codeword index per codebook.
struct HardCodes {
  std::size_t rows = 0;
  std::size_t books = 0;
  std::vector<std::uint32_t> index;  // rows x books

  std::uint32_t operator()(std::size_t r, std::size_t j) const { return index[r * books + j]; }
};

enum class QuantEncoderKind { kMlp, kDistance };
enum class DecoderKind { kMlp, kIdentity };

// Produces M blocks of K logits per embedding row. kMlp: dense + BN + ReLU
// layers followed by a linear head; kDistance: negative squared distance to
// every codeword (plain product quantisation, no learned encoder).
template <typename T>
class QuantEncoder {
 public:
  QuantEncoder() = default;
  QuantEncoder(QuantEncoderKind kind, Eigen::Index l, const std::vector<Eigen::Index>& hidden, Eigen::Index m,
               Eigen::Index k, Rng& rng)
      : kind_(kind) {
    if (kind_ == QuantEncoderKind::kMlp) {
      auto widths = hidden;
      widths.push_back(m * k);
      mlp_ = nn::Mlp<T>("quant_encoder", l, widths, /*linear_output=*/true, rng);
    }
  }

  QuantEncoderKind kind() const { return kind_; }

  ad::Var<T> forward(ad::Tape<T>& tape, const ad::Var<T>& z, Codebooks<T>& cb, bool training) {
    if (kind_ == QuantEncoderKind::kMlp) return mlp_.forward(tape, z, training);
    // -||z - c||^2 up to a per-row constant: 2 z.c - ||c||^2
    auto c = tape.parameter(cb.parameter());
    auto cross = ad::scale(ad::matmul_bt(z, c), T(2));
    auto norms = ad::scale(ad::transpose(ad::row_squared_norms(c)), T(-1));
    return ad::add_row(cross, norms);
  }

  void visit(const nn::ParamVisitor<T>& f) { mlp_.visit(f); }
  void visit_buffers(const nn::BufferVisitor<T>& f) { mlp_.visit_buffers(f); }

 private:
  QuantEncoderKind kind_ = QuantEncoderKind::kMlp;
  nn::Mlp<T> mlp_;
};

// Maps a codeword mixture back to embedding space; mirrors the encoder
// (dense + BN + ReLU layers, linear output of width L) or is the identity.
template <typename T>
class QuantDecoder {
 public:
  QuantDecoder() = default;
  QuantDecoder(DecoderKind kind, Eigen::Index l, const std::vector<Eigen::Index>& hidden, Rng& rng) : kind_(kind) {
    if (kind_ == DecoderKind::kMlp) {
      auto widths = hidden;
      widths.push_back(l);
      mlp_ = nn::Mlp<T>("decoder", l, widths, /*linear_output=*/true, rng);
    }
  }

  DecoderKind kind() const { return kind_; }

  ad::Var<T> forward(ad::Tape<T>& tape, const ad::Var<T>& mix, bool training) {
    if (kind_ == DecoderKind::kIdentity) return mix;
    return mlp_.forward(tape, mix, training);
  }

  void visit(const nn::ParamVisitor<T>& f) { mlp_.visit(f); }
  void visit_buffers(const nn::BufferVisitor<T>& f) { mlp_.visit_buffers(f); }

 private:
  DecoderKind kind_ = DecoderKind::kMlp;
  nn::Mlp<T> mlp_;
};

// Standard Gumbel samples -log(-log(U)). U takes the top 53 bits of each
// draw plus half a step, so it lies strictly inside (0, 1).
// Float models draw 23 bits per sample so that u stays below 1 after rounding.
template <typename T>
ad::Matrix<T> gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> u(rows, cols);
  if constexpr (std::is_same_v<T, float>) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = (static_cast<float>(rng() >> 41) + 0.5f) * 0x1.0p-23f;
  } else {
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = (static_cast<T>(rng() >> 11) + T(0.5)) * T(0x1.0p-53);
  }
  return (-(-u.log()).log()).matrix();
}

// Per codebook block of K logits: softmax((logits + g) / tau). A null
// `noise` gives the deterministic evaluation form softmax(logits / tau).
template <typename T>
ad::Var<T> gumbel_softmax(const ad::Var<T>& logits, Eigen::Index k, std::type_identity_t<T> tau, const ad::Matrix<std::type_identity_t<T>>* noise) {
  if (!(tau > T(0))) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  ad::Tape<T>& tape = *logits.tape();
  ad::Var<T> x = logits;
  if (noise != nullptr) x = ad::add(x, tape.constant(*noise));
  if (tau != T(1)) x = ad::scale(x, T(1) / tau);
  return ad::softmax_blocks(x, k);
}

// Index of the largest entry of every K-block; ties go to the lowest index.
template <typename T>
HardCodes hard_assign(const ad::Matrix<T>& u, Eigen::Index k) {
  if (k <= 0 || u.cols() % k != 0) throw DimensionError("hard_assign: width not divisible by K");
  HardCodes q;
  q.rows = static_cast<std::size_t>(u.rows());
  q.books = static_cast<std::size_t>(u.cols() / k);
  q.index.resize(q.rows * q.books);
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    for (std::size_t j = 0; j < q.books; ++j) {
      const T* block = u.data() + r * u.cols() + static_cast<Eigen::Index>(j) * k;
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < k; ++c) {
        if (block[c] > block[best]) best = c;
      }
      q.index[r * q.books + j] = static_cast<std::uint32_t>(best);
    }
  }
  return q;
}

// Concatenated one-hot rows (rows x M*K) for the given code rows.
template <typename T>
ad::Matrix<T> one_hot(const HardCodes& q, std::span<const std::size_t> rows, Eigen::Index k) {
  ad::Matrix<T> out = ad::Matrix<T>::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(q.books) * k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < q.books; ++j) {
      auto idx = q(rows[r], j);
      if (idx >= static_cast<std::uint32_t>(k)) throw BoundsError("one_hot: code index >= K");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j) * k + idx) = T(1);
    }
  }
  return out;
}

// Soft path: sum_j u_j C_j, i.e. u (B x MK) times the stacked codebooks.
template <typename T>
ad::Var<T> codeword_mix(ad::Tape<T>& tape, const ad::Var<T>& u, Codebooks<T>& cb) {
  if (u.cols() != cb.num_books() * cb.book_size()) throw DimensionError("codeword_mix: assignment width != M*K");
  return ad::matmul(u, tape.parameter(cb.parameter()));
}

// Hard path: sum_j C_j[q_j] per row, as a plain matrix.
template <typename T>
ad::Matrix<T> codeword_sum(const HardCodes& q, const Codebooks<T>& cb) {
  if (q.books != static_cast<std::size_t>(cb.num_books())) throw DimensionError("codeword_sum: codebook count mismatch");
  ad::Matrix<T> out = ad::Matrix<T>::Zero(static_cast<Eigen::Index>(q.rows), cb.width());
  for (std::size_t r = 0; r < q.rows; ++r) {
    for (std::size_t j = 0; j < q.books; ++j) {
      if (q(r, j) >= static_cast<std::uint32_t>(cb.book_size())) throw BoundsError("codeword_sum: code index >= K");
      out.row(static_cast<Eigen::Index>(r)) += cb.codeword(static_cast<Eigen::Index>(j), q(r, j));
    }
  }
  return out;
}

// Mean over rows of ||z_i - r_i||^2.
template <typename T>
ad::Var<T> quantisation_loss(const ad::Var<T>& z, const ad::Var<T>& reconstruction) {
  if (z.rows() == 0) throw std::invalid_argument("quantisation_loss: empty batch");
  return ad::scale(ad::sum(ad::square(ad::sub(z, reconstruction))), T(1) / static_cast<T>(z.rows()));
}

// Sum over triplets of max(u_a . q_n - u_a . q_p + 1, 0); the one-hot rows
// are constants.
template <typename T>
ad::Var<T> rank_loss(const ad::Var<T>& u_anchor, const ad::Matrix<T>& q_pos, const ad::Matrix<T>& q_neg) {
  ad::Tape<T>& tape = *u_anchor.tape();
  auto pos = ad::inner_product_rows(u_anchor, tape.constant(q_pos));
  auto neg = ad::inner_product_rows(u_anchor, tape.constant(q_neg));
  return ad::sum(ad::relu(ad::add_scalar(ad::sub(neg, pos), T(1))));
}

}  // namespace nq
