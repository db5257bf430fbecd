#include "doctest.h"
#include "nq/bench.hpp"
#include "nq/binary_io.hpp"
#include "nq/codestore.hpp"
#include "nq/synth.hpp"
#include "nq/trainer.hpp"
#include "support.hpp"

using namespace nq;

namespace {

HardCodes random_codes(std::size_t n, std::size_t m, std::uint32_t k, std::mt19937_64& rng) {
  HardCodes q;
  q.rows = n;
  q.books = m;
  for (std::size_t i = 0; i < n * m; ++i) q.index.push_back(static_cast<std::uint32_t>(rng() % k));
  return q;
}

}  // namespace

TEST_CASE("pack/unpack round trip for several code widths") {
  std::mt19937_64 rng(1);
  for (auto [m, k] : {std::pair<std::size_t, std::size_t>{8, 256}, {2, 16}, {4, 4}, {8, 2}, {1, 256}, {3, 256}, {8, 1024}}) {
    auto q = random_codes(37, m, static_cast<std::uint32_t>(k), rng);
    auto packed = pack_codes(q, k);
    CHECK(packed.size() == 37 * m * Codebooks<float>::index_bits(static_cast<Eigen::Index>(k)) / 8);
    CHECK(unpack_codes(packed, 37, m, k).index == q.index);
  }
}

TEST_CASE("M=8, K=256 packs to exactly 8 bytes per node") {
  std::mt19937_64 rng(2);
  auto q = random_codes(2995, 8, 256, rng);
  CHECK(pack_codes(q, 256).size() == 23960);
}

TEST_CASE("codebook shape validation") {
  CHECK_THROWS(Codebooks<float>::validate_shape(3, 16));  // 12 bits per node
  CHECK_NOTHROW(Codebooks<float>::validate_shape(2, 16));
}

TEST_CASE("storage report") {
  auto r = storage_report(317080, 8, 256, 128);
  CHECK(r.float_bytes == 317080.0 * 128 * 4);
  CHECK(r.float_bytes / (1024.0 * 1024.0) == doctest::Approx(154.8).epsilon(0.001));
  CHECK(std::abs(r.float_bytes / (1024.0 * 1024.0) - 155.31) / 155.31 < 0.01);
  CHECK(r.code_bytes == 317080.0 * 8);
  CHECK(r.codebook_bytes == 8.0 * 256 * 128 * 4);
  auto empty = storage_report(0, 8, 256, 128);
  CHECK(empty.code_bytes == 0);
  CHECK(empty.codebook_bytes == r.codebook_bytes);
}

TEST_CASE("lookup tables") {
  ad::Matrix<float> eye = ad::Matrix<float>::Zero(16, 4);
  for (int j = 0; j < 4; ++j) {
    for (int a = 0; a < 4; ++a) eye(j * 4 + a, a) = 1;
  }
  LookupTables ortho(Codebooks<float>(4, 4, eye));
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::uint32_t a = 0; a < 4; ++a) {
      for (std::uint32_t b = 0; b < 4; ++b) CHECK(ortho(j, a, b) == (a == b ? 1.0f : 0.0f));
    }
  }
  auto store = random_store(50, 4, 16, 8, 3);
  LookupTables t(store.codebooks());
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::uint32_t a = 0; a < 16; ++a) {
      auto ca = store.codebooks().codeword(static_cast<Eigen::Index>(j), a).cast<double>();
      CHECK(t(j, a, a) == doctest::Approx(ca.squaredNorm()).epsilon(1e-6));
      for (std::uint32_t b = 0; b < 16; ++b) {
        auto cb = store.codebooks().codeword(static_cast<Eigen::Index>(j), b).cast<double>();
        CHECK(std::abs(t(j, a, b) - ca.dot(cb)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("code similarity equals the per-codebook dot-product sum") {
  auto store = random_store(300, 8, 256, 32, 5);
  LookupTables t(store.codebooks());
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    NodeId i = rng() % 300, j = rng() % 300;
    CHECK(std::abs(code_similarity(store, t, i, j) - nqtest::brute_force_similarity(store, i, j)) <= 1e-6);
    CHECK(code_similarity(store, t, i, j) == code_similarity(store, t, j, i));
  }
  auto all = code_similarities(store, t, 17);
  for (NodeId v = 0; v < 300; ++v) CHECK(std::abs(all[v] - code_similarity(store, t, 17, v)) <= 1e-6);
  CHECK_THROWS_AS(code_similarity(store, t, 300, 0), BoundsError);
}

TEST_CASE("recommend_top_k matches a full sort") {
  auto store = random_store(400, 4, 4, 4, 9);  // few distinct codes: many ties
  LookupTables t(store.codebooks());
  for (NodeId q : {0u, 17u, 399u}) {
    std::vector<NodeId> exclude{1, 2, 3, 250};
    auto oracle = nqtest::brute_force_ranking(store, t, q, exclude);
    auto top = recommend_top_k(store, t, q, 50, exclude);
    REQUIRE(top.items.size() == 50);
    CHECK_FALSE(top.truncated);
    for (std::size_t r = 0; r < 50; ++r) CHECK(top.items[r].node == oracle[r]);
    auto full = recommend_top_k(store, t, q, 399);
    CHECK(full.items.size() == 399);
    CHECK_FALSE(full.truncated);
    for (const auto& it : full.items) CHECK(it.node != q);
    auto over = recommend_top_k(store, t, q, 1000);
    CHECK(over.truncated);
    CHECK(over.items.size() == 399);
  }
}

TEST_CASE("top_k_from_scores uses the same tie rule") {
  std::vector<float> s{1, 3, 3, 2, 3};
  std::vector<NodeId> ex{4};
  auto top = top_k_from_scores(s, 0, 3, ex);
  REQUIRE(top.items.size() == 3);
  CHECK(top.items[0].node == 1);
  CHECK(top.items[1].node == 2);
  CHECK(top.items[2].node == 3);
}

TEST_CASE("code store files round-trip bit-exactly") {
  auto store = random_store(123, 8, 256, 16, 4);
  auto dir = nqtest::temp_dir("nqcs");
  store.save(dir / "a.nqcs");
  auto back = CodeStore::load(dir / "a.nqcs");
  CHECK(back.codes().index == store.codes().index);
  CHECK(back.codebooks().stacked() == store.codebooks().stacked());
  back.save(dir / "b.nqcs");
  CHECK(io::read_file(dir / "a.nqcs") == io::read_file(dir / "b.nqcs"));
  CHECK(store.payload_bytes() == 123 * 8);
  auto raw = io::read_file(dir / "a.nqcs");
  raw[0] = 'X';
  CHECK_THROWS_AS(CodeStore::deserialize(raw), FormatError);
}

TEST_CASE("export from a trained checkpoint") {
  SbmSpec spec;
  spec.nodes = 80;
  spec.attr_dim = 40;
  spec.p_in = 0.2;
  auto g = make_sbm(spec);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.encoder_hidden = {16};
  cfg.dim = 8;
  cfg.quant_hidden = {8};
  cfg.books = 4;
  cfg.book_size = 16;
  Trainer tr(g, cfg);
  tr.fit();
  auto ck = tr.checkpoint();
  auto s1 = export_codes(g, ck);
  auto s2 = export_codes(g, ck);
  CHECK(s1.serialize() == s2.serialize());
  CHECK(s1.num_nodes() == 80);
  CHECK(s1.num_books() == 4);

  // Reconstructions are a row-wise function of the codes through the decoder.
  auto rec = s1.reconstruct_embeddings();
  CHECK(rec.rows() == 80);
  CHECK(rec.cols() == 8);
  auto model = load_model(ck);
  auto sums = s1.codeword_sums();
  for (Eigen::Index r = 0; r < 80; ++r) {
    ad::Matrix<float> one = model->decode(sums.row(r));
    CHECK((rec.row(r) - one).cwiseAbs().maxCoeff() <= 1e-6);
  }
  for (NodeId i = 0; i < 80; ++i) {
    for (NodeId j = i + 1; j < 80; ++j) {
      if (std::equal(s1.codes().index.begin() + i * 4, s1.codes().index.begin() + i * 4 + 4,
                     s1.codes().index.begin() + j * 4)) {
        CHECK(rec.row(i) == rec.row(j));
      }
    }
  }

  SbmSpec other = spec;
  other.attr_dim = 41;
  CHECK_THROWS_AS(export_codes(make_sbm(other), ck), DimensionError);
}

TEST_CASE("bench rejects an empty query list") {
  auto store = random_store(100, 8, 256, 16, 1);
  LookupTables t(store.codebooks());
  auto z = random_embeddings(100, 16, 1);
  CHECK_THROWS(bench_ranking(store, t, z, {}, 10));
  std::vector<NodeId> q{1, 2, 3};
  auto r = bench_ranking(store, t, z, q, 10);
  CHECK(r.queries == 3);
  CHECK(r.candidates == 100);
}
