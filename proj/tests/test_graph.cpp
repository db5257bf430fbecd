#include <random>

#include "doctest.h"
#include "nq/graph.hpp"
#include "nq/path_matrix.hpp"
#include "nq/sampling.hpp"
#include "support.hpp"

using namespace nq;

namespace {

Graph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, e);
}

Graph triangle() {
  std::vector<Edge> e{{0, 1}, {1, 2}, {2, 0}};
  return Graph(3, e);
}

}  // namespace

TEST_CASE("load_graph reads a triangle") {
  auto dir = nqtest::temp_dir("triangle");
  nqtest::write_text(dir / "e.txt", "0 1\n1 2\n2 0\n");
  auto g = load_graph(dir / "e.txt");
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_edges() == 3);
}

TEST_CASE("load_graph drops self-loops with a warning and deduplicates") {
  auto dir = nqtest::temp_dir("selfloop");
  nqtest::write_text(dir / "e.txt", "# comment\n0 0\n0 1\n1 0\n1 2\n");
  Diagnostics diag;
  diag.quiet = true;
  auto g = load_graph(dir / "e.txt", std::nullopt, std::nullopt, &diag);
  CHECK(g.num_edges() == 2);
  CHECK_FALSE(g.has_edge(0, 0));
  CHECK(diag.warnings.size() >= 1);
}

TEST_CASE("load_graph reports the failing line") {
  auto dir = nqtest::temp_dir("malformed");
  nqtest::write_text(dir / "e.txt", "0 1\n1 x\n");
  try {
    load_graph(dir / "e.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  nqtest::write_text(dir / "big.txt", "0 4294967296\n");
  CHECK_THROWS_AS(load_graph(dir / "big.txt"), BoundsError);
}

TEST_CASE("attributes and labels load alongside edges") {
  auto dir = nqtest::temp_dir("attrs");
  nqtest::write_text(dir / "e.txt", "0 1\n1 2\n");
  nqtest::write_text(dir / "a.txt", "# dim=4\n0 3\n\n1 2\n");
  nqtest::write_text(dir / "l.txt", "0 0\n1 1,2\n");
  auto g = load_graph(dir / "e.txt", dir / "a.txt", dir / "l.txt");
  REQUIRE(g.has_attributes());
  CHECK(g.attributes().cols() == 4);
  CHECK(g.attributes().row(0).size() == 2);
  CHECK(g.attributes().row(1).empty());
  CHECK(g.labels(1).size() == 2);
  CHECK(g.labels(2).empty());
  auto primary = g.primary_labels();
  CHECK(primary == std::vector<int>{0, 1, -1});
}

TEST_CASE("path graph neighbours") {
  auto g = path_graph(5);
  auto nb = g.neighbours(2);
  CHECK(std::vector<NodeId>(nb.begin(), nb.end()) == std::vector<NodeId>{1, 3});
}

TEST_CASE("shortest paths: hand cases") {
  auto tri = triangle();
  PathMatrix pm(tri, 3);
  for (NodeId i = 0; i < 3; ++i) {
    for (NodeId j = 0; j < 3; ++j) CHECK(pm(i, j) == (i == j ? 0 : 1));
  }
  auto p5 = path_graph(5);
  PathMatrix pp(p5, 2);
  CHECK(pp(0, 3) == kUnreachable);
  CHECK(pp(0, 2) == 2);
}

TEST_CASE("shortest paths match Floyd-Warshall on random graphs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + rng() % 60;
    const double p = 0.02 + 0.1 * std::uniform_real_distribution<double>(0, 1)(rng);
    auto g = nqtest::random_graph(n, p, rng);
    const unsigned h = 1 + rng() % 6;
    PathMatrix pm(g, h);
    auto oracle = nqtest::floyd_warshall(g, h);
    auto dense = pm.dense();
    CHECK(std::equal(dense.begin(), dense.end(), oracle.begin()));
    // The lazy BFS-backed form agrees with the dense one.
    PathMatrix lazy(g, h, /*dense_limit=*/0, /*cache_rows=*/3);
    for (NodeId i = 0; i < n; ++i) {
      auto row = lazy.row_shared(i);
      CHECK(std::equal(row->begin(), row->end(), oracle.begin() + i * n));
    }
  }
}

TEST_CASE("NQPM round trip") {
  std::mt19937_64 rng(3);
  auto g = nqtest::random_graph(40, 0.08, rng);
  PathMatrix pm(g, 5);
  auto dir = nqtest::temp_dir("nqpm");
  write_path_matrix(dir / "p.nqpm", pm);
  auto back = read_path_matrix(dir / "p.nqpm");
  CHECK(back.size() == 40);
  CHECK(back.max_hop() == 5);
  CHECK(std::equal(pm.dense().begin(), pm.dense().end(), back.dense().begin()));
  CHECK(std::filesystem::file_size(dir / "p.nqpm") == 16 + 40 * 40);
}

TEST_CASE("triplet sampling respects hop order") {
  auto g = path_graph(6);
  PathMatrix pm(g, 6);
  TripletSampler s(pm);
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    auto t = s.sample(rng);
    CHECK(t.delta_ap < t.delta_an);
    CHECK(pm(t.anchor, t.positive) == t.delta_ap);
    CHECK(pm(t.anchor, t.negative) == t.delta_an);
  }
  auto t0 = s.sample_for(0, rng);
  CHECK(t0.anchor == 0);
}

TEST_CASE("triangle with H=1 is degenerate") {
  auto tri = triangle();
  PathMatrix pm(tri, 1);
  CHECK_THROWS_AS(TripletSampler{pm}, DegenerateGraphError);
}

TEST_CASE("star graph: centre has one ring, leaves give (leaf, centre, leaf)") {
  std::vector<Edge> e{{0, 1}, {0, 2}, {0, 3}};
  Graph star(4, e);
  PathMatrix pm(star, 2);
  TripletSampler s(pm);
  CHECK_FALSE(s.qualifies(0));
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    auto t = s.sample(rng);
    CHECK(t.anchor != 0);
    CHECK(t.positive == 0);
    CHECK(t.negative != 0);
    CHECK(t.negative != t.anchor);
  }
  auto t = s.sample_for(0, rng);
  CHECK(t.anchor != 0);
}

TEST_CASE("label pairs") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}};
  Graph g(4, e);
  Rng rng(1);
  SUBCASE("single class: every pair is same-label") {
    g.set_labels(1, {{0}, {0}, {0}, {0}});
    LabelPairSampler s(g, 1.0, rng);
    for (const auto& p : s.sample(50, rng)) CHECK(p.same_label);
  }
  SUBCASE("multi-label intersection") {
    g.set_labels(4, {{1, 2}, {2, 3}, {0}, {3}});
    CHECK(labels_intersect(g, 0, 1));
    CHECK_FALSE(labels_intersect(g, 0, 2));
    LabelPairSampler s(g, 1.0, rng);
    for (const auto& p : s.sample(50, rng)) CHECK(p.same_label == labels_intersect(g, p.i, p.j));
  }
  SUBCASE("fewer than two labelled nodes") {
    g.set_labels(1, {{0}, {}, {}, {}});
    CHECK_THROWS_AS(LabelPairSampler(g, 1.0, rng), DegenerateGraphError);
  }
}
