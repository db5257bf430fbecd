#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nq/classifier.hpp"
#include "nq/codestore.hpp"
#include "nq/graph.hpp"
#include "nq/path_matrix.hpp"

namespace nq {

FeatureMatrix to_features(const ad::Matrix<float>& z);

// ---- link prediction -------------------------------------------------------

struct SplitSpec {
  double val_edge_fraction = 0.05;
  double test_edge_fraction = 0.10;
  std::uint64_t seed = 1;
};

// Held-out positives with one uniform non-edge negative each. Negatives are
// distinct, never edges of the full graph, and disjoint between val and test.
struct EdgeSplit {
  std::vector<Edge> train;
  std::vector<Edge> val;
  std::vector<Edge> test;
  std::vector<Edge> val_negative;
  std::vector<Edge> test_negative;
};

// Throws std::invalid_argument for fractions outside [0, 1) or summing to
// >= 1, and when no test edge would be held out.
EdgeSplit split_edges(const Graph& g, const SplitSpec& spec);

using PairScorer = std::function<double(NodeId, NodeId)>;

// -||z_i - z_j||_2; `z` must outlive the scorer.
PairScorer l2_scorer(const ad::Matrix<float>& z);
// code_similarity through the lookup tables.
PairScorer code_scorer(const CodeStore& store, const LookupTables& tables);

// Throws std::invalid_argument when there are no held-out edges.
double link_prediction_auc(const PairScorer& score, std::span<const Edge> positive, std::span<const Edge> negative);

// ---- node classification ---------------------------------------------------

struct ClassificationResult {
  double train_fraction = 0;
  double macro_f1 = 0;
  double micro_f1 = 0;
};

// Labels of -1 are skipped. Each repeat draws round(fraction * labelled)
// training nodes, redrawing (up to 100 times) until every class is present,
// and scores the rest. Throws DegenerateGraphError for fewer than two
// classes or when no valid draw is found.
std::vector<ClassificationResult> node_classification(const FeatureMatrix& embeddings, std::span<const int> labels,
                                                      std::span<const double> train_fractions,
                                                      std::size_t repeats = 10, std::uint64_t seed = 1,
                                                      const LRConfig& lr = {});

// ---- path prediction -------------------------------------------------------

inline constexpr std::size_t kPathClasses = 5;
inline constexpr int kPathClassNo = 4;
std::string path_class_name(int cls);
// 0..3 for 1..4 hops, kPathClassNo for longer or unreachable, -1 for i == j.
inline int path_class(Hop h) {
  if (h == 0) return -1;
  return h <= 4 ? static_cast<int>(h) - 1 : kPathClassNo;
}

struct PathPair {
  NodeId i = 0;
  NodeId j = 0;
  int cls = 0;
};

struct PathSampleSpec {
  std::size_t pairs_per_class = 1000;  // the "no" class takes up to twice this
  std::uint64_t seed = 1;
  // Drop an empty class with a warning instead of failing.
  bool drop_empty_classes = false;
};

// Uniform sample of unordered pairs per class. Classes short of their quota
// contribute all their pairs and a warning. Throws DegenerateGraphError
// naming the first empty class unless drop_empty_classes is set. Requires
// max_hop >= 4.
std::vector<PathPair> sample_path_pairs(const PathMatrix& pm, const PathSampleSpec& spec, Diagnostics* diag = nullptr);

struct PathResult {
  double train_ratio = 0;
  double macro_f1 = 0;
  double micro_f1 = 0;
  double average_f1 = 0;          // (macro + micro) / 2
  std::vector<double> per_class;  // kPathClasses entries, NaN when absent
};

// Features v_i * v_j (elementwise); one-vs-rest LR trained on the first
// train_ratio share of a seeded shuffle, F1 on the remainder.
std::vector<PathResult> path_prediction(const FeatureMatrix& embeddings, std::span<const PathPair> pairs,
                                        std::span<const double> train_ratios, std::uint64_t seed = 1,
                                        const LRConfig& lr = {});

// ---- node recommendation ---------------------------------------------------

// Fills `scores` (size N, higher is better) for one query node.
using QueryScorer = std::function<void(NodeId, std::vector<float>&)>;

QueryScorer l2_query_scorer(const ad::Matrix<float>& z);
QueryScorer code_query_scorer(const CodeStore& store, const LookupTables& tables);

struct NdcgSpec {
  double holdout = 0.10;
  std::size_t k = 50;
  std::size_t repeats = 10;
  std::uint64_t seed = 1;
  std::size_t max_queries = 0;  // 0 means every node
};

struct NdcgResult {
  double ndcg = 0;
  std::size_t evaluated = 0;  // (node, repeat) pairs averaged
  std::size_t excluded = 0;   // nodes with no held-out neighbour, per repeat
};

// Per repeat and node, round(holdout * degree) neighbours are held out as
// the relevant set; the rest are training neighbours and are excluded from
// the ranking together with the query.
NdcgResult node_recommendation_ndcg(const QueryScorer& score, const Graph& g, const NdcgSpec& spec,
                                    Diagnostics* diag = nullptr);

}  // namespace nq
