#include "nq/protocols.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "nq/metrics.hpp"
#include "nq/rng.hpp"

namespace nq {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

FeatureMatrix to_features(const ad::Matrix<float>& z) { return z.cast<double>(); }

EdgeSplit split_edges(const Graph& g, const SplitSpec& spec) {
  const double v = spec.val_edge_fraction;
  const double t = spec.test_edge_fraction;
  if (!(v >= 0 && v < 1 && t >= 0 && t < 1 && v + t < 1)) {
    throw std::invalid_argument("split: fractions must lie in [0, 1) and sum below 1");
  }
  Rng rng = make_rng(spec.seed, kStreamSplit);
  auto edges = g.edges();
  std::shuffle(edges.begin(), edges.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(t * static_cast<double>(edges.size())));
  const auto n_val = static_cast<std::size_t>(std::llround(v * static_cast<double>(edges.size())));
  if (n_test == 0) throw std::invalid_argument("split: no held-out test edges");

  EdgeSplit s;
  s.test.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test),
               edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), edges.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());

  const std::size_t n = g.num_nodes();
  const double total_pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  if (static_cast<double>(n_test + n_val) > total_pairs - static_cast<double>(edges.size())) {
    throw std::invalid_argument("split: graph too dense for one negative per held-out edge");
  }
  std::unordered_set<std::uint64_t> used;
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  auto draw = [&](std::size_t count, std::vector<Edge>& out) {
    while (out.size() < count) {
      NodeId a = pick(rng), b = pick(rng);
      if (a == b || g.has_edge(a, b)) continue;
      if (!used.insert(pair_key(a, b)).second) continue;
      out.emplace_back(std::min(a, b), std::max(a, b));
    }
  };
  draw(n_test, s.test_negative);
  draw(n_val, s.val_negative);
  return s;
}

PairScorer l2_scorer(const ad::Matrix<float>& z) {
  return [&z](NodeId a, NodeId b) {
    double s = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double d = static_cast<double>(z(a, c)) - static_cast<double>(z(b, c));
      s += d * d;
    }
    return -std::sqrt(s);
  };
}

PairScorer code_scorer(const CodeStore& store, const LookupTables& tables) {
  return [&store, &tables](NodeId a, NodeId b) { return code_similarity(store, tables, a, b); };
}

double link_prediction_auc(const PairScorer& score, std::span<const Edge> positive, std::span<const Edge> negative) {
  if (positive.empty()) throw std::invalid_argument("link prediction: no held-out edges");
  std::vector<double> pos, neg;
  pos.reserve(positive.size());
  neg.reserve(negative.size());
  for (const auto& [a, b] : positive) pos.push_back(score(a, b));
  for (const auto& [a, b] : negative) neg.push_back(score(a, b));
  return auc(pos, neg);
}

std::vector<ClassificationResult> node_classification(const FeatureMatrix& embeddings, std::span<const int> labels,
                                                      std::span<const double> train_fractions, std::size_t repeats,
                                                      std::uint64_t seed, const LRConfig& lr) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw std::invalid_argument("node classification: label count does not match embedding rows");
  }
  std::vector<Eigen::Index> labelled;
  std::set<int> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) {
      labelled.push_back(static_cast<Eigen::Index>(i));
      classes.insert(labels[i]);
    }
  }
  if (classes.size() < 2) throw DegenerateGraphError("node classification: fewer than two classes");
  const std::size_t num_classes = static_cast<std::size_t>(*classes.rbegin()) + 1;

  std::vector<ClassificationResult> out;
  for (std::size_t fi = 0; fi < train_fractions.size(); ++fi) {
    const double f = train_fractions[fi];
    if (!(f > 0 && f < 1)) throw std::invalid_argument("node classification: train fraction must lie in (0, 1)");
    const auto n_train = static_cast<std::size_t>(std::llround(f * static_cast<double>(labelled.size())));
    if (n_train < classes.size() || n_train >= labelled.size()) {
      throw DegenerateGraphError("node classification: train fraction " + std::to_string(f) +
                                 " cannot cover every class and leave a test set");
    }
    ClassificationResult res;
    res.train_fraction = f;
    for (std::size_t r = 0; r < repeats; ++r) {
      Rng rng = make_rng(seed, kStreamEval, fi * 1000 + r);
      std::vector<Eigen::Index> order = labelled;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        std::shuffle(order.begin(), order.end(), rng);
        std::set<int> seen;
        for (std::size_t i = 0; i < n_train; ++i) seen.insert(labels[static_cast<std::size_t>(order[i])]);
        ok = seen.size() == classes.size();
      }
      if (!ok) throw DegenerateGraphError("node classification: no training draw covered every class in 100 attempts");
      FeatureMatrix xtr(static_cast<Eigen::Index>(n_train), embeddings.cols());
      FeatureMatrix xte(static_cast<Eigen::Index>(order.size() - n_train), embeddings.cols());
      std::vector<int> ytr, yte;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const int y = labels[static_cast<std::size_t>(order[i])];
        if (i < n_train) {
          xtr.row(static_cast<Eigen::Index>(i)) = embeddings.row(order[i]);
          ytr.push_back(y);
        } else {
          xte.row(static_cast<Eigen::Index>(i - n_train)) = embeddings.row(order[i]);
          yte.push_back(y);
        }
      }
      auto model = LRClassifier::fit(xtr, ytr, num_classes, lr);
      auto pred = model.predict(xte);
      auto f1 = f1_scores(yte, pred, num_classes);
      res.macro_f1 += f1.macro / static_cast<double>(repeats);
      res.micro_f1 += f1.micro / static_cast<double>(repeats);
    }
    out.push_back(res);
  }
  return out;
}

std::string path_class_name(int cls) {
  if (cls >= 0 && cls < kPathClassNo) return std::to_string(cls + 1);
  if (cls == kPathClassNo) return "no";
  return "?";
}

std::vector<PathPair> sample_path_pairs(const PathMatrix& pm, const PathSampleSpec& spec, Diagnostics* diag) {
  if (pm.max_hop() < 4) throw std::invalid_argument("path prediction: path matrix must resolve 4 hops");
  if (spec.pairs_per_class == 0) throw std::invalid_argument("path prediction: pairs_per_class must be positive");
  const std::size_t n = pm.size();
  std::array<std::size_t, kPathClasses> quota;
  quota.fill(spec.pairs_per_class);
  quota[kPathClassNo] = 2 * spec.pairs_per_class;

  // Per-class reservoir sampling over the visited pairs.
  Rng rng = make_rng(spec.seed, kStreamEval, 0x9a7);
  std::array<std::vector<PathPair>, kPathClasses> keep;
  std::array<std::size_t, kPathClasses> seen{};
  auto offer = [&](NodeId i, NodeId j, Hop h) {
    const int c = path_class(h);
    if (c < 0) return;
    const auto k = static_cast<std::size_t>(c);
    ++seen[k];
    if (keep[k].size() < quota[k]) {
      keep[k].push_back({i, j, c});
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, seen[k] - 1);
      const auto slot = pick(rng);
      if (slot < quota[k]) keep[k][slot] = {i, j, c};
    }
  };
  constexpr std::size_t kEnumerateLimit = 20000;
  if (n <= kEnumerateLimit) {
    for (NodeId i = 0; i < n; ++i) {
      auto row = pm.row_shared(i);
      for (NodeId j = i + 1; j < n; ++j) offer(i, j, (*row)[j]);
    }
  } else {
    std::unordered_set<std::uint64_t> visited;
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
    const std::size_t budget = 200 * spec.pairs_per_class * kPathClasses;
    for (std::size_t t = 0; t < budget; ++t) {
      NodeId a = pick(rng), b = pick(rng);
      if (a == b || !visited.insert(pair_key(a, b)).second) continue;
      offer(std::min(a, b), std::max(a, b), pm(a, b));
    }
  }

  std::vector<PathPair> out;
  for (std::size_t c = 0; c < kPathClasses; ++c) {
    const std::string name = path_class_name(static_cast<int>(c));
    if (keep[c].empty()) {
      if (!spec.drop_empty_classes) throw DegenerateGraphError("path prediction: class '" + name + "' has no pairs");
      warn(diag, "path prediction: class '" + name + "' has no pairs and is dropped");
      continue;
    }
    if (keep[c].size() < quota[c]) {
      warn(diag, "path prediction: class '" + name + "' has " + std::to_string(keep[c].size()) + " of " +
                     std::to_string(quota[c]) + " requested pairs");
    }
    std::sort(keep[c].begin(), keep[c].end(),
              [](const PathPair& a, const PathPair& b) { return pair_key(a.i, a.j) < pair_key(b.i, b.j); });
    out.insert(out.end(), keep[c].begin(), keep[c].end());
  }
  return out;
}

std::vector<PathResult> path_prediction(const FeatureMatrix& embeddings, std::span<const PathPair> pairs,
                                        std::span<const double> train_ratios, std::uint64_t seed,
                                        const LRConfig& lr) {
  if (pairs.empty()) throw std::invalid_argument("path prediction: no pairs");
  const Eigen::Index d = embeddings.cols();
  FeatureMatrix features(static_cast<Eigen::Index>(pairs.size()), d);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].i >= embeddings.rows() || pairs[p].j >= embeddings.rows()) {
      throw BoundsError("path prediction: pair node out of range");
    }
    features.row(static_cast<Eigen::Index>(p)) =
        embeddings.row(pairs[p].i).cwiseProduct(embeddings.row(pairs[p].j));
  }
  std::vector<PathResult> out;
  for (std::size_t ri = 0; ri < train_ratios.size(); ++ri) {
    const double ratio = train_ratios[ri];
    if (!(ratio > 0 && ratio < 1)) throw std::invalid_argument("path prediction: train ratio must lie in (0, 1)");
    Rng rng = make_rng(seed, kStreamEval, 0x5a7000 + ri);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pairs.size())));
    if (n_train == 0 || n_train >= pairs.size()) {
      throw std::invalid_argument("path prediction: train ratio leaves an empty side");
    }
    FeatureMatrix xtr(static_cast<Eigen::Index>(n_train), d);
    FeatureMatrix xte(static_cast<Eigen::Index>(pairs.size() - n_train), d);
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto row = features.row(static_cast<Eigen::Index>(order[i]));
      if (i < n_train) {
        xtr.row(static_cast<Eigen::Index>(i)) = row;
        ytr.push_back(pairs[order[i]].cls);
      } else {
        xte.row(static_cast<Eigen::Index>(i - n_train)) = row;
        yte.push_back(pairs[order[i]].cls);
      }
    }
    auto model = LRClassifier::fit(xtr, ytr, kPathClasses, lr);
    auto f1 = f1_scores(yte, model.predict(xte), kPathClasses);
    PathResult res;
    res.train_ratio = ratio;
    res.macro_f1 = f1.macro;
    res.micro_f1 = f1.micro;
    res.average_f1 = 0.5 * (f1.macro + f1.micro);
    res.per_class = f1.per_class;
    out.push_back(std::move(res));
  }
  return out;
}

QueryScorer l2_query_scorer(const ad::Matrix<float>& z) {
  return [&z](NodeId q, std::vector<float>& scores) {
    scores.resize(static_cast<std::size_t>(z.rows()));
    const auto zq = z.row(q);
    for (Eigen::Index i = 0; i < z.rows(); ++i) scores[i] = -(z.row(i) - zq).norm();
  };
}

QueryScorer code_query_scorer(const CodeStore& store, const LookupTables& tables) {
  return [&store, &tables](NodeId q, std::vector<float>& scores) { scores = code_similarities(store, tables, q); };
}

NdcgResult node_recommendation_ndcg(const QueryScorer& score, const Graph& g, const NdcgSpec& spec,
                                    Diagnostics* diag) {
  if (spec.k < 1) throw std::invalid_argument("ndcg: k must be >= 1");
  if (!(spec.holdout > 0 && spec.holdout < 1)) throw std::invalid_argument("ndcg: holdout must lie in (0, 1)");
  const std::size_t n = g.num_nodes();
  std::vector<NodeId> queries(n);
  std::iota(queries.begin(), queries.end(), NodeId{0});
  if (spec.max_queries > 0 && spec.max_queries < n) {
    Rng qrng = make_rng(spec.seed, kStreamEval, 0xd0c);
    std::shuffle(queries.begin(), queries.end(), qrng);
    queries.resize(spec.max_queries);
    std::sort(queries.begin(), queries.end());
  }

  NdcgResult res;
  double sum = 0;
  std::vector<float> scores;
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    Rng rng = make_rng(spec.seed, kStreamEval, 0xd0c000 + r);
    std::size_t excluded = 0;
    for (NodeId q : queries) {
      std::vector<NodeId> nbrs(g.neighbours(q).begin(), g.neighbours(q).end());
      std::shuffle(nbrs.begin(), nbrs.end(), rng);
      const auto held = static_cast<std::size_t>(std::llround(spec.holdout * static_cast<double>(nbrs.size())));
      if (held == 0) {
        ++excluded;
        continue;
      }
      std::vector<NodeId> relevant(nbrs.begin(), nbrs.begin() + static_cast<std::ptrdiff_t>(held));
      std::vector<NodeId> train(nbrs.begin() + static_cast<std::ptrdiff_t>(held), nbrs.end());
      std::sort(relevant.begin(), relevant.end());
      score(q, scores);
      auto top = top_k_from_scores(scores, q, spec.k, train);
      std::vector<int> rel;
      rel.reserve(top.items.size());
      for (const auto& it : top.items) rel.push_back(std::binary_search(relevant.begin(), relevant.end(), it.node) ? 1 : 0);
      sum += ndcg_at_k(rel, held, spec.k);
      ++res.evaluated;
    }
    res.excluded += excluded;
    if (r == 0 && excluded > 0) {
      warn(diag, "ndcg: " + std::to_string(excluded) + " node(s) without a held-out neighbour excluded");
    }
  }
  res.ndcg = res.evaluated > 0 ? sum / static_cast<double>(res.evaluated) : 0.0;
  return res;
}

}  // namespace nq
