#include "nq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nq {

double auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw std::invalid_argument("auc: need positives and negatives");
  std::vector<std::pair<double, int>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, 1);
  for (double s : negative) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  // Sum of midranks of the positives.
  double rank_sum = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].second) rank_sum += mid;
    }
    i = j;
  }
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

F1Report f1_scores(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("f1: size mismatch");
  std::vector<double> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= num_classes || p >= num_classes) throw std::out_of_range("f1: class id out of range");
    if (t == p) {
      tp[t] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  F1Report r;
  r.per_class.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0, count = 0, tp_all = 0, fp_all = 0, fn_all = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    r.per_class[c] = 2 * tp[c] / denom;
    sum += r.per_class[c];
    count += 1;
  }
  r.macro = count > 0 ? sum / count : 0.0;
  const double denom = 2 * tp_all + fp_all + fn_all;
  r.micro = denom > 0 ? 2 * tp_all / denom : 0.0;
  return r;
}

double dcg_at_k(std::span<const int> ranked_relevance, std::size_t k) {
  double dcg = 0;
  const std::size_t n = std::min(k, ranked_relevance.size());
  for (std::size_t i = 0; i < n; ++i) dcg += ranked_relevance[i] / std::log2(static_cast<double>(i) + 2.0);
  return dcg;
}

double ndcg_at_k(std::span<const int> ranked_relevance, std::size_t num_relevant, std::size_t k) {
  const std::size_t ideal_hits = std::min({num_relevant, k, ranked_relevance.size()});
  double ideal = 0;
  for (std::size_t i = 0; i < ideal_hits; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  if (ideal == 0) return 0.0;
  return dcg_at_k(ranked_relevance, k) / ideal;
}

}  // namespace nq
