#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nq {

// Mann-Whitney rank statistic: P(score_pos > score_neg), ties counted half.
// Throws std::invalid_argument when either side is empty.
double auc(std::span<const double> positive, std::span<const double> negative);

struct F1Report {
  double macro = 0;
  double micro = 0;
  std::vector<double> per_class;  // NaN for classes absent from truth and prediction
};

// Single-label F1. Classes never seen in truth or prediction are left out of
// the macro average.
F1Report f1_scores(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

// DCG@k = sum_{i<=k} rel_i / log2(i + 1) over a ranked relevance list.
double dcg_at_k(std::span<const int> ranked_relevance, std::size_t k);
// DCG@k divided by the DCG of the ideal ordering of `num_relevant` hits.
double ndcg_at_k(std::span<const int> ranked_relevance, std::size_t num_relevant, std::size_t k);

}  // namespace nq
