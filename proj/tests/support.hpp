#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "nq/autodiff.hpp"
#include "nq/codestore.hpp"
#include "nq/graph.hpp"
#include "nq/path_matrix.hpp"

namespace nqtest {

using Mat = nq::ad::Matrix<double>;
using VarD = nq::ad::Var<double>;
using TapeD = nq::ad::Tape<double>;

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

inline nq::Graph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(p);
  std::vector<nq::Edge> edges;
  for (nq::NodeId i = 0; i < n; ++i) {
    for (nq::NodeId j = i + 1; j < n; ++j) {
      if (keep(rng)) edges.emplace_back(i, j);
    }
  }
  return nq::Graph(n, edges);
}

// All-pairs hop counts by Floyd-Warshall; entries above max_hop become
// kUnreachable.
inline std::vector<nq::Hop> floyd_warshall(const nq::Graph& g, unsigned max_hop) {
  const std::size_t n = g.num_nodes();
  constexpr int kInf = std::numeric_limits<int>::max() / 4;
  std::vector<int> d(n * n, kInf);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0;
  for (const auto& [a, b] : g.edges()) {
    d[a * n + b] = 1;
    d[b * n + a] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const int dik = d[i * n + k];
      if (dik == kInf) continue;
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::min(d[i * n + j], dik + d[k * n + j]);
    }
  }
  std::vector<nq::Hop> out(n * n);
  for (std::size_t i = 0; i < n * n; ++i) {
    out[i] = d[i] <= static_cast<int>(max_hop) ? static_cast<nq::Hop>(d[i]) : nq::kUnreachable;
  }
  return out;
}

inline Mat random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Entries pushed at least `gap` away from zero, so ReLU-like kinks sit far
// outside the finite-difference stencil.
inline Mat away_from_zero(Mat m, double gap = 0.05) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    if (std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
  }
  return m;
}

using Builder = std::function<VarD(TapeD&, const std::vector<VarD>&)>;

struct GradCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

inline double rel_error(const Mat& a, const Mat& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / denom;
}

// Reverse-mode gradients of a scalar builder against central differences,
// norm-wise relative error per input.
inline GradCheck grad_check(const Builder& f, const std::vector<Mat>& inputs, double h = 1e-3) {
  auto eval = [&](const std::vector<Mat>& xs) {
    TapeD tape;
    std::vector<VarD> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return f(tape, vars).value()(0, 0);
  };
  TapeD tape;
  std::vector<VarD> vars;
  for (const auto& x : inputs) vars.push_back(tape.input(x));
  auto loss = f(tape, vars);
  tape.backward(loss);

  GradCheck res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Mat fd = Mat::Zero(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index e = 0; e < inputs[k].size(); ++e) {
      auto xs = inputs;
      xs[k].data()[e] += h;
      const double up = eval(xs);
      xs[k].data()[e] -= 2 * h;
      const double down = eval(xs);
      fd.data()[e] = (up - down) / (2 * h);
    }
    res.max_rel_error = std::max(res.max_rel_error, rel_error(tape.grad(vars[k]), fd));
    ++res.checked;
  }
  return res;
}

// sum_m <C_m[Q[i][m]], C_m[Q[j][m]]> from the codewords directly.
inline double brute_force_similarity(const nq::CodeStore& s, nq::NodeId i, nq::NodeId j) {
  double total = 0;
  for (std::size_t m = 0; m < s.num_books(); ++m) {
    const auto a = s.codebooks().codeword(static_cast<Eigen::Index>(m), s.code(i, m));
    const auto b = s.codebooks().codeword(static_cast<Eigen::Index>(m), s.code(j, m));
    total += a.cast<double>().dot(b.cast<double>());
  }
  return total;
}

// Full sort of table similarities under (score desc, id asc).
inline std::vector<nq::NodeId> brute_force_ranking(const nq::CodeStore& s, const nq::LookupTables& t, nq::NodeId q,
                                                   const std::vector<nq::NodeId>& exclude = {}) {
  struct Scored {
    nq::NodeId node;
    double score;
  };
  std::vector<Scored> all;
  for (nq::NodeId v = 0; v < s.num_nodes(); ++v) {
    if (v == q || std::find(exclude.begin(), exclude.end(), v) != exclude.end()) continue;
    all.push_back({v, nq::code_similarity(s, t, q, v)});
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  std::vector<nq::NodeId> out;
  for (const auto& r : all) out.push_back(r.node);
  return out;
}

}  // namespace nqtest
