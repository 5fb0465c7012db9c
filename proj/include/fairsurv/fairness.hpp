#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <vector>

#include "fairsurv/cox.hpp"
#include "fairsurv/dataset.hpp"

namespace fairsurv {

enum class SimilarityKind : std::uint32_t { input = 0, output = 1 };

// Pairwise similarities in [0,1]. The diagonal is filled with 1 but every
// consumer skips self-pairs.
struct SimilarityMatrix {
  Eigen::MatrixXd values;
  SimilarityKind kind = SimilarityKind::input;

  int n() const { return static_cast<int>(values.rows()); }
};

// Per-individual concordance C_{x_g}. `defined[g]` is false when the anchor
// has no comparable pair (the value is then 0).
struct ConcordanceVector {
  Eigen::VectorXd values;
  std::vector<bool> defined;

  int undefined_count() const {
    return static_cast<int>(std::count(defined.begin(), defined.end(), false));
  }
};

// Ranking of all other indices by descending similarity to the anchor, ties
// broken by ascending index.
struct RankedList {
  int anchor = 0;
  std::vector<int> order;
};

// Sim(i,j) = exp(-||x_i - x_j||_2) on the (scaled) feature space.
inline SimilarityMatrix input_similarity(const SurvivalDataset& data) {
  const Eigen::MatrixXd x = data.feature_matrix();
  const int n = data.n();
  SimilarityMatrix sim;
  sim.kind = SimilarityKind::input;
  sim.values.resize(n, n);
  for (int i = 0; i < n; ++i) {
    sim.values(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = std::exp(-(x.row(i) - x.row(j)).norm());
      sim.values(i, j) = v;
      sim.values(j, i) = v;
    }
  }
  return sim;
}

// Sim(i,j) = exp(-|exp(beta'x_i) - exp(beta'x_j)|) on the risk-score space.
inline SimilarityMatrix output_similarity_raw(const RiskScores& scores) {
  const int n = static_cast<int>(scores.values.size());
  SimilarityMatrix sim;
  sim.kind = SimilarityKind::output;
  sim.values.resize(n, n);
  for (int i = 0; i < n; ++i) {
    sim.values(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = std::exp(-std::abs(scores.values[i] - scores.values[j]));
      sim.values(i, j) = v;
      sim.values(j, i) = v;
    }
  }
  return sim;
}

// For anchor g, the fraction of other individuals g' whose predicted risk
// ordering matches the observed time ordering, counting only pairs where the
// shorter-time member is uncensored. Pairs with tied times are incomparable.
inline ConcordanceVector individual_concordance(const RiskScores& scores, const SurvivalDataset& data,
                                                bool quiet = false) {
  const int n = data.n();
  if (static_cast<int>(scores.values.size()) != n) {
    throw DimensionError("individual_concordance: scores/data size mismatch");
  }
  ConcordanceVector conc;
  conc.values = Eigen::VectorXd::Zero(n);
  conc.defined.assign(static_cast<std::size_t>(n), false);
  int undefined = 0;
  for (int g = 0; g < n; ++g) {
    int comparable = 0;
    int concordant = 0;
    const double tg = data.records[static_cast<std::size_t>(g)].time;
    for (int h = 0; h < n; ++h) {
      if (h == g) continue;
      const double th = data.records[static_cast<std::size_t>(h)].time;
      if (tg == th) continue;
      const int lo = tg < th ? g : h;  // shorter survival time
      const int hi = tg < th ? h : g;
      if (!data.records[static_cast<std::size_t>(lo)].event) continue;
      ++comparable;
      if (scores.values[hi] < scores.values[lo]) ++concordant;
    }
    if (comparable > 0) {
      conc.values[g] = static_cast<double>(concordant) / static_cast<double>(comparable);
      conc.defined[static_cast<std::size_t>(g)] = true;
    } else {
      ++undefined;
    }
  }
  if (undefined > 0 && !quiet) {
    warn(std::to_string(undefined) + " anchor(s) with no comparable pair; concordance set to 0");
  }
  return conc;
}

// Sim_D(i,j) <- (1 - |C_i - C_j|) * raw(i,j).
inline SimilarityMatrix output_similarity_adjusted(const SimilarityMatrix& raw, const ConcordanceVector& conc) {
  const int n = raw.n();
  if (static_cast<int>(conc.values.size()) != n) {
    throw DimensionError("output_similarity_adjusted: size mismatch");
  }
  SimilarityMatrix adj;
  adj.kind = SimilarityKind::output;
  adj.values.resize(n, n);
  for (int i = 0; i < n; ++i) {
    adj.values(i, i) = raw.values(i, i);
    for (int j = i + 1; j < n; ++j) {
      const double v = (1.0 - std::abs(conc.values[i] - conc.values[j])) * raw.values(i, j);
      adj.values(i, j) = v;
      adj.values(j, i) = v;
    }
  }
  return adj;
}

namespace detail {

// Order of all indices != anchor by descending sim(anchor, .), ties by
// ascending index.
inline std::vector<int> rank_row(const Eigen::MatrixXd& sim, int anchor) {
  const int n = static_cast<int>(sim.rows());
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n) - 1);
  for (int j = 0; j < n; ++j) {
    if (j != anchor) order.push_back(j);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = sim(anchor, a);
    const double sb = sim(anchor, b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

}  // namespace detail

inline RankedList rank_by_similarity(const SimilarityMatrix& sim, int anchor) {
  if (sim.n() < 2) throw DimensionError("rank_by_similarity needs n >= 2");
  if (anchor < 0 || anchor >= sim.n()) throw DimensionError("rank_by_similarity: anchor out of range");
  RankedList rl;
  rl.anchor = anchor;
  rl.order = detail::rank_row(sim.values, anchor);
  return rl;
}

// DCG@k of the anchor's input-space gains under the given ordering, discount
// log2(pos + 1).
inline double dcg_at_k(const RankedList& order, const Eigen::VectorXd& gains, int k) {
  const int m = static_cast<int>(order.order.size());
  if (k < 1 || k > m) {
    throw DimensionError("dcg_at_k: k=" + std::to_string(k) + " out of range [1," + std::to_string(m) + "]");
  }
  double dcg = 0.0;
  for (int pos = 1; pos <= k; ++pos) {
    dcg += gains[order.order[static_cast<std::size_t>(pos - 1)]] / std::log2(static_cast<double>(pos) + 1.0);
  }
  return dcg;
}

struct FndcgDiag {
  int anchors_used = 0;
  int anchors_skipped = 0;
};

// FNDCG@k: per-anchor ratio of the DCG of input-space gains ranked by the
// output similarity over the ideal DCG (input-space ranking), averaged over
// anchors. Anchors whose ideal DCG is zero are skipped.
inline double fndcg_at_k(const SimilarityMatrix& sim_in, const SimilarityMatrix& sim_out, int k,
                         FndcgDiag* diag = nullptr) {
  const int n = sim_in.n();
  if (sim_out.n() != n) throw DimensionError("fndcg_at_k: matrix size mismatch");
  if (k < 1 || k > n - 1) {
    throw DimensionError("fndcg_at_k: k=" + std::to_string(k) + " out of range [1," + std::to_string(n - 1) + "]");
  }
  double total = 0.0;
  int used = 0;
  int skipped = 0;
  for (int anchor = 0; anchor < n; ++anchor) {
    const Eigen::VectorXd gains = sim_in.values.row(anchor).transpose();
    const std::vector<int> by_out = detail::rank_row(sim_out.values, anchor);
    const std::vector<int> by_in = detail::rank_row(sim_in.values, anchor);
    double num = 0.0;
    double den = 0.0;
    for (int pos = 1; pos <= k; ++pos) {
      const double discount = std::log2(static_cast<double>(pos) + 1.0);
      num += gains[by_out[static_cast<std::size_t>(pos - 1)]] / discount;
      den += gains[by_in[static_cast<std::size_t>(pos - 1)]] / discount;
    }
    if (den == 0.0) {
      ++skipped;
      continue;
    }
    total += num / den;
    ++used;
  }
  if (skipped > 0) {
    warn("fndcg_at_k: skipped " + std::to_string(skipped) + " anchor(s) with zero ideal DCG");
  }
  if (diag) {
    diag->anchors_used = used;
    diag->anchors_skipped = skipped;
  }
  if (used == 0) throw ComputeError("fndcg_at_k: no anchor with nonzero ideal DCG");
  return total / static_cast<double>(used);
}

// Mean hinge violation of the Lipschitz condition
// |exp(beta'x_a) - exp(beta'x_b)| <= L * ||x_a - x_b||_2 over unordered pairs.
inline double lipschitz_penalty(const Eigen::MatrixXd& features, const RiskScores& scores, double lipschitz_l) {
  if (!(lipschitz_l > 0.0)) throw DimensionError("lipschitz_penalty: L must be positive");
  const int n = static_cast<int>(features.rows());
  if (static_cast<int>(scores.values.size()) != n) {
    throw DimensionError("lipschitz_penalty: features/scores size mismatch");
  }
  if (n < 2) return 0.0;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double gap = std::abs(scores.values[i] - scores.values[j]);
      const double dist = (features.row(i) - features.row(j)).norm();
      total += std::max(0.0, gap - lipschitz_l * dist);
    }
  }
  return total / (0.5 * n * (n - 1));
}

// Debug dump of a similarity matrix: "FSIM" magic, version, kind, n, then
// row-major doubles. Not a stability-guaranteed format.
inline void save_similarity_matrix(const std::string& path, const SimilarityMatrix& sim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  const char magic[4] = {'F', 'S', 'I', 'M'};
  const std::uint32_t version = 1;
  const std::uint32_t kind = static_cast<std::uint32_t>(sim.kind);
  const std::uint64_t n = static_cast<std::uint64_t>(sim.n());
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (int i = 0; i < sim.n(); ++i) {
    for (int j = 0; j < sim.n(); ++j) {
      const double v = sim.values(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

inline SimilarityMatrix load_similarity_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint32_t kind = 0;
  std::uint64_t n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&kind), sizeof(kind));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || std::string_view(magic, 4) != "FSIM" || version != 1) {
    throw ParseError(path + ": not a similarity matrix file");
  }
  SimilarityMatrix sim;
  sim.kind = static_cast<SimilarityKind>(kind);
  sim.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < n; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      sim.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  if (!in) throw ParseError(path + ": truncated similarity matrix file");
  return sim;
}

}  // namespace fairsurv
