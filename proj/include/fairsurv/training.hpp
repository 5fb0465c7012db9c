#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "fairsurv/config_file.hpp"
#include "fairsurv/cox.hpp"
#include "fairsurv/dataset.hpp"
#include "fairsurv/evaluation.hpp"
#include "fairsurv/fairness.hpp"

namespace fairsurv {

enum class Variant { plain, fair, lipschitz };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::plain: return "plain";
    case Variant::fair: return "fair";
    case Variant::lipschitz: return "lipschitz";
  }
  return "plain";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "fair") return Variant::fair;
  if (s == "lipschitz") return Variant::lipschitz;
  throw ParseError("unknown variant '" + s + "' (expected plain, fair or lipschitz)");
}

struct TrainConfig {
  Variant variant = Variant::fair;
  double gamma = 1.0;
  int k = 10;
  double learning_rate = 0.01;
  int epochs = 50;
  int batch_size = 128;
  double tau = 1.0;  // surrogate temperature
  std::uint64_t seed = 42;
  double lipschitz_l = 1.0;  // variant=lipschitz only
  double ridge = 0.0;
  // Exact FNDCG@k on the training data is O(n^2) per epoch; long
  // full-batch optimization runs can turn it off (the trace column
  // becomes nan).
  bool trace_metrics = true;

  void validate() const {
    if (gamma < 0.0) throw DimensionError("gamma must be >= 0");
    if (k < 1) throw DimensionError("k must be >= 1");
    if (!(learning_rate > 0.0)) throw DimensionError("learning_rate must be positive");
    if (epochs < 1) throw DimensionError("epochs must be >= 1");
    if (batch_size < 2) throw DimensionError("batch_size must be >= 2");
    if (!(tau > 0.0)) throw DimensionError("tau must be positive");
    if (variant == Variant::lipschitz && !(lipschitz_l > 0.0)) {
      throw DimensionError("lipschitz_l must be positive");
    }
    if (ridge < 0.0) throw DimensionError("ridge must be >= 0");
  }
};

struct TrainTrace {
  std::vector<double> utility;    // mean per-batch utility loss
  std::vector<double> fairness;   // mean per-batch fairness term (surrogate, or -penalty)
  std::vector<double> fndcg;      // exact FNDCG@k on training data
  std::vector<double> grad_norm;  // mean per-batch gradient norm
  double final_fndcg = std::numeric_limits<double>::quiet_NaN();
  double final_c_index = std::numeric_limits<double>::quiet_NaN();
  int skipped_batches = 0;
  bool k_clamped = false;
};

inline void trace_to_csv(const std::string& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "epoch,utility,surrogate,fndcg,grad_norm\n";
  for (std::size_t e = 0; e < trace.utility.size(); ++e) {
    out << e << "," << format_double(trace.utility[e]) << "," << format_double(trace.fairness[e]) << ","
        << format_double(trace.fndcg[e]) << "," << format_double(trace.grad_norm[e]) << "\n";
  }
}

namespace detail {

// Comparable-pair structure of a batch for the concordance terms: pair (a,b)
// takes part iff the times differ and the shorter-time member is uncensored.
struct ConcordancePairs {
  // for each anchor a: list of (lo, hi) partner roles, lo = shorter time
  std::vector<std::vector<std::pair<int, int>>> pairs;
  std::vector<int> counts;
};

inline ConcordancePairs concordance_pairs(const SurvivalDataset& batch) {
  const int n = batch.n();
  ConcordancePairs cp;
  cp.pairs.resize(static_cast<std::size_t>(n));
  cp.counts.assign(static_cast<std::size_t>(n), 0);
  for (int a = 0; a < n; ++a) {
    const double ta = batch.records[static_cast<std::size_t>(a)].time;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      const double tb = batch.records[static_cast<std::size_t>(b)].time;
      if (ta == tb) continue;
      const int lo = ta < tb ? a : b;
      const int hi = ta < tb ? b : a;
      if (!batch.records[static_cast<std::size_t>(lo)].event) continue;
      cp.pairs[static_cast<std::size_t>(a)].emplace_back(lo, hi);
      ++cp.counts[static_cast<std::size_t>(a)];
    }
  }
  return cp;
}

// Soft concordance vector: hard indicators 1[s_hi < s_lo] relaxed to
// sigmoid((s_lo - s_hi)/tau).
inline Eigen::VectorXd soft_concordance(const Eigen::VectorXd& s, const ConcordancePairs& cp, double tau) {
  const int n = static_cast<int>(s.size());
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < n; ++a) {
    if (cp.counts[static_cast<std::size_t>(a)] == 0) continue;
    double sum = 0.0;
    for (const auto& [lo, hi] : cp.pairs[static_cast<std::size_t>(a)]) {
      sum += sigmoid((s[lo] - s[hi]) / tau);
    }
    c[a] = sum / cp.counts[static_cast<std::size_t>(a)];
  }
  return c;
}

}  // namespace detail

// Differentiable stand-in for FNDCG@k on a batch. For each anchor the
// input-space top-k neighbors keep their gains, but the position discount is
// applied at the neighbor's soft output-space rank
//   r_j = 1 + sum_{l != j} sigmoid((SimD(i,l) - SimD(i,j)) / tau),
// where SimD is the concordance-adjusted output similarity with the
// concordance indicator relaxed by the same temperature. As tau -> 0 the
// soft ranks harden and (at k = batch-1) the value meets exact FNDCG@k.
// Raising it pulls output-space rankings toward the input-space ones.
inline double fairness_surrogate(const Eigen::VectorXd& beta, const SurvivalDataset& batch,
                                 const SimilarityMatrix& sim_in, int k, double tau, bool* clamped = nullptr,
                                 Eigen::VectorXd* grad_out = nullptr) {
  const int n = batch.n();
  if (n < 2) throw DimensionError("fairness_surrogate: batch must have >= 2 records");
  if (sim_in.n() != n) throw DimensionError("fairness_surrogate: sim_in size mismatch");
  if (!(tau > 0.0)) throw DimensionError("fairness_surrogate: tau must be positive");
  int k_eff = k;
  if (k_eff > n - 1) {
    k_eff = n - 1;
    if (clamped) *clamped = true;
  }
  if (k_eff < 1) throw DimensionError("fairness_surrogate: k must be >= 1");

  const Eigen::MatrixXd x = batch.feature_matrix();
  const Eigen::VectorXd eta = x * beta;
  const Eigen::VectorXd s = eta.array().exp();

  const detail::ConcordancePairs cp = detail::concordance_pairs(batch);
  const Eigen::VectorXd conc = detail::soft_concordance(s, cp, tau);

  // adjusted output similarity with relaxed indicators
  Eigen::MatrixXd sim_d(n, n);
  for (int a = 0; a < n; ++a) {
    sim_d(a, a) = 1.0;
    for (int b = a + 1; b < n; ++b) {
      const double raw = std::exp(-std::abs(s[a] - s[b]));
      const double adj = 1.0 - std::abs(conc[a] - conc[b]);
      sim_d(a, b) = adj * raw;
      sim_d(b, a) = adj * raw;
    }
  }

  const bool want_grad = grad_out != nullptr;
  Eigen::MatrixXd d_sim = want_grad ? Eigen::MatrixXd::Zero(n, n) : Eigen::MatrixXd();

  const double ln2 = std::log(2.0);
  double total = 0.0;
  int used = 0;
  std::vector<double> sig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::vector<int> by_in = detail::rank_row(sim_in.values, i);
    double ideal = 0.0;
    for (int pos = 1; pos <= k_eff; ++pos) {
      ideal += sim_in.values(i, by_in[static_cast<std::size_t>(pos - 1)]) /
               std::log2(static_cast<double>(pos) + 1.0);
    }
    if (ideal == 0.0) continue;
    ++used;

    for (int pos = 1; pos <= k_eff; ++pos) {
      const int j = by_in[static_cast<std::size_t>(pos - 1)];
      const double gain = sim_in.values(i, j);
      double rank = 1.0;
      for (int l = 0; l < n; ++l) {
        if (l == i || l == j) continue;
        const double z = sigmoid((sim_d(i, l) - sim_d(i, j)) / tau);
        sig[static_cast<std::size_t>(l)] = z;
        rank += z;
      }
      const double log_rank = std::log2(rank + 1.0);
      total += gain / log_rank / ideal;

      if (want_grad) {
        // d/d rank of gain / log2(rank+1), scaled by the anchor average later
        const double d_rank = -gain / ((rank + 1.0) * ln2 * log_rank * log_rank) / ideal;
        double d_sij = 0.0;
        for (int l = 0; l < n; ++l) {
          if (l == i || l == j) continue;
          const double z = sig[static_cast<std::size_t>(l)];
          const double dz = d_rank * z * (1.0 - z) / tau;
          d_sim(i, l) += dz;
          d_sij -= dz;
        }
        d_sim(i, j) += d_sij;
      }
    }
  }
  if (used == 0) throw ComputeError("fairness_surrogate: no anchor with nonzero ideal DCG");
  const double value = total / static_cast<double>(used);

  if (want_grad) {
    const double inv_used = 1.0 / static_cast<double>(used);
    Eigen::VectorXd d_s = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd d_conc = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (b == a) continue;
        const double upstream = d_sim(a, b) * inv_used;
        if (upstream == 0.0) continue;
        const double raw = std::exp(-std::abs(s[a] - s[b]));
        const double adj = 1.0 - std::abs(conc[a] - conc[b]);
        // through raw = exp(-|s_a - s_b|)
        const double d_raw = upstream * adj;
        const double sgn_s = sign(s[a] - s[b]);
        d_s[a] -= d_raw * sgn_s * raw;
        d_s[b] += d_raw * sgn_s * raw;
        // through adj = 1 - |conc_a - conc_b|
        const double d_adj = upstream * raw;
        const double sgn_c = sign(conc[a] - conc[b]);
        d_conc[a] -= d_adj * sgn_c;
        d_conc[b] += d_adj * sgn_c;
      }
    }
    for (int a = 0; a < n; ++a) {
      if (d_conc[a] == 0.0 || cp.counts[static_cast<std::size_t>(a)] == 0) continue;
      const double coef = d_conc[a] / cp.counts[static_cast<std::size_t>(a)];
      for (const auto& [lo, hi] : cp.pairs[static_cast<std::size_t>(a)]) {
        const double z = sigmoid((s[lo] - s[hi]) / tau);
        const double dz = coef * z * (1.0 - z) / tau;
        d_s[lo] += dz;
        d_s[hi] -= dz;
      }
    }
    *grad_out = x.transpose() * d_s.cwiseProduct(s);
  }
  return value;
}

namespace detail {

// Gradient of the mean hinge Lipschitz violation wrt beta.
inline double lipschitz_penalty_with_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& s, double lipschitz_l,
                                          Eigen::VectorXd* grad_out) {
  const int n = static_cast<int>(x.rows());
  const double inv_pairs = n >= 2 ? 1.0 / (0.5 * n * (n - 1)) : 0.0;
  double total = 0.0;
  Eigen::VectorXd d_s = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double gap = std::abs(s[i] - s[j]);
      const double dist = (x.row(i) - x.row(j)).norm();
      const double violation = gap - lipschitz_l * dist;
      if (violation <= 0.0) continue;
      total += violation;
      const double sgn = sign(s[i] - s[j]);
      d_s[i] += inv_pairs * sgn;
      d_s[j] -= inv_pairs * sgn;
    }
  }
  if (grad_out) *grad_out = x.transpose() * d_s.cwiseProduct(s);
  return total * inv_pairs;
}

}  // namespace detail

struct UnifiedLossParts {
  double loss = 0.0;
  double utility = 0.0;
  double fairness = 0.0;  // the term entering loss as -gamma * fairness
};

// L_unified = L_utility - gamma * L_fairness, where L_fairness is the
// surrogate (variant fair), the negated hinge penalty (variant lipschitz),
// or 0 (variant plain).
inline UnifiedLossParts unified_loss_parts(const Eigen::VectorXd& beta, const SurvivalDataset& batch,
                                           const SimilarityMatrix& sim_in, const TrainConfig& config,
                                           Eigen::VectorXd* grad_out = nullptr, bool* clamped = nullptr) {
  if (batch.event_count() == 0) {
    throw ComputeError("unified_loss: batch has no observed events");
  }
  UnifiedLossParts parts;
  parts.utility = neg_log_partial_likelihood(beta, batch, config.ridge);
  Eigen::VectorXd grad;
  if (grad_out) grad = nll_gradient(beta, batch, config.ridge);

  if (config.variant == Variant::fair && config.gamma != 0.0) {
    Eigen::VectorXd fair_grad;
    parts.fairness = fairness_surrogate(beta, batch, sim_in, config.k, config.tau, clamped,
                                        grad_out ? &fair_grad : nullptr);
    if (grad_out) grad -= config.gamma * fair_grad;
  } else if (config.variant == Variant::lipschitz && config.gamma != 0.0) {
    const Eigen::MatrixXd x = batch.feature_matrix();
    const Eigen::VectorXd s = (x * beta).array().exp();
    Eigen::VectorXd pen_grad;
    const double pen =
        detail::lipschitz_penalty_with_grad(x, s, config.lipschitz_l, grad_out ? &pen_grad : nullptr);
    parts.fairness = -pen;
    if (grad_out) grad += config.gamma * pen_grad;
  } else if (config.variant == Variant::fair || config.variant == Variant::lipschitz) {
    // gamma == 0: fairness term drops out of the objective; still report it
    if (config.variant == Variant::fair) {
      parts.fairness = fairness_surrogate(beta, batch, sim_in, config.k, config.tau, clamped, nullptr);
    } else {
      const Eigen::MatrixXd x = batch.feature_matrix();
      const Eigen::VectorXd s = (x * beta).array().exp();
      parts.fairness = -detail::lipschitz_penalty_with_grad(x, s, config.lipschitz_l, nullptr);
    }
  }
  parts.loss = parts.utility - config.gamma * parts.fairness;
  if (grad_out) *grad_out = grad;
  return parts;
}

inline double unified_loss(const Eigen::VectorXd& beta, const SurvivalDataset& batch, const SimilarityMatrix& sim_in,
                           const TrainConfig& config) {
  return unified_loss_parts(beta, batch, sim_in, config).loss;
}

namespace detail {

// Exact FNDCG@k of the model scores on a dataset, computed row-by-row so no
// n x n matrix is materialized.
inline double exact_fndcg(const SurvivalDataset& data, const Eigen::MatrixXd& x, const Eigen::VectorXd& scores,
                          int k) {
  const int n = data.n();
  const int k_eff = std::min(k, n - 1);
  RiskScores rs;
  rs.values = scores;
  const ConcordanceVector conc = individual_concordance(rs, data, /*quiet=*/true);

  std::vector<int> order_buf;
  Eigen::VectorXd in_row(n), out_row(n);
  double total = 0.0;
  int used = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        in_row[j] = 1.0;
        out_row[j] = 1.0;
        continue;
      }
      in_row[j] = std::exp(-(x.row(i) - x.row(j)).norm());
      out_row[j] = (1.0 - std::abs(conc.values[i] - conc.values[j])) * std::exp(-std::abs(scores[i] - scores[j]));
    }
    auto rank = [&](const Eigen::VectorXd& row) {
      order_buf.clear();
      for (int j = 0; j < n; ++j) {
        if (j != i) order_buf.push_back(j);
      }
      std::sort(order_buf.begin(), order_buf.end(), [&](int a, int b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return a < b;
      });
      return order_buf;
    };
    const std::vector<int> by_out = rank(out_row);
    double num = 0.0;
    for (int pos = 1; pos <= k_eff; ++pos) {
      num += in_row[by_out[static_cast<std::size_t>(pos - 1)]] / std::log2(static_cast<double>(pos) + 1.0);
    }
    const std::vector<int> by_in = rank(in_row);
    double den = 0.0;
    for (int pos = 1; pos <= k_eff; ++pos) {
      den += in_row[by_in[static_cast<std::size_t>(pos - 1)]] / std::log2(static_cast<double>(pos) + 1.0);
    }
    if (den == 0.0) continue;
    total += num / den;
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / static_cast<double>(used);
}

}  // namespace detail

struct FitResult {
  CoxModel model;
  TrainTrace trace;
};

// Mini-batch Adam on the unified objective. The partial likelihood and the
// fairness term both see only within-batch pairs and risk sets. Deterministic
// given (config, seed).
inline FitResult fit(const SurvivalDataset& data, const TrainConfig& config,
                     const FeatureScaler* scaler = nullptr) {
  config.validate();
  validate_dataset(data);
  const int n = data.n();
  const int p = data.p();
  const Eigen::MatrixXd x_full = data.feature_matrix();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double adam_eps = 1e-8;
  long step = 0;

  Rng rng(config.seed);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);

  FitResult result;
  TrainTrace& trace = result.trace;
  bool warned_skip = false;
  bool warned_clamp = false;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(perm);
    double utility_sum = 0.0;
    double fairness_sum = 0.0;
    double gnorm_sum = 0.0;
    int batches = 0;

    for (int start = 0; start < n; start += config.batch_size) {
      const int end = std::min(start + config.batch_size, n);
      if (end - start < 2) {
        ++trace.skipped_batches;
        continue;
      }
      std::vector<int> batch_idx(perm.begin() + start, perm.begin() + end);
      SurvivalDataset batch = data.subset(batch_idx);
      if (batch.event_count() == 0) {
        ++trace.skipped_batches;
        if (!warned_skip) {
          warn("fit: skipping batch with no observed events (epoch " + std::to_string(epoch) + ")");
          warned_skip = true;
        }
        continue;
      }

      SimilarityMatrix sim_in;
      if (config.variant == Variant::fair) sim_in = input_similarity(batch);

      Eigen::VectorXd grad;
      bool clamped = false;
      const UnifiedLossParts parts = unified_loss_parts(beta, batch, sim_in, config, &grad, &clamped);
      if (clamped && !warned_clamp) {
        warn("fit: k=" + std::to_string(config.k) + " clamped to batch size - 1");
        warned_clamp = true;
        trace.k_clamped = true;
      }
      if (!std::isfinite(parts.loss) || !grad.allFinite()) {
        std::string beta_str;
        for (int j = 0; j < p; ++j) beta_str += (j ? "," : "") + format_double(beta[j]);
        throw ComputeError("fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / config.batch_size) + "; last beta = [" + beta_str + "]");
      }

      ++step;
      m = b1 * m + (1.0 - b1) * grad;
      v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
      const double mc = 1.0 - std::pow(b1, static_cast<double>(step));
      const double vc = 1.0 - std::pow(b2, static_cast<double>(step));
      const Eigen::ArrayXd m_hat = m.array() / mc;
      const Eigen::ArrayXd v_hat = v.array() / vc;
      beta.array() -= config.learning_rate * m_hat / (v_hat.sqrt() + adam_eps);

      utility_sum += parts.utility;
      fairness_sum += parts.fairness;
      gnorm_sum += grad.norm();
      ++batches;
    }

    const double denom = batches > 0 ? static_cast<double>(batches) : 1.0;
    trace.utility.push_back(utility_sum / denom);
    trace.fairness.push_back(fairness_sum / denom);
    trace.grad_norm.push_back(gnorm_sum / denom);
    if (config.trace_metrics) {
      const Eigen::VectorXd scores = (x_full * beta).array().exp();
      trace.fndcg.push_back(detail::exact_fndcg(data, x_full, scores, config.k));
    } else {
      trace.fndcg.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }

  result.model.beta = beta;
  result.model.baseline = breslow_baseline(beta, data);
  if (scaler) {
    result.model.scaler = *scaler;
    result.model.has_scaler = true;
  }
  const Eigen::VectorXd scores = (x_full * beta).array().exp();
  trace.final_fndcg = detail::exact_fndcg(data, x_full, scores, config.k);
  RiskScores rs;
  rs.values = scores;
  try {
    trace.final_c_index = c_index(rs, data);
  } catch (const ComputeError&) {
    trace.final_c_index = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

struct FoldEval {
  int fold = -1;
  EvalReport report;
  std::string error;  // non-empty when the fold was skipped
};

struct MetricSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
  int count = 0;
};

struct CvResult {
  std::vector<FoldEval> folds;
  MetricSummary fndcg, c_index, brier, tauc;
};

namespace detail {

inline MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  s.count = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / xs.size();
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (xs.size() - 1));
  } else {
    s.stddev = 0.0;
  }
  return s;
}

inline void summarize_cv(CvResult& cv) {
  std::vector<double> fndcg, cidx, brier, tauc;
  for (const auto& f : cv.folds) {
    if (!f.error.empty()) continue;
    if (f.report.fndcg_pct) fndcg.push_back(*f.report.fndcg_pct);
    if (f.report.c_index_pct) cidx.push_back(*f.report.c_index_pct);
    if (f.report.brier_pct) brier.push_back(*f.report.brier_pct);
    if (f.report.tauc_pct) tauc.push_back(*f.report.tauc_pct);
  }
  cv.fndcg = summarize(fndcg);
  cv.c_index = summarize(cidx);
  cv.brier = summarize(brier);
  cv.tauc = summarize(tauc);
}

}  // namespace detail

// Train/evaluate over the folds: the scaler is fit on each training split
// only and applied to the held-out split. Folds that cannot be trained or
// evaluated are recorded with an error note and skipped in the aggregates.
inline CvResult cross_validate(const SurvivalDataset& data, const FoldAssignment& folds, const TrainConfig& config,
                               const EvaluateOptions& opts = {}, int subsampled_from = 0) {
  CvResult cv;
  for (int f = 0; f < folds.n_folds; ++f) {
    FoldEval fe;
    fe.fold = f;
    try {
      const SurvivalDataset train = data.subset(folds.train_indices(f));
      const SurvivalDataset test = data.subset(folds.test_indices(f));
      if (train.event_count() == 0) throw ComputeError("training split has no observed events");
      if (test.n() < 2) throw ComputeError("held-out split has fewer than 2 records");
      const FeatureScaler scaler = fit_scaler(train);
      const SurvivalDataset train_s = apply_scaler(scaler, train);
      const SurvivalDataset test_s = apply_scaler(scaler, test);
      const FitResult fitted = fit(train_s, config, &scaler);
      const SimilarityMatrix sim_in = input_similarity(test_s);
      fe.report = evaluate(fitted.model, test_s, sim_in, config.k, opts);
      fe.report.variant = to_string(config.variant);
      fe.report.gamma = config.gamma;
      fe.report.seed = config.seed;
      fe.report.fold = f;
      fe.report.subsampled_from = subsampled_from;
    } catch (const Error& e) {
      fe.error = e.what();
      warn("fold " + std::to_string(f) + " skipped: " + fe.error);
    }
    cv.folds.push_back(std::move(fe));
  }
  detail::summarize_cv(cv);
  return cv;
}

struct GridRow {
  double gamma = 0.0;
  int k = 0;
  CvResult cv;
  std::string error;  // systematic failure for this cell
};

// Full-factorial sweep over (gamma, k), rows sorted lexicographically.
// Cells are independent and run on `workers` threads; failures are recorded
// per cell and the sweep continues.
inline std::vector<GridRow> grid_search(const SurvivalDataset& data, const FoldAssignment& folds,
                                        std::vector<double> gamma_grid, std::vector<int> k_grid,
                                        const TrainConfig& base_config, const EvaluateOptions& opts = {},
                                        int workers = 1, int subsampled_from = 0) {
  if (gamma_grid.empty() || k_grid.empty()) throw DimensionError("grid_search: empty grid");
  std::sort(gamma_grid.begin(), gamma_grid.end());
  std::sort(k_grid.begin(), k_grid.end());

  std::vector<GridRow> rows(gamma_grid.size() * k_grid.size());
  for (std::size_t gi = 0; gi < gamma_grid.size(); ++gi) {
    for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
      auto& row = rows[gi * k_grid.size() + ki];
      row.gamma = gamma_grid[gi];
      row.k = k_grid[ki];
    }
  }

  std::atomic<std::size_t> next{0};
  auto run_cell = [&](GridRow& row) {
    TrainConfig cfg = base_config;
    cfg.gamma = row.gamma;
    cfg.k = row.k;
    try {
      row.cv = cross_validate(data, folds, cfg, opts, subsampled_from);
    } catch (const Error& e) {
      row.error = "gamma=" + format_double(row.gamma) + ", k=" + std::to_string(row.k) + ": " + e.what();
    }
  };

  const int thread_count = std::max(1, std::min<int>(workers, static_cast<int>(rows.size())));
  if (thread_count == 1) {
    for (auto& row : rows) run_cell(row);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= rows.size()) return;
          run_cell(rows[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return rows;
}

// TrainConfig keys under the [train] section of a config file.
inline TrainConfig train_config_from_file(const ConfigFile& cfg, TrainConfig base = {}) {
  if (cfg.has("train.variant")) base.variant = variant_from_string(cfg.get_string("train.variant"));
  base.gamma = cfg.get_double("train.gamma", base.gamma);
  base.k = static_cast<int>(cfg.get_int("train.k", base.k));
  base.learning_rate = cfg.get_double("train.learning_rate", base.learning_rate);
  base.epochs = static_cast<int>(cfg.get_int("train.epochs", base.epochs));
  base.batch_size = static_cast<int>(cfg.get_int("train.batch_size", base.batch_size));
  base.tau = cfg.get_double("train.tau", base.tau);
  base.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long>(base.seed)));
  base.lipschitz_l = cfg.get_double("train.lipschitz_l", base.lipschitz_l);
  base.ridge = cfg.get_double("train.ridge", base.ridge);
  base.trace_metrics = cfg.get_bool("train.trace_metrics", base.trace_metrics);
  return base;
}

}  // namespace fairsurv
