#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsurv/cox.hpp"
#include "fairsurv/dataset.hpp"
#include "fairsurv/fairness.hpp"

namespace fairsurv {

// Harrell-style concordance over comparable pairs (i uncensored, T_j > T_i).
// Strict ordering by default; with tie_credit, tied risk scores count 1/2.
inline double c_index(const RiskScores& scores, const SurvivalDataset& data, bool tie_credit = false) {
  const int n = data.n();
  if (static_cast<int>(scores.values.size()) != n) throw DimensionError("c_index: scores/data size mismatch");
  long comparable = 0;
  double concordant = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!data.records[static_cast<std::size_t>(i)].event) continue;
    const double ti = data.records[static_cast<std::size_t>(i)].time;
    for (int j = 0; j < n; ++j) {
      if (data.records[static_cast<std::size_t>(j)].time <= ti) continue;
      ++comparable;
      if (scores.values[j] < scores.values[i]) {
        concordant += 1.0;
      } else if (tie_credit && scores.values[j] == scores.values[i]) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0) throw ComputeError("c_index: no comparable pair");
  return concordant / static_cast<double>(comparable);
}

// IPCW (Graf-style) Brier score at time t:
//   (1/N) sum_i [ S(t|x_i)^2 1[T_i <= t, d_i=1] / G(T_i-)
//               + (1-S(t|x_i))^2 1[T_i > t] / G(t) ]
// with G the Kaplan-Meier censoring survival. Individuals censored before t
// contribute 0; terms whose weight denominator is 0 are dropped with a
// warning.
inline double brier_score(const CoxModel& model, const SurvivalDataset& data, double t,
                          const StepFunction* censor_g = nullptr) {
  if (!(t > 0.0)) throw DimensionError("brier_score: t must be positive");
  StepFunction g_local;
  if (!censor_g) {
    g_local = censoring_survival(data);
    censor_g = &g_local;
  }
  const StepFunction& g = *censor_g;
  const int n = data.n();
  double total = 0.0;
  int dropped = 0;
  const double g_at_t = g(t);
  for (int i = 0; i < n; ++i) {
    const auto& r = data.records[static_cast<std::size_t>(i)];
    const double s = survival_function(model, r.features, t);
    if (r.time <= t && r.event) {
      const double w = g.left_limit(r.time);
      if (w <= 0.0) {
        ++dropped;
        continue;
      }
      total += s * s / w;
    } else if (r.time > t) {
      if (g_at_t <= 0.0) {
        ++dropped;
        continue;
      }
      total += (1.0 - s) * (1.0 - s) / g_at_t;
    }
    // censored with T_i <= t: contributes 0
  }
  if (dropped > 0) {
    warn("brier_score: dropped " + std::to_string(dropped) + " term(s) with zero censoring weight at t=" +
         format_double(t));
  }
  return total / static_cast<double>(n);
}

// Default evaluation grid: `points` equally spaced times between the first
// and last observed event time.
inline std::vector<double> default_time_grid(const SurvivalDataset& data, int points = 100) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : data.records) {
    if (r.event) {
      lo = std::min(lo, r.time);
      hi = std::max(hi, r.time);
    }
  }
  if (!(lo <= hi)) throw ComputeError("default_time_grid: no observed events");
  if (points < 1) throw DimensionError("default_time_grid: points must be >= 1");
  std::vector<double> grid;
  if (points == 1 || lo == hi) {
    grid.push_back(lo);
    return grid;
  }
  grid.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return grid;
}

// Trapezoidal average of brier_score over the grid.
inline double integrated_brier(const CoxModel& model, const SurvivalDataset& data, const std::vector<double>& grid) {
  if (grid.empty()) throw DimensionError("integrated_brier: empty grid");
  const StepFunction g = censoring_survival(data);
  if (grid.size() == 1) return brier_score(model, data, grid.front(), &g);
  std::vector<double> bs(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) bs[i] = brier_score(model, data, grid[i], &g);
  double area = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    area += 0.5 * (bs[i] + bs[i - 1]) * (grid[i] - grid[i - 1]);
  }
  return area / (grid.back() - grid.front());
}

// Cumulative/dynamic IPCW time-dependent AUC at time t: cases have
// experienced the event by t, controls are still at risk after t; pairs are
// weighted by the inverse censoring survival.
inline double time_dependent_auc(const RiskScores& scores, const SurvivalDataset& data, double t,
                                 bool tie_credit = false, const StepFunction* censor_g = nullptr) {
  const int n = data.n();
  if (static_cast<int>(scores.values.size()) != n) {
    throw DimensionError("time_dependent_auc: scores/data size mismatch");
  }
  StepFunction g_local;
  if (!censor_g) {
    g_local = censoring_survival(data);
    censor_g = &g_local;
  }
  const StepFunction& g = *censor_g;

  std::vector<int> cases, controls;
  for (int i = 0; i < n; ++i) {
    const auto& r = data.records[static_cast<std::size_t>(i)];
    if (r.time <= t && r.event) {
      cases.push_back(i);
    } else if (r.time > t) {
      controls.push_back(i);
    }
  }
  if (cases.empty() || controls.empty()) {
    throw ComputeError("time_dependent_auc: no case/control pair at t=" + format_double(t));
  }
  const double g_at_t = g(t);
  double num = 0.0;
  double den = 0.0;
  for (int i : cases) {
    const double gi = g.left_limit(data.records[static_cast<std::size_t>(i)].time);
    if (gi <= 0.0 || g_at_t <= 0.0) continue;
    const double wi = 1.0 / gi;
    for (int j : controls) {
      const double w = wi / g_at_t;
      den += w;
      if (scores.values[i] > scores.values[j]) {
        num += w;
      } else if (tie_credit && scores.values[i] == scores.values[j]) {
        num += 0.5 * w;
      }
    }
  }
  if (den <= 0.0) throw ComputeError("time_dependent_auc: all pairs lost to zero censoring weights");
  return num / den;
}

// Event-density-weighted average of the time-dependent AUC over distinct
// event times; times without both cases and controls are skipped.
inline double integrated_time_dependent_auc(const RiskScores& scores, const SurvivalDataset& data,
                                            bool tie_credit = false) {
  std::vector<double> event_times;
  for (const auto& r : data.records) {
    if (r.event) event_times.push_back(r.time);
  }
  std::sort(event_times.begin(), event_times.end());
  const StepFunction g = censoring_survival(data);
  double weighted = 0.0;
  double weight_sum = 0.0;
  std::size_t i = 0;
  while (i < event_times.size()) {
    std::size_t j = i;
    while (j < event_times.size() && event_times[j] == event_times[i]) ++j;
    const double d = static_cast<double>(j - i);
    try {
      const double auc = time_dependent_auc(scores, data, event_times[i], tie_credit, &g);
      weighted += d * auc;
      weight_sum += d;
    } catch (const ComputeError&) {
      // no valid pair at this time; skipped in the integration
    }
    i = j;
  }
  if (weight_sum <= 0.0) throw ComputeError("integrated_time_dependent_auc: no valid evaluation time");
  return weighted / weight_sum;
}

// One evaluation of one model on one dataset, percent-scaled per the report
// conventions. Metrics that fail keep an error note instead of a value.
struct EvalReport {
  std::optional<double> fndcg_pct;
  std::optional<double> c_index_pct;
  std::optional<double> brier_pct;
  std::optional<double> tauc_pct;
  std::vector<std::string> errors;

  // config echo
  std::string variant;
  double gamma = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  int fold = -1;
  int subsampled_from = 0;  // 0 = no subsampling

  bool complete() const { return fndcg_pct && c_index_pct && brier_pct && tauc_pct; }
};

struct EvaluateOptions {
  bool tie_credit = false;
  int brier_grid_points = 100;
};

// Held-out evaluation: exact FNDCG@k (concordance-adjusted output
// similarity, hard indicators), C-index, integrated Brier, integrated
// time-dependent AUC. Brier and tAUC are integrated over the held-out event
// time range, as labeled in the serialized report.
inline EvalReport evaluate(const CoxModel& model, const SurvivalDataset& data, const SimilarityMatrix& sim_in, int k,
                           const EvaluateOptions& opts = {}) {
  EvalReport rep;
  rep.k = k;
  RiskScores scores = risk_scores(model, data);

  try {
    const SimilarityMatrix raw = output_similarity_raw(scores);
    const ConcordanceVector conc = individual_concordance(scores, data);
    const SimilarityMatrix adj = output_similarity_adjusted(raw, conc);
    const int k_eff = std::min(k, data.n() - 1);
    rep.fndcg_pct = 100.0 * fndcg_at_k(sim_in, adj, k_eff);
  } catch (const Error& e) {
    rep.errors.push_back(std::string("fndcg: ") + e.what());
  }
  try {
    rep.c_index_pct = 100.0 * c_index(scores, data, opts.tie_credit);
  } catch (const Error& e) {
    rep.errors.push_back(std::string("c_index: ") + e.what());
  }
  try {
    rep.brier_pct = 100.0 * integrated_brier(model, data, default_time_grid(data, opts.brier_grid_points));
  } catch (const Error& e) {
    rep.errors.push_back(std::string("brier: ") + e.what());
  }
  try {
    rep.tauc_pct = 100.0 * integrated_time_dependent_auc(scores, data, opts.tie_credit);
  } catch (const Error& e) {
    rep.errors.push_back(std::string("tauc: ") + e.what());
  }
  return rep;
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep) {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  put("fndcg_pct", rep.fndcg_pct);
  put("c_index_pct", rep.c_index_pct);
  put("brier_pct", rep.brier_pct);
  put("tauc_pct", rep.tauc_pct);
  j["config"] = {{"variant", rep.variant}, {"gamma", rep.gamma},         {"k", rep.k},
                 {"seed", rep.seed},       {"fold", rep.fold},           {"subsampled_from", rep.subsampled_from}};
  j["aggregation"] = "integrated-over-event-times";
  j["errors"] = rep.errors;
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport rep;
  auto get = [&](const char* key) -> std::optional<double> {
    if (j.contains(key) && !j[key].is_null()) return j[key].get<double>();
    return std::nullopt;
  };
  rep.fndcg_pct = get("fndcg_pct");
  rep.c_index_pct = get("c_index_pct");
  rep.brier_pct = get("brier_pct");
  rep.tauc_pct = get("tauc_pct");
  const auto& c = j.at("config");
  rep.variant = c.at("variant").get<std::string>();
  rep.gamma = c.at("gamma").get<double>();
  rep.k = c.at("k").get<int>();
  rep.seed = c.at("seed").get<std::uint64_t>();
  rep.fold = c.at("fold").get<int>();
  rep.subsampled_from = c.at("subsampled_from").get<int>();
  rep.errors = j.at("errors").get<std::vector<std::string>>();
  return rep;
}

// CSV cell order follows the report column convention:
// FNDCG@k%, C-index%, Brier%, tAUC%.
inline std::string eval_report_csv_row(const EvalReport& rep) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("nan"); };
  return cell(rep.fndcg_pct) + "," + cell(rep.c_index_pct) + "," + cell(rep.brier_pct) + "," + cell(rep.tauc_pct);
}

}  // namespace fairsurv
