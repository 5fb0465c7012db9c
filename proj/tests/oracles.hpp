#pragma once

// Independent oracle implementations for cross-checking the library. These
// deliberately avoid the library's algorithmic shortcuts: risk sets are
// enumerated by brute force, DCGs are summed from explicit sorts, and the
// Newton solver maximizes the partial likelihood directly.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "fairsurv/cox.hpp"
#include "fairsurv/dataset.hpp"
#include "fairsurv/fairness.hpp"

namespace oracles {

using fairsurv::RiskScores;
using fairsurv::SimilarityMatrix;
using fairsurv::SurvivalDataset;
using fairsurv::SurvivalRecord;

// Negative log partial likelihood by direct risk-set enumeration.
inline double brute_nll(const Eigen::VectorXd& beta, const SurvivalDataset& data) {
  const int n = data.n();
  double nll = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!data.records[i].event) continue;
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      if (data.records[j].time >= data.records[i].time) {
        denom += std::exp(beta.dot(data.records[j].features));
      }
    }
    nll -= beta.dot(data.records[i].features) - std::log(denom);
  }
  return nll;
}

// Central finite differences of an arbitrary scalar function of beta.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& beta, double h = 1e-5) {
  Eigen::VectorXd g(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    Eigen::VectorXd bp = beta;
    Eigen::VectorXd bm = beta;
    bp[j] += h;
    bm[j] -= h;
    g[j] = (f(bp) - f(bm)) / (2.0 * h);
  }
  return g;
}

// Newton's method on the full partial likelihood, brute-force risk sets,
// step halving on the objective. Converges to machine precision on the
// instances used in tests.
inline Eigen::VectorXd newton_cox(const SurvivalDataset& data, int max_iter = 100, double grad_tol = 1e-11) {
  const int n = data.n();
  const int p = data.p();
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) x.row(i) = data.records[i].features.transpose();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double nll = brute_nll(beta, data);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      if (!data.records[i].event) continue;
      double s0 = 0.0;
      Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
      Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
      for (int j = 0; j < n; ++j) {
        if (data.records[j].time < data.records[i].time) continue;
        const double w = std::exp(eta[j]);
        s0 += w;
        s1 += w * x.row(j).transpose();
        s2 += w * x.row(j).transpose() * x.row(j);
      }
      g -= x.row(i).transpose() - s1 / s0;
      hess += s2 / s0 - (s1 / s0) * (s1 / s0).transpose();
    }
    if (g.norm() < grad_tol) break;
    Eigen::VectorXd step = hess.ldlt().solve(g);
    double scale = 1.0;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd cand = beta - scale * step;
      const double cand_nll = brute_nll(cand, data);
      if (cand_nll <= nll + 1e-15) {
        beta = cand;
        nll = cand_nll;
        break;
      }
      scale *= 0.5;
    }
  }
  return beta;
}

// C-index by full pair enumeration.
inline double brute_c_index(const RiskScores& scores, const SurvivalDataset& data, bool tie_credit = false) {
  long pairs = 0;
  double conc = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (!data.records[i].event) continue;
    for (int j = 0; j < data.n(); ++j) {
      if (!(data.records[j].time > data.records[i].time)) continue;
      ++pairs;
      if (scores.values[j] < scores.values[i]) {
        conc += 1.0;
      } else if (tie_credit && scores.values[j] == scores.values[i]) {
        conc += 0.5;
      }
    }
  }
  return conc / static_cast<double>(pairs);
}

// Per-individual concordance by full pair enumeration; undefined anchors 0.
inline Eigen::VectorXd brute_individual_concordance(const RiskScores& scores, const SurvivalDataset& data) {
  const int n = data.n();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int g = 0; g < n; ++g) {
    int m = 0;
    int conc = 0;
    for (int h = 0; h < n; ++h) {
      if (h == g) continue;
      const double tg = data.records[g].time;
      const double th = data.records[h].time;
      if (tg == th) continue;
      const int shorter = tg < th ? g : h;
      const int longer = tg < th ? h : g;
      if (!data.records[shorter].event) continue;
      ++m;
      if (scores.values[longer] < scores.values[shorter]) ++conc;
    }
    if (m > 0) c[g] = static_cast<double>(conc) / m;
  }
  return c;
}

// FNDCG@k from explicit stable sorts and direct base-2 log sums.
inline double brute_fndcg(const SimilarityMatrix& sim_in, const SimilarityMatrix& sim_out, int k) {
  const int n = sim_in.n();
  double total = 0.0;
  int used = 0;
  for (int anchor = 0; anchor < n; ++anchor) {
    std::vector<std::pair<double, int>> out_pairs, in_pairs;
    for (int j = 0; j < n; ++j) {
      if (j == anchor) continue;
      out_pairs.emplace_back(-sim_out.values(anchor, j), j);
      in_pairs.emplace_back(-sim_in.values(anchor, j), j);
    }
    std::stable_sort(out_pairs.begin(), out_pairs.end());
    std::stable_sort(in_pairs.begin(), in_pairs.end());
    double num = 0.0;
    double den = 0.0;
    for (int pos = 1; pos <= k; ++pos) {
      const double disc = std::log(static_cast<double>(pos) + 1.0) / std::log(2.0);
      num += sim_in.values(anchor, out_pairs[pos - 1].second) / disc;
      den += sim_in.values(anchor, in_pairs[pos - 1].second) / disc;
    }
    if (den == 0.0) continue;
    total += num / den;
    ++used;
  }
  return total / used;
}

// Product-limit estimator over a time -> (events, at-risk) map; returns a
// survival probability lookup at or strictly before t.
struct KmOracle {
  std::vector<double> times;
  std::vector<double> surv;

  static KmOracle fit(const std::vector<double>& t, const std::vector<bool>& e) {
    std::map<double, std::pair<int, int>> by_time;  // time -> (events, count)
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto& entry = by_time[t[i]];
      entry.first += e[i] ? 1 : 0;
      entry.second += 1;
    }
    KmOracle km;
    int at_risk = static_cast<int>(t.size());
    double s = 1.0;
    for (const auto& [time, counts] : by_time) {
      if (counts.first > 0) {
        s *= 1.0 - static_cast<double>(counts.first) / at_risk;
        km.times.push_back(time);
        km.surv.push_back(s);
      }
      at_risk -= counts.second;
    }
    return km;
  }

  double at(double t) const {
    double s = 1.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] <= t) s = surv[i];
    }
    return s;
  }

  double before(double t) const {
    double s = 1.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] < t) s = surv[i];
    }
    return s;
  }
};

inline KmOracle censoring_km(const SurvivalDataset& data) {
  std::vector<double> t;
  std::vector<bool> e;
  for (const auto& r : data.records) {
    t.push_back(r.time);
    e.push_back(!r.event);
  }
  return KmOracle::fit(t, e);
}

// IPCW Brier score re-summed directly from the definition.
inline double brute_brier(const fairsurv::CoxModel& model, const SurvivalDataset& data, double t) {
  const KmOracle g = censoring_km(data);
  double total = 0.0;
  for (const auto& r : data.records) {
    const double s = std::exp(-model.baseline(t) * std::exp(model.beta.dot(r.features)));
    if (r.time <= t && r.event) {
      const double w = g.before(r.time);
      if (w > 0.0) total += s * s / w;
    } else if (r.time > t) {
      const double w = g.at(t);
      if (w > 0.0) total += (1.0 - s) * (1.0 - s) / w;
    }
  }
  return total / data.n();
}

// IPCW cumulative/dynamic AUC by pair enumeration.
inline double brute_tauc(const RiskScores& scores, const SurvivalDataset& data, double t, bool tie_credit = false) {
  const KmOracle g = censoring_km(data);
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const auto& ri = data.records[i];
    if (!(ri.time <= t && ri.event)) continue;
    const double gi = g.before(ri.time);
    if (gi <= 0.0) continue;
    for (int j = 0; j < data.n(); ++j) {
      const auto& rj = data.records[j];
      if (!(rj.time > t)) continue;
      const double gt = g.at(t);
      if (gt <= 0.0) continue;
      const double w = 1.0 / (gi * gt);
      den += w;
      if (scores.values[i] > scores.values[j]) {
        num += w;
      } else if (tie_credit && scores.values[i] == scores.values[j]) {
        num += 0.5 * w;
      }
    }
  }
  return num / den;
}

// Random censored instance for oracle comparisons: standard normal features,
// exponential event times through a random linear hazard, independent
// exponential censoring tuned roughly to the requested rate.
inline SurvivalDataset random_instance(fairsurv::Rng& rng, int n, int p, double censor_rate = 0.4) {
  SurvivalDataset data;
  for (int j = 0; j < p; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = rng.normal() * 0.7;
  for (int i = 0; i < n; ++i) {
    SurvivalRecord r;
    r.features.resize(p);
    for (int j = 0; j < p; ++j) r.features[j] = rng.normal();
    const double rate = std::exp(beta.dot(r.features));
    const double te = rng.exponential(rate);
    // censoring rate roughly censor_rate when scales match
    const double tc = rng.exponential(rate * censor_rate / std::max(1e-12, 1.0 - censor_rate));
    r.event = te <= tc;
    r.time = r.event ? te : tc;
    data.records.push_back(r);
  }
  bool any_event = false;
  for (const auto& r : data.records) any_event = any_event || r.event;
  if (!any_event) data.records[0].event = true;
  return data;
}

inline Eigen::VectorXd random_beta(fairsurv::Rng& rng, int p, double scale = 0.7) {
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = rng.normal() * scale;
  return beta;
}

}  // namespace oracles
