#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fairsurv/dataset.hpp"

namespace fairsurv {

// Fitted Cox proportional-hazards model: coefficients plus the Breslow
// estimate of the cumulative baseline hazard, and the scaler the training
// data was standardized with (so held-out data can be mapped into the same
// space).
struct CoxModel {
  Eigen::VectorXd beta;
  StepFunction baseline;  // cumulative baseline hazard H0(t), initial 0
  FeatureScaler scaler;
  bool has_scaler = false;
};

struct RiskScores {
  Eigen::VectorXd values;  // exp(beta' x_i), all > 0
};

inline RiskScores risk_scores(const Eigen::VectorXd& beta, const SurvivalDataset& data) {
  if (data.p() != beta.size()) {
    throw DimensionError("beta has length " + std::to_string(beta.size()) + ", data has " + std::to_string(data.p()) +
                         " features");
  }
  RiskScores s;
  s.values = (data.feature_matrix() * beta).array().exp();
  return s;
}

inline RiskScores risk_scores(const CoxModel& model, const SurvivalDataset& data) {
  return risk_scores(model.beta, data);
}

namespace detail {

// Indices sorted by time descending; ties broken by ascending index so every
// reduction below has a fixed order.
inline std::vector<int> order_by_time_desc(const SurvivalDataset& data) {
  std::vector<int> order(static_cast<std::size_t>(data.n()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ta = data.records[static_cast<std::size_t>(a)].time;
    const double tb = data.records[static_cast<std::size_t>(b)].time;
    if (ta != tb) return ta > tb;
    return a < b;
  });
  return order;
}

// Streaming log-sum-exp accumulator: after add(eta), logsum() is
// log(sum exp(eta_j)) over everything added so far.
struct LogSumExp {
  double max_eta = -std::numeric_limits<double>::infinity();
  double sum = 0.0;  // sum of exp(eta - max_eta)

  void add(double eta) {
    if (eta <= max_eta) {
      sum += std::exp(eta - max_eta);
    } else {
      sum = sum * std::exp(max_eta - eta) + 1.0;
      max_eta = eta;
    }
  }
  double logsum() const { return max_eta + std::log(sum); }
};

}  // namespace detail

// Negative log partial likelihood with Breslow handling of ties: the risk set
// of an event at time t is every record with T >= t, tied events included.
// An optional ridge term lambda * ||beta||^2 can be added.
inline double neg_log_partial_likelihood(const Eigen::VectorXd& beta, const SurvivalDataset& data,
                                         double ridge = 0.0) {
  if (data.p() != beta.size()) {
    throw DimensionError("beta/data dimension mismatch in neg_log_partial_likelihood");
  }
  if (data.event_count() == 0) {
    throw ComputeError("no observed events: partial likelihood is undefined");
  }
  const Eigen::VectorXd eta = data.feature_matrix() * beta;
  const std::vector<int> order = detail::order_by_time_desc(data);

  detail::LogSumExp lse;
  double nll = 0.0;
  std::size_t i = 0;
  const std::size_t n = order.size();
  while (i < n) {
    // pull in the whole tie group before scoring its events
    std::size_t j = i;
    const double t = data.records[static_cast<std::size_t>(order[i])].time;
    while (j < n && data.records[static_cast<std::size_t>(order[j])].time == t) {
      lse.add(eta[order[j]]);
      ++j;
    }
    const double log_denom = lse.logsum();
    for (std::size_t k = i; k < j; ++k) {
      const int idx = order[k];
      if (data.records[static_cast<std::size_t>(idx)].event) {
        nll -= eta[idx] - log_denom;
      }
    }
    i = j;
  }
  if (ridge > 0.0) nll += ridge * beta.squaredNorm();
  return nll;
}

// Analytic gradient of neg_log_partial_likelihood.
inline Eigen::VectorXd nll_gradient(const Eigen::VectorXd& beta, const SurvivalDataset& data, double ridge = 0.0) {
  if (data.p() != beta.size()) {
    throw DimensionError("beta/data dimension mismatch in nll_gradient");
  }
  if (data.event_count() == 0) {
    throw ComputeError("no observed events: partial likelihood is undefined");
  }
  const Eigen::MatrixXd x = data.feature_matrix();
  const Eigen::VectorXd eta = x * beta;
  const std::vector<int> order = detail::order_by_time_desc(data);

  // running sums of w_j and w_j * x_j over the risk set, kept in the scaled
  // frame exp(eta - max_eta) for stability
  double max_eta = -std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(beta.size());

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(beta.size());
  std::size_t i = 0;
  const std::size_t n = order.size();
  while (i < n) {
    std::size_t j = i;
    const double t = data.records[static_cast<std::size_t>(order[i])].time;
    while (j < n && data.records[static_cast<std::size_t>(order[j])].time == t) {
      const int idx = order[j];
      if (eta[idx] > max_eta) {
        const double rescale = std::exp(max_eta - eta[idx]);
        s0 *= rescale;
        s1 *= rescale;
        max_eta = eta[idx];
      }
      const double w = std::exp(eta[idx] - max_eta);
      s0 += w;
      s1 += w * x.row(idx).transpose();
      ++j;
    }
    for (std::size_t k = i; k < j; ++k) {
      const int idx = order[k];
      if (data.records[static_cast<std::size_t>(idx)].event) {
        grad -= x.row(idx).transpose() - s1 / s0;
      }
    }
    i = j;
  }
  if (ridge > 0.0) grad += 2.0 * ridge * beta;
  return grad;
}

// Breslow estimate of the cumulative baseline hazard:
// H0(t) = sum over event times t_i <= t of d_i / sum_{T_j >= t_i} exp(eta_j).
inline StepFunction breslow_baseline(const Eigen::VectorXd& beta, const SurvivalDataset& data) {
  if (data.event_count() == 0) {
    throw ComputeError("no observed events: baseline hazard is undefined");
  }
  const Eigen::VectorXd eta = data.feature_matrix() * beta;
  const std::vector<int> order = detail::order_by_time_desc(data);

  detail::LogSumExp lse;
  std::vector<double> jump_times;
  std::vector<double> jumps;
  std::size_t i = 0;
  const std::size_t n = order.size();
  while (i < n) {
    std::size_t j = i;
    const double t = data.records[static_cast<std::size_t>(order[i])].time;
    int d = 0;
    while (j < n && data.records[static_cast<std::size_t>(order[j])].time == t) {
      lse.add(eta[order[j]]);
      d += data.records[static_cast<std::size_t>(order[j])].event ? 1 : 0;
      ++j;
    }
    if (d > 0) {
      jump_times.push_back(t);
      jumps.push_back(std::exp(std::log(static_cast<double>(d)) - lse.logsum()));
    }
    i = j;
  }
  // times were visited descending; flip and accumulate
  std::reverse(jump_times.begin(), jump_times.end());
  std::reverse(jumps.begin(), jumps.end());
  StepFunction h0;
  h0.initial = 0.0;
  h0.times = std::move(jump_times);
  h0.values.resize(jumps.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    acc += jumps[k];
    h0.values[k] = acc;
  }
  return h0;
}

// S(t|x) = exp(-H0(t) * exp(beta' x)).
inline double survival_function(const CoxModel& model, const Eigen::VectorXd& x, double t) {
  if (t < 0.0) throw DimensionError("survival_function: t must be >= 0, got " + format_double(t));
  const double risk = std::exp(model.beta.dot(x));
  return std::exp(-model.baseline(t) * risk);
}

// Product-limit estimator. Jumps only at event times; right-continuous.
inline StepFunction kaplan_meier(const std::vector<double>& times, const std::vector<bool>& events) {
  if (times.empty()) throw DimensionError("kaplan_meier: empty input");
  if (times.size() != events.size()) throw DimensionError("kaplan_meier: times/events length mismatch");
  for (double t : times) {
    if (!(t > 0.0)) throw DimensionError("kaplan_meier: times must be positive");
  }
  std::vector<int> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (times[static_cast<std::size_t>(a)] != times[static_cast<std::size_t>(b)]) {
      return times[static_cast<std::size_t>(a)] < times[static_cast<std::size_t>(b)];
    }
    return a < b;
  });

  StepFunction km;
  km.initial = 1.0;
  double s = 1.0;
  std::size_t i = 0;
  const std::size_t n = order.size();
  while (i < n) {
    const double t = times[static_cast<std::size_t>(order[i])];
    const std::size_t at_risk = n - i;
    std::size_t j = i;
    int d = 0;
    while (j < n && times[static_cast<std::size_t>(order[j])] == t) {
      d += events[static_cast<std::size_t>(order[j])] ? 1 : 0;
      ++j;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      km.times.push_back(t);
      km.values.push_back(s);
    }
    i = j;
  }
  return km;
}

inline StepFunction kaplan_meier(const SurvivalDataset& data) {
  std::vector<double> t(static_cast<std::size_t>(data.n()));
  std::vector<bool> e(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) {
    t[static_cast<std::size_t>(i)] = data.records[static_cast<std::size_t>(i)].time;
    e[static_cast<std::size_t>(i)] = data.records[static_cast<std::size_t>(i)].event;
  }
  return kaplan_meier(t, e);
}

// Kaplan-Meier estimate of the censoring distribution G(t) = Pr(C > t),
// i.e. the product-limit curve with the event indicator flipped.
inline StepFunction censoring_survival(const SurvivalDataset& data) {
  std::vector<double> t(static_cast<std::size_t>(data.n()));
  std::vector<bool> e(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) {
    t[static_cast<std::size_t>(i)] = data.records[static_cast<std::size_t>(i)].time;
    e[static_cast<std::size_t>(i)] = !data.records[static_cast<std::size_t>(i)].event;
  }
  return kaplan_meier(t, e);
}

}  // namespace fairsurv
