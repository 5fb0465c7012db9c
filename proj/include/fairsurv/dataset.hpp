#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairsurv/common.hpp"

namespace fairsurv {

// One individual's (x, T, delta) tuple. `time` is the survival time when
// `event` is true, otherwise the censoring time.
struct SurvivalRecord {
  Eigen::VectorXd features;
  double time = 0.0;
  bool event = false;
};

struct SurvivalDataset {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> feature_names;

  int n() const { return static_cast<int>(records.size()); }
  int p() const {
    return records.empty() ? static_cast<int>(feature_names.size())
                           : static_cast<int>(records.front().features.size());
  }

  int event_count() const {
    int c = 0;
    for (const auto& r : records) c += r.event ? 1 : 0;
    return c;
  }
  int censored_count() const { return n() - event_count(); }

  // n x p matrix of features, row i = record i.
  Eigen::MatrixXd feature_matrix() const {
    Eigen::MatrixXd x(n(), p());
    for (int i = 0; i < n(); ++i) x.row(i) = records[i].features.transpose();
    return x;
  }

  Eigen::VectorXd times() const {
    Eigen::VectorXd t(n());
    for (int i = 0; i < n(); ++i) t[i] = records[i].time;
    return t;
  }

  std::vector<bool> events() const {
    std::vector<bool> e(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) e[i] = records[i].event;
    return e;
  }

  SurvivalDataset subset(const std::vector<int>& indices) const {
    SurvivalDataset out;
    out.feature_names = feature_names;
    out.records.reserve(indices.size());
    for (int i : indices) out.records.push_back(records[static_cast<std::size_t>(i)]);
    return out;
  }
};

// Checks the module invariants for an ingested dataset. Derived subsets
// (folds, batches) may legitimately violate the event-count invariant and are
// checked where it matters instead.
inline void validate_dataset(const SurvivalDataset& data) {
  if (data.n() < 2) throw ParseError("dataset needs at least 2 records, got " + std::to_string(data.n()));
  const int p = data.p();
  for (int i = 0; i < data.n(); ++i) {
    const auto& r = data.records[static_cast<std::size_t>(i)];
    if (r.features.size() != p) {
      throw DimensionError("record " + std::to_string(i) + " has " + std::to_string(r.features.size()) +
                           " features, expected " + std::to_string(p));
    }
    if (!(r.time > 0.0)) {
      throw ParseError("record " + std::to_string(i) + " has non-positive time " + format_double(r.time));
    }
  }
  if (data.event_count() == 0) {
    throw ParseError("dataset has no observed events; the partial likelihood is undefined");
  }
}

// Column mapping for load_csv. Empty `feature_columns` means: every column
// that is neither the time nor the event column, in file order.
struct CsvSchema {
  std::string time_column;
  std::string event_column;
  std::vector<std::string> feature_columns;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Reads a UTF-8, comma-delimited CSV with a header row. Row order is
// preserved. Missing cells and non-numeric features are hard errors.
inline SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);

  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError(path + ": empty file");
  // strip a UTF-8 BOM if present
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header_line.erase(0, 3);
  }

  std::vector<std::string> header = detail::split_csv_line(header_line);
  for (auto& h : header) h = detail::trim(h);

  std::unordered_map<std::string, int> col_index;
  for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = static_cast<int>(i);

  auto require_column = [&](const std::string& name) {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw SchemaError(path + ": missing column '" + name + "'");
    return it->second;
  };

  const int time_col = require_column(schema.time_column);
  const int event_col = require_column(schema.event_column);

  std::vector<std::string> feature_names;
  std::vector<int> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      const int ci = static_cast<int>(i);
      if (ci != time_col && ci != event_col) {
        feature_names.push_back(header[i]);
        feature_cols.push_back(ci);
      }
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      feature_cols.push_back(require_column(name));
      feature_names.push_back(name);
    }
  }

  SurvivalDataset data;
  data.feature_names = feature_names;

  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    ++row;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    }
    auto cell = [&](int col, const std::string& what) -> double {
      const std::string v = detail::trim(cells[static_cast<std::size_t>(col)]);
      if (v.empty()) {
        throw ParseError(path + ": row " + std::to_string(row) + ", column '" + header[static_cast<std::size_t>(col)] +
                         "': missing value");
      }
      try {
        return parse_double(v);
      } catch (const ParseError&) {
        throw ParseError(path + ": row " + std::to_string(row) + ", column '" + header[static_cast<std::size_t>(col)] +
                         "': cannot parse " + what + " from '" + v + "'");
      }
    };

    SurvivalRecord rec;
    rec.time = cell(time_col, "time");
    if (!(rec.time > 0.0)) {
      throw ParseError(path + ": row " + std::to_string(row) + ": time must be positive, got " +
                       format_double(rec.time));
    }
    const double ev = cell(event_col, "event");
    if (ev != 0.0 && ev != 1.0) {
      throw ParseError(path + ": row " + std::to_string(row) + ": event must be 0 or 1, got " + format_double(ev));
    }
    rec.event = ev == 1.0;
    rec.features.resize(static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      rec.features[static_cast<Eigen::Index>(f)] = cell(feature_cols[f], "feature");
    }
    data.records.push_back(std::move(rec));
  }

  validate_dataset(data);
  return data;
}

// Writes the dataset as feature columns followed by time and event. Doubles
// use shortest round-trip formatting, so load_csv(save_csv(d)) == d bitwise.
inline void save_csv(const std::string& path, const SurvivalDataset& data, const std::string& time_column = "time",
                     const std::string& event_column = "event") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  for (const auto& name : data.feature_names) out << name << ",";
  out << time_column << "," << event_column << "\n";
  for (const auto& r : data.records) {
    for (Eigen::Index j = 0; j < r.features.size(); ++j) out << format_double(r.features[j]) << ",";
    out << format_double(r.time) << "," << (r.event ? 1 : 0) << "\n";
  }
}

// Per-feature affine transform x -> (x - center) / scale.
struct FeatureScaler {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const {
    if (x.size() != center.size()) {
      throw DimensionError("scaler fitted on " + std::to_string(center.size()) + " features, got " +
                           std::to_string(x.size()));
    }
    return (x - center).cwiseQuotient(scale);
  }

  Eigen::VectorXd inverse(const Eigen::VectorXd& z) const {
    if (z.size() != center.size()) {
      throw DimensionError("scaler fitted on " + std::to_string(center.size()) + " features, got " +
                           std::to_string(z.size()));
    }
    return z.cwiseProduct(scale) + center;
  }
};

// Z-score scaler over the given (training) set, population standard
// deviation. Constant columns keep scale 1 and are centered only.
inline FeatureScaler fit_scaler(const SurvivalDataset& data) {
  if (data.n() < 2) throw DimensionError("fit_scaler needs at least 2 records");
  const Eigen::MatrixXd x = data.feature_matrix();
  FeatureScaler s;
  s.center = x.colwise().mean();
  Eigen::VectorXd var = (x.rowwise() - s.center.transpose()).array().square().colwise().mean();
  s.scale = var.array().sqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (s.scale[j] <= 0.0) s.scale[j] = 1.0;
  }
  return s;
}

inline SurvivalDataset apply_scaler(const FeatureScaler& scaler, const SurvivalDataset& data) {
  SurvivalDataset out = data;
  for (auto& r : out.records) r.features = scaler.transform(r.features);
  return out;
}

inline SurvivalDataset invert_scaler(const FeatureScaler& scaler, const SurvivalDataset& data) {
  SurvivalDataset out = data;
  for (auto& r : out.records) r.features = scaler.inverse(r.features);
  return out;
}

struct FoldAssignment {
  std::vector<int> fold_of;  // fold index per record
  int n_folds = 0;

  std::vector<int> test_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  std::vector<int> train_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != fold) out.push_back(static_cast<int>(i));
    }
    return out;
  }
};

// Deterministic k-fold split stratified on the event indicator: events and
// censored records are shuffled separately and dealt consecutively, so fold
// sizes differ by at most one and so do per-fold event counts.
inline FoldAssignment kfold_split(const SurvivalDataset& data, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw DimensionError("n_folds must be >= 2, got " + std::to_string(n_folds));
  if (data.n() < n_folds) {
    throw DimensionError("cannot split " + std::to_string(data.n()) + " records into " + std::to_string(n_folds) +
                         " folds");
  }
  std::vector<int> events, censored;
  for (int i = 0; i < data.n(); ++i) {
    (data.records[static_cast<std::size_t>(i)].event ? events : censored).push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(events);
  rng.shuffle(censored);

  FoldAssignment fa;
  fa.n_folds = n_folds;
  fa.fold_of.assign(static_cast<std::size_t>(data.n()), -1);
  int next = 0;
  for (int idx : events) {
    fa.fold_of[static_cast<std::size_t>(idx)] = next;
    next = (next + 1) % n_folds;
  }
  for (int idx : censored) {
    fa.fold_of[static_cast<std::size_t>(idx)] = next;
    next = (next + 1) % n_folds;
  }
  return fa;
}

struct SyntheticGroundTruth {
  Eigen::VectorXd beta_true;
  double censor_rate_target = 0.0;
  double censor_scale = 0.0;  // rate of the exponential censoring distribution
  double realized_censor_rate = 0.0;
  std::uint64_t seed = 0;
};

// Proportional-hazards generator: x ~ N(0, I), event time ~ Exp(exp(beta'x)),
// censoring time ~ Exp(c) with c chosen from the realized draws so that the
// achieved censoring fraction matches the target as closely as n permits.
inline SurvivalDataset generate_synthetic(int n, int p, const Eigen::VectorXd& beta_true, double censor_rate,
                                          std::uint64_t seed, SyntheticGroundTruth* truth = nullptr) {
  if (beta_true.size() != p) {
    throw DimensionError("beta_true has length " + std::to_string(beta_true.size()) + ", expected " +
                         std::to_string(p));
  }
  if (!(censor_rate > 0.0 && censor_rate < 1.0)) {
    throw DimensionError("censor_rate must be in (0,1), got " + format_double(censor_rate));
  }
  if (n < 2) throw DimensionError("n must be >= 2");

  Rng rng(seed);
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n));
  std::vector<double> event_times(static_cast<std::size_t>(n));
  std::vector<double> censor_units(static_cast<std::size_t>(n));  // Exp(1) draws, scaled below
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) x[j] = rng.normal();
    const double rate = std::exp(beta_true.dot(x));
    xs[static_cast<std::size_t>(i)] = std::move(x);
    event_times[static_cast<std::size_t>(i)] = rng.exponential(rate);
    censor_units[static_cast<std::size_t>(i)] = rng.exponential(1.0);
  }

  // Censoring time is E_i / c. Record i is censored iff E_i / c < T_i, i.e.
  // iff c > E_i / T_i, so the censored count as a function of c is the
  // empirical CDF of the ratios; pick c between the order statistics
  // bracketing the target count.
  std::vector<double> ratios(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ratios[static_cast<std::size_t>(i)] = censor_units[static_cast<std::size_t>(i)] / event_times[static_cast<std::size_t>(i)];
  }
  std::vector<double> sorted = ratios;
  std::sort(sorted.begin(), sorted.end());
  const int target = std::clamp(static_cast<int>(std::lround(censor_rate * n)), 1, n - 1);
  const double lo = sorted[static_cast<std::size_t>(target - 1)];
  const double hi = sorted[static_cast<std::size_t>(target)];
  const double c = std::sqrt(lo * hi) > 0.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);

  SurvivalDataset data;
  data.feature_names.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));
  data.records.reserve(static_cast<std::size_t>(n));
  int censored = 0;
  for (int i = 0; i < n; ++i) {
    const double t_event = event_times[static_cast<std::size_t>(i)];
    const double t_censor = censor_units[static_cast<std::size_t>(i)] / c;
    SurvivalRecord rec;
    rec.features = xs[static_cast<std::size_t>(i)];
    rec.event = t_event <= t_censor;
    rec.time = rec.event ? t_event : t_censor;
    censored += rec.event ? 0 : 1;
    data.records.push_back(std::move(rec));
  }
  if (truth) {
    truth->beta_true = beta_true;
    truth->censor_rate_target = censor_rate;
    truth->censor_scale = c;
    truth->realized_censor_rate = static_cast<double>(censored) / n;
    truth->seed = seed;
  }
  return data;
}

}  // namespace fairsurv
