// fairsurv command-line harness: data prep, single fits, cross-validated
// evaluation, gamma/k sweeps, the Lipschitz-ablation comparison, and
// synthetic data generation. Every command is deterministic given its
// configuration and seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fairsurv/fairsurv.hpp"

namespace fs = std::filesystem;
using namespace fairsurv;

namespace {

int worker_count() {
  if (const char* env = std::getenv("FAIRSURV_WORKERS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Grid tokens are plain numbers or e<int> powers of the natural constant,
// e.g. "e-4" or "e2".
double parse_grid_token(const std::string& token) {
  if (token.size() >= 2 && token.front() == 'e') {
    try {
      return std::exp(parse_double(token.substr(1)));
    } catch (const ParseError&) {
      // fall through to plain parsing below
    }
  }
  return parse_double(token);
}

std::vector<double> parse_gamma_grid(const std::vector<std::string>& tokens) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(parse_grid_token(t));
  return out;
}

std::vector<int> parse_k_grid(const std::vector<std::string>& tokens) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(static_cast<int>(parse_double(t)));
  return out;
}

struct CommandContext {
  std::string config_path;
  std::string data_path;
  std::string time_col = "time";
  std::string event_col = "event";
  std::vector<std::string> features;
  std::string out_dir = "out";
  std::string name;
  int folds = 5;
  int subsample_cap = 20000;
  bool tie_credit = false;
  TrainConfig train;

  ConfigFile file;
  bool has_file = false;

  // CLI11 option handles, used to let explicit flags win over config values
  CLI::Option* o_data = nullptr;
  CLI::Option* o_time = nullptr;
  CLI::Option* o_event = nullptr;
  CLI::Option* o_features = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_folds = nullptr;
  CLI::Option* o_cap = nullptr;
  CLI::Option* o_tie = nullptr;
  CLI::Option* o_variant = nullptr;
  CLI::Option* o_gamma = nullptr;
  CLI::Option* o_k = nullptr;
  CLI::Option* o_lr = nullptr;
  CLI::Option* o_epochs = nullptr;
  CLI::Option* o_batch = nullptr;
  CLI::Option* o_tau = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_lipl = nullptr;
  CLI::Option* o_ridge = nullptr;
  std::string variant_str = "fair";

  void add_common(CLI::App* cmd, bool with_data) {
    cmd->add_option("--config", config_path, "config file (key=value with [sections])");
    if (with_data) {
      o_data = cmd->add_option("--data", data_path, "dataset CSV path");
      o_time = cmd->add_option("--time-col", time_col, "time column name");
      o_event = cmd->add_option("--event-col", event_col, "event column name (0/1)");
      o_features = cmd->add_option("--features", features, "feature columns (default: all others)")->delimiter(',');
      o_cap = cmd->add_option("--subsample-cap", subsample_cap, "seeded subsample cap before similarity matrices");
    }
    o_out = cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--name", name, "output file stem");
    o_seed = cmd->add_option("--seed", train.seed, "random seed");
  }

  void add_train(CLI::App* cmd) {
    o_variant = cmd->add_option("--variant", variant_str, "plain, fair or lipschitz")
                    ->check(CLI::IsMember({"plain", "fair", "lipschitz"}));
    o_gamma = cmd->add_option("--gamma", train.gamma, "fairness trade-off weight");
    o_k = cmd->add_option("--k", train.k, "ranked-list length for FNDCG@k");
    o_lr = cmd->add_option("--learning-rate", train.learning_rate, "Adam learning rate");
    o_epochs = cmd->add_option("--epochs", train.epochs, "training epochs");
    o_batch = cmd->add_option("--batch-size", train.batch_size, "mini-batch size");
    o_tau = cmd->add_option("--tau", train.tau, "surrogate temperature");
    o_lipl = cmd->add_option("--lipschitz-L", train.lipschitz_l, "Lipschitz constant (variant=lipschitz)");
    o_ridge = cmd->add_option("--ridge", train.ridge, "ridge penalty weight");
  }

  void add_cv(CLI::App* cmd) { o_folds = cmd->add_option("--folds", folds, "cross-validation folds"); }

  void add_tie(CLI::App* cmd) {
    o_tie = cmd->add_flag("--tie-credit", tie_credit, "count tied risk pairs as 1/2 in C-index and tAUC");
  }

  // Resolution order: defaults < config file < explicit flags.
  void resolve() {
    if (!config_path.empty()) {
      file = ConfigFile::parse_file(config_path);
      has_file = true;
    }
    auto unset = [](CLI::Option* o) { return o != nullptr && o->count() == 0; };
    if (has_file) {
      if (unset(o_data)) data_path = file.get_string("data.path", data_path);
      if (unset(o_time)) time_col = file.get_string("data.time_column", time_col);
      if (unset(o_event)) event_col = file.get_string("data.event_column", event_col);
      if (unset(o_features) && file.has("data.feature_columns")) features = file.get_list("data.feature_columns");
      if (unset(o_out)) out_dir = file.get_string("output.dir", out_dir);
      if (unset(o_cap)) subsample_cap = static_cast<int>(file.get_int("output.subsample_cap", subsample_cap));
      if (unset(o_folds)) folds = static_cast<int>(file.get_int("cv.folds", folds));
      if (unset(o_tie)) tie_credit = file.get_bool("eval.tie_credit", tie_credit);

      TrainConfig from_file = train_config_from_file(file, train);
      if (unset(o_variant)) variant_str = to_string(from_file.variant);
      if (unset(o_gamma)) train.gamma = from_file.gamma;
      if (unset(o_k)) train.k = from_file.k;
      if (unset(o_lr)) train.learning_rate = from_file.learning_rate;
      if (unset(o_epochs)) train.epochs = from_file.epochs;
      if (unset(o_batch)) train.batch_size = from_file.batch_size;
      if (unset(o_tau)) train.tau = from_file.tau;
      if (unset(o_seed)) train.seed = from_file.seed;
      if (unset(o_lipl)) train.lipschitz_l = from_file.lipschitz_l;
      if (unset(o_ridge)) train.ridge = from_file.ridge;
      train.trace_metrics = from_file.trace_metrics;
    }
    train.variant = variant_from_string(variant_str);
  }

  CsvSchema schema() const {
    CsvSchema s;
    s.time_column = time_col;
    s.event_column = event_col;
    s.feature_columns = features;
    return s;
  }

  // Loads the dataset and applies the seeded subsample cap. Returns the
  // original size through subsampled_from when the cap was applied.
  SurvivalDataset load(int* subsampled_from) const {
    if (data_path.empty()) throw IoError("no dataset given (use --data or data.path in the config)");
    SurvivalDataset data = load_csv(data_path, schema());
    *subsampled_from = 0;
    if (data.n() > subsample_cap) {
      *subsampled_from = data.n();
      std::vector<int> idx(static_cast<std::size_t>(data.n()));
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng(train.seed);
      rng.shuffle(idx);
      idx.resize(static_cast<std::size_t>(subsample_cap));
      std::sort(idx.begin(), idx.end());
      data = data.subset(idx);
      warn("subsampled " + std::to_string(*subsampled_from) + " records to " + std::to_string(subsample_cap));
    }
    return data;
  }

  std::string stem(const std::string& fallback) const { return name.empty() ? fallback : name; }
};

fs::path ensure_dir(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

std::string metric_cell(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

void write_cv_csv(const fs::path& path, const CvResult& cv) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << "fold,fndcg_pct,c_index_pct,brier_pct,tauc_pct,error\n";
  for (const auto& f : cv.folds) {
    out << f.fold << ",";
    if (f.error.empty()) {
      out << eval_report_csv_row(f.report);
    } else {
      out << "nan,nan,nan,nan";
    }
    out << "," << f.error << "\n";
  }
  out << "mean," << format_double(cv.fndcg.mean) << "," << format_double(cv.c_index.mean) << ","
      << format_double(cv.brier.mean) << "," << format_double(cv.tauc.mean) << ",\n";
}

nlohmann::json cv_to_json(const CvResult& cv, const TrainConfig& cfg, int folds, int subsampled_from) {
  nlohmann::json j;
  j["config"] = {{"variant", to_string(cfg.variant)},
                 {"gamma", cfg.gamma},
                 {"k", cfg.k},
                 {"learning_rate", cfg.learning_rate},
                 {"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size},
                 {"tau", cfg.tau},
                 {"seed", cfg.seed},
                 {"folds", folds},
                 {"subsampled_from", subsampled_from}};
  j["aggregation"] = "integrated-over-event-times";
  nlohmann::json jf = nlohmann::json::array();
  for (const auto& f : cv.folds) {
    nlohmann::json e = eval_report_to_json(f.report);
    e["fold"] = f.fold;
    e["fold_error"] = f.error;
    jf.push_back(e);
  }
  j["folds"] = jf;
  auto summary = [](const MetricSummary& s) {
    return nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
  };
  j["aggregate"] = {{"fndcg_pct", summary(cv.fndcg)},
                    {"c_index_pct", summary(cv.c_index)},
                    {"brier_pct", summary(cv.brier)},
                    {"tauc_pct", summary(cv.tauc)}};
  return j;
}

int cmd_fit(CommandContext& ctx, std::optional<int> fold) {
  int subsampled_from = 0;
  SurvivalDataset data = ctx.load(&subsampled_from);
  ctx.train.validate();

  SurvivalDataset train_set = data;
  std::string stem_suffix;
  if (fold) {
    if (*fold < 0 || *fold >= ctx.folds) throw DimensionError("--fold out of range for --folds");
    const FoldAssignment fa = kfold_split(data, ctx.folds, ctx.train.seed);
    train_set = data.subset(fa.train_indices(*fold));
    stem_suffix = "_fold" + std::to_string(*fold);
  }
  const FeatureScaler scaler = fit_scaler(train_set);
  const SurvivalDataset train_scaled = apply_scaler(scaler, train_set);
  const FitResult res = fit(train_scaled, ctx.train, &scaler);

  const std::string stem =
      ctx.stem(to_string(ctx.train.variant) + "_seed" + std::to_string(ctx.train.seed)) + stem_suffix;
  const fs::path models = ensure_dir(fs::path(ctx.out_dir) / "models");
  const fs::path traces = ensure_dir(fs::path(ctx.out_dir) / "traces");
  save_model((models / (stem + ".json")).string(), res.model);
  trace_to_csv((traces / (stem + ".csv")).string(), res.trace);
  std::cout << "model: " << (models / (stem + ".json")).string() << "\n"
            << "trace: " << (traces / (stem + ".csv")).string() << "\n"
            << "final fndcg@" << ctx.train.k << " = " << format_double(res.trace.final_fndcg)
            << ", c-index = " << format_double(res.trace.final_c_index) << "\n";
  return 0;
}

int cmd_evaluate(CommandContext& ctx, const std::string& model_path, bool compare) {
  int subsampled_from = 0;
  SurvivalDataset data = ctx.load(&subsampled_from);
  ctx.train.validate();
  const FoldAssignment fa = kfold_split(data, ctx.folds, ctx.train.seed);
  EvaluateOptions opts;
  opts.tie_credit = ctx.tie_credit;
  const fs::path reports = ensure_dir(fs::path(ctx.out_dir) / "reports");
  const std::string stem = ctx.stem("eval_" + to_string(ctx.train.variant) + "_seed" + std::to_string(ctx.train.seed));

  if (!model_path.empty()) {
    // fixed-model evaluation on each held-out fold
    const CoxModel model = load_model(model_path);
    if (!model.has_scaler) throw ParseError(model_path + ": model has no scaler; cannot map held-out data");
    CvResult cv;
    for (int f = 0; f < fa.n_folds; ++f) {
      FoldEval fe;
      fe.fold = f;
      try {
        const SurvivalDataset test = apply_scaler(model.scaler, data.subset(fa.test_indices(f)));
        fe.report = evaluate(model, test, input_similarity(test), ctx.train.k, opts);
        fe.report.variant = to_string(ctx.train.variant);
        fe.report.gamma = ctx.train.gamma;
        fe.report.seed = ctx.train.seed;
        fe.report.fold = f;
        fe.report.subsampled_from = subsampled_from;
      } catch (const Error& e) {
        fe.error = e.what();
      }
      cv.folds.push_back(std::move(fe));
    }
    detail::summarize_cv(cv);
    write_cv_csv(reports / (stem + "_folds.csv"), cv);
    std::ofstream(reports / (stem + ".json")) << cv_to_json(cv, ctx.train, ctx.folds, subsampled_from).dump(2)
                                              << "\n";
    std::cout << "report: " << (reports / (stem + "_folds.csv")).string() << "\n";
    return 0;
  }

  const CvResult cv = cross_validate(data, fa, ctx.train, opts, subsampled_from);
  write_cv_csv(reports / (stem + "_folds.csv"), cv);
  std::ofstream(reports / (stem + ".json")) << cv_to_json(cv, ctx.train, ctx.folds, subsampled_from).dump(2) << "\n";
  std::cout << "report: " << (reports / (stem + "_folds.csv")).string() << "\n";

  if (compare) {
    TrainConfig plain_cfg = ctx.train;
    plain_cfg.variant = Variant::plain;
    TrainConfig fair_cfg = ctx.train;
    fair_cfg.variant = Variant::fair;
    const CvResult cv_plain = cross_validate(data, fa, plain_cfg, opts, subsampled_from);
    const CvResult cv_fair = cross_validate(data, fa, fair_cfg, opts, subsampled_from);
    const fs::path paired = reports / (stem + "_paired.csv");
    std::ofstream out(paired);
    if (!out) throw IoError("cannot write file: " + paired.string());
    out << "fold,fndcg_plain,fndcg_fair,cindex_plain,cindex_fair,brier_plain,brier_fair,tauc_plain,tauc_fair\n";
    for (int f = 0; f < fa.n_folds; ++f) {
      const auto& rp = cv_plain.folds[static_cast<std::size_t>(f)].report;
      const auto& rf = cv_fair.folds[static_cast<std::size_t>(f)].report;
      out << f << "," << metric_cell(rp.fndcg_pct) << "," << metric_cell(rf.fndcg_pct) << ","
          << metric_cell(rp.c_index_pct) << "," << metric_cell(rf.c_index_pct) << "," << metric_cell(rp.brier_pct)
          << "," << metric_cell(rf.brier_pct) << "," << metric_cell(rp.tauc_pct) << "," << metric_cell(rf.tauc_pct)
          << "\n";
    }
    out << "mean," << format_double(cv_plain.fndcg.mean) << "," << format_double(cv_fair.fndcg.mean) << ","
        << format_double(cv_plain.c_index.mean) << "," << format_double(cv_fair.c_index.mean) << ","
        << format_double(cv_plain.brier.mean) << "," << format_double(cv_fair.brier.mean) << ","
        << format_double(cv_plain.tauc.mean) << "," << format_double(cv_fair.tauc.mean) << "\n";
    std::cout << "paired: " << paired.string() << "\n";
  }
  return 0;
}

int cmd_sweep(CommandContext& ctx, const std::vector<std::string>& gamma_tokens,
              const std::vector<std::string>& k_tokens) {
  int subsampled_from = 0;
  SurvivalDataset data = ctx.load(&subsampled_from);
  ctx.train.validate();

  std::vector<std::string> gt = gamma_tokens;
  std::vector<std::string> kt = k_tokens;
  if (gt.empty() && ctx.has_file) gt = ctx.file.get_list("sweep.gamma_grid");
  if (kt.empty() && ctx.has_file) kt = ctx.file.get_list("sweep.k_grid");
  if (gt.empty()) gt = {"e-4", "e-3", "e-2", "e-1", "e0", "e1", "e2", "e3", "e4"};
  if (kt.empty()) kt = {"4", "7", "10", "15", "20", "30", "50"};
  const std::vector<double> gamma_grid = parse_gamma_grid(gt);
  const std::vector<int> k_grid = parse_k_grid(kt);

  const FoldAssignment fa = kfold_split(data, ctx.folds, ctx.train.seed);
  EvaluateOptions opts;
  opts.tie_credit = ctx.tie_credit;
  const std::vector<GridRow> rows =
      grid_search(data, fa, gamma_grid, k_grid, ctx.train, opts, worker_count(), subsampled_from);

  const fs::path sweeps = ensure_dir(fs::path(ctx.out_dir) / "sweeps");
  const std::string stem = ctx.stem("sweep_" + to_string(ctx.train.variant) + "_seed" + std::to_string(ctx.train.seed));
  const fs::path csv_path = sweeps / (stem + ".csv");
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write file: " + csv_path.string());
  out << "variant,gamma,k,fold,metric,value\n";
  std::vector<std::string> failures;
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      failures.push_back(row.error);
      continue;
    }
    for (const auto& f : row.cv.folds) {
      if (!f.error.empty()) {
        failures.push_back("gamma=" + format_double(row.gamma) + ", k=" + std::to_string(row.k) + ", fold " +
                           std::to_string(f.fold) + ": " + f.error);
        continue;
      }
      const std::string prefix = to_string(ctx.train.variant) + "," + format_double(row.gamma) + "," +
                                 std::to_string(row.k) + "," + std::to_string(f.fold) + ",";
      out << prefix << "fndcg," << metric_cell(f.report.fndcg_pct) << "\n";
      out << prefix << "c_index," << metric_cell(f.report.c_index_pct) << "\n";
      out << prefix << "brier," << metric_cell(f.report.brier_pct) << "\n";
      out << prefix << "tauc," << metric_cell(f.report.tauc_pct) << "\n";
    }
  }
  std::cout << "sweep: " << csv_path.string() << "\n";
  if (!failures.empty()) {
    const fs::path err_path = sweeps / (stem + "_errors.csv");
    std::ofstream err(err_path);
    err << "error\n";
    for (const auto& e : failures) err << e << "\n";
    std::cout << failures.size() << " cell failure(s) recorded in " << err_path.string() << "\n";
  }
  return 0;
}

int cmd_ablation(CommandContext& ctx, bool include_plain) {
  int subsampled_from = 0;
  SurvivalDataset data = ctx.load(&subsampled_from);
  ctx.train.validate();
  const FoldAssignment fa = kfold_split(data, ctx.folds, ctx.train.seed);
  EvaluateOptions opts;
  opts.tie_credit = ctx.tie_credit;

  std::vector<Variant> variants = {Variant::lipschitz, Variant::fair};
  if (include_plain) variants.push_back(Variant::plain);

  const fs::path reports = ensure_dir(fs::path(ctx.out_dir) / "reports");
  const std::string stem = ctx.stem("ablation_seed" + std::to_string(ctx.train.seed));
  const fs::path csv_path = reports / (stem + ".csv");
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write file: " + csv_path.string());
  out << "variant";
  for (int f = 0; f < fa.n_folds; ++f) out << ",fndcg_fold" << f;
  out << ",fndcg_mean";
  for (int f = 0; f < fa.n_folds; ++f) out << ",cindex_fold" << f;
  out << ",cindex_mean\n";
  for (Variant v : variants) {
    TrainConfig cfg = ctx.train;
    cfg.variant = v;
    const CvResult cv = cross_validate(data, fa, cfg, opts, subsampled_from);
    out << to_string(v);
    for (const auto& f : cv.folds) out << "," << metric_cell(f.report.fndcg_pct);
    out << "," << format_double(cv.fndcg.mean);
    for (const auto& f : cv.folds) out << "," << metric_cell(f.report.c_index_pct);
    out << "," << format_double(cv.c_index.mean);
    out << "\n";
  }
  std::cout << "ablation: " << csv_path.string() << "\n";
  return 0;
}

int cmd_synth(CommandContext& ctx, int n, int p, const std::vector<std::string>& beta_tokens, double censor_rate,
              const std::string& out_file) {
  std::vector<std::string> bt = beta_tokens;
  if (bt.empty() && ctx.has_file) bt = ctx.file.get_list("synth.beta");
  if (ctx.has_file) {
    if (n == 0) n = static_cast<int>(ctx.file.get_int("synth.n", 0));
    if (p == 0) p = static_cast<int>(ctx.file.get_int("synth.p", 0));
    if (censor_rate == 0.0) censor_rate = ctx.file.get_double("synth.censor_rate", 0.0);
  }
  if (n == 0 || p == 0) throw DimensionError("synth: --n and --p are required");
  if (censor_rate == 0.0) censor_rate = 0.3;
  Eigen::VectorXd beta(p);
  if (bt.empty()) {
    beta.setZero();
    beta[0] = 1.0;
  } else {
    if (static_cast<int>(bt.size()) != p) throw DimensionError("synth: --beta length must equal --p");
    for (int j = 0; j < p; ++j) beta[j] = parse_double(bt[static_cast<std::size_t>(j)]);
  }

  SyntheticGroundTruth truth;
  const SurvivalDataset data = generate_synthetic(n, p, beta, censor_rate, ctx.train.seed, &truth);
  const fs::path out_path = out_file.empty() ? fs::path(ctx.out_dir) / "synthetic.csv" : fs::path(out_file);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_csv(out_path.string(), data);

  nlohmann::json meta;
  meta["beta_true"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  meta["censor_rate_target"] = truth.censor_rate_target;
  meta["censor_scale"] = truth.censor_scale;
  meta["realized_censor_rate"] = truth.realized_censor_rate;
  meta["seed"] = truth.seed;
  meta["n"] = n;
  meta["p"] = p;
  std::ofstream(out_path.string() + ".meta.json") << meta.dump(2) << "\n";
  std::cout << "dataset: " << out_path.string() << "\n"
            << "sidecar: " << out_path.string() << ".meta.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairness-aware survival analysis toolkit"};
  app.require_subcommand(1);

  CommandContext fit_ctx, eval_ctx, sweep_ctx, abl_ctx, synth_ctx;

  auto* fit_cmd = app.add_subcommand("fit", "train one model on full data or one fold's training split");
  fit_ctx.add_common(fit_cmd, true);
  fit_ctx.add_train(fit_cmd);
  fit_ctx.add_cv(fit_cmd);
  std::optional<int> fit_fold;
  fit_cmd->add_option("--fold", fit_fold, "train on this fold's training split (requires --folds)");

  auto* eval_cmd = app.add_subcommand("evaluate", "cross-validated evaluation with per-fold and aggregate rows");
  eval_ctx.add_common(eval_cmd, true);
  eval_ctx.add_train(eval_cmd);
  eval_ctx.add_cv(eval_cmd);
  eval_ctx.add_tie(eval_cmd);
  std::string eval_model;
  bool eval_compare = false;
  eval_cmd->add_option("--model", eval_model, "evaluate this model file instead of training per fold");
  eval_cmd->add_flag("--compare", eval_compare, "also emit a plain-vs-fair paired comparison CSV");

  auto* sweep_cmd = app.add_subcommand("sweep", "gamma/k grid search, long-format CSV output");
  sweep_ctx.add_common(sweep_cmd, true);
  sweep_ctx.add_train(sweep_cmd);
  sweep_ctx.add_cv(sweep_cmd);
  sweep_ctx.add_tie(sweep_cmd);
  std::vector<std::string> gamma_tokens, k_tokens;
  sweep_cmd->add_option("--gamma-grid", gamma_tokens, "gamma values (numbers or e<n> tokens)")->delimiter(',');
  sweep_cmd->add_option("--k-grid", k_tokens, "k values")->delimiter(',');

  auto* abl_cmd =
      app.add_subcommand("ablation", "fairness-surrogate vs Lipschitz-penalty variants on identical folds and seeds");
  abl_ctx.add_common(abl_cmd, true);
  abl_ctx.add_train(abl_cmd);
  abl_ctx.add_cv(abl_cmd);
  abl_ctx.add_tie(abl_cmd);
  bool include_plain = false;
  abl_cmd->add_flag("--include-plain", include_plain, "add a plain CPH row");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic proportional-hazards dataset CSV");
  synth_ctx.add_common(synth_cmd, false);
  int synth_n = 0, synth_p = 0;
  double synth_censor = 0.0;
  std::vector<std::string> synth_beta;
  std::string synth_out_file;
  synth_cmd->add_option("--n", synth_n, "record count");
  synth_cmd->add_option("--p", synth_p, "feature count");
  synth_cmd->add_option("--beta", synth_beta, "true coefficients (comma list)")->delimiter(',');
  synth_cmd->add_option("--censor-rate", synth_censor, "target censoring fraction in (0,1)");
  synth_cmd->add_option("--out-file", synth_out_file, "output CSV path (default <out>/synthetic.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit_cmd->parsed()) {
      fit_ctx.resolve();
      return cmd_fit(fit_ctx, fit_fold);
    }
    if (eval_cmd->parsed()) {
      eval_ctx.resolve();
      return cmd_evaluate(eval_ctx, eval_model, eval_compare);
    }
    if (sweep_cmd->parsed()) {
      sweep_ctx.resolve();
      return cmd_sweep(sweep_ctx, gamma_tokens, k_tokens);
    }
    if (abl_cmd->parsed()) {
      abl_ctx.resolve();
      return cmd_ablation(abl_ctx, include_plain);
    }
    if (synth_cmd->parsed()) {
      synth_ctx.resolve();
      return cmd_synth(synth_ctx, synth_n, synth_p, synth_beta, synth_censor, synth_out_file);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
