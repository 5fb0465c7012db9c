#include <catch2/catch.hpp>

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "fairsurv/dataset.hpp"
#include "fairsurv/model_io.hpp"

#include <json.hpp>

using namespace fairsurv;
namespace fs = std::filesystem;

#ifndef FAIRSURV_CLI_PATH
#error "FAIRSURV_CLI_PATH must be defined"
#endif

namespace {

struct RunResult {
  int exit_code;
};

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "fairsurv_cli_tests";
  fs::create_directories(dir);
  return dir;
}

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(FAIRSURV_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return RunResult{WEXITSTATUS(status)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// small dataset reused across commands
fs::path make_dataset(int n = 120, std::uint64_t seed = 3) {
  const fs::path csv = work_dir() / ("data_" + std::to_string(n) + "_" + std::to_string(seed) + ".csv");
  if (!fs::exists(csv)) {
    Eigen::VectorXd beta(2);
    beta << 1.0, -0.5;
    save_csv(csv.string(), generate_synthetic(n, 2, beta, 0.3, seed));
  }
  return csv;
}

}  // namespace

TEST_CASE("synth writes a loadable CSV with a ground-truth sidecar") {
  const fs::path out = work_dir() / "synth_out.csv";
  fs::remove(out);
  fs::remove(out.string() + ".meta.json");
  const auto res = run_cli("synth --n 200 --p 2 --beta 1.0,-0.5 --censor-rate 0.3 --seed 5 --out-file " +
                           out.string());
  REQUIRE(res.exit_code == 0);

  const SurvivalDataset data = load_csv(out.string(), CsvSchema{"time", "event", {}});
  CHECK(data.n() == 200);
  CHECK(data.p() == 2);

  const auto header = lines_of(out)[0];
  CHECK(header == "x1,x2,time,event");

  nlohmann::json meta;
  std::ifstream(out.string() + ".meta.json") >> meta;
  CHECK(meta.at("beta_true").get<std::vector<double>>() == std::vector<double>{1.0, -0.5});
  CHECK(meta.at("seed").get<int>() == 5);

  SECTION("regenerating the file is byte-identical") {
    const std::string first = slurp(out);
    const auto res2 = run_cli("synth --n 200 --p 2 --beta 1.0,-0.5 --censor-rate 0.3 --seed 5 --out-file " +
                              out.string());
    REQUIRE(res2.exit_code == 0);
    CHECK(slurp(out) == first);
  }
  SECTION("the generated dataset round-trips through load_csv") {
    const fs::path again = work_dir() / "synth_again.csv";
    save_csv(again.string(), data);
    CHECK(slurp(again) == slurp(out));
  }
}

TEST_CASE("fit produces a model JSON and a trace CSV") {
  const fs::path data = make_dataset();
  const fs::path out = work_dir() / "fit_out";
  fs::remove_all(out);

  SECTION("plain variant") {
    const auto res = run_cli("fit --data " + data.string() +
                             " --variant plain --epochs 3 --batch-size 32 --seed 2 --name m --out " + out.string());
    REQUIRE(res.exit_code == 0);
    const CoxModel model = load_model((out / "models" / "m.json").string());
    CHECK(model.beta.size() == 2);
    CHECK(model.has_scaler);
    const auto trace = lines_of(out / "traces" / "m.csv");
    REQUIRE(trace.size() == 4);  // header + 3 epochs
    CHECK(trace[0] == "epoch,utility,surrogate,fndcg,grad_norm");
  }
  SECTION("fair variant records the surrogate column") {
    const auto res = run_cli("fit --data " + data.string() +
                             " --variant fair --gamma 1 --k 10 --epochs 2 --batch-size 32 --seed 2 --name f --out " +
                             out.string());
    REQUIRE(res.exit_code == 0);
    const auto trace = lines_of(out / "traces" / "f.csv");
    REQUIRE(trace.size() == 3);
    CHECK(trace[0].find("surrogate") != std::string::npos);
    // surrogate cell is a number, not nan
    std::stringstream ss(trace[1]);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    CHECK(cell != "nan");
    CHECK(parse_double(cell) > 0.0);
  }
  SECTION("fitting one fold's training split") {
    const auto res = run_cli("fit --data " + data.string() +
                             " --variant plain --epochs 2 --batch-size 32 --folds 5 --fold 1 --seed 2 --name pf" +
                             " --out " + out.string());
    REQUIRE(res.exit_code == 0);
    CHECK(fs::exists(out / "models" / "pf_fold1.json"));
  }
  SECTION("a ROSSI-shaped file yields nine coefficients") {
    const fs::path rossi = work_dir() / "rossi_like.csv";
    if (!fs::exists(rossi)) {
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(9);
      beta[0] = 0.5;
      SurvivalDataset d = generate_synthetic(150, 9, beta, 0.7, 4);
      d.feature_names = {"fin", "age", "race", "wexp", "mar", "paro", "prio", "educ", "emp"};
      save_csv(rossi.string(), d, "week", "arrest");
    }
    const auto res = run_cli("fit --data " + rossi.string() + " --time-col week --event-col arrest" +
                             " --variant plain --epochs 2 --batch-size 32 --seed 2 --name rossi --out " +
                             out.string());
    REQUIRE(res.exit_code == 0);
    CHECK(load_model((out / "models" / "rossi.json").string()).beta.size() == 9);
  }
}

TEST_CASE("fit on a missing file exits 2 and names the path") {
  const auto res = run_cli("fit --data /nonexistent/data.csv --variant plain");
  CHECK(res.exit_code == 2);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli("fit --no-such-flag").exit_code == 2);
  CHECK(run_cli("nonsense").exit_code == 2);
}

TEST_CASE("evaluate emits per-fold rows plus an aggregate") {
  const fs::path data = make_dataset(150, 8);
  const fs::path out = work_dir() / "eval_out";
  fs::remove_all(out);
  const std::string common = "evaluate --data " + data.string() +
                             " --folds 5 --epochs 3 --batch-size 32 --k 5 --seed 2 --name ev --out " + out.string();
  const auto res = run_cli(common + " --variant plain");
  REQUIRE(res.exit_code == 0);

  const fs::path csv = out / "reports" / "ev_folds.csv";
  const auto rows = lines_of(csv);
  REQUIRE(rows.size() == 7);  // header + 5 folds + mean
  CHECK(rows[0] == "fold,fndcg_pct,c_index_pct,brier_pct,tauc_pct,error");
  CHECK(rows[6].rfind("mean,", 0) == 0);

  SECTION("the aggregate row is the mean of the folds") {
    std::vector<std::array<double, 4>> vals;
    for (int r = 1; r <= 5; ++r) {
      std::stringstream ss(rows[r]);
      std::string cell;
      std::array<double, 4> v{};
      std::getline(ss, cell, ',');
      for (int c = 0; c < 4; ++c) {
        std::getline(ss, cell, ',');
        v[c] = parse_double(cell);
      }
      vals.push_back(v);
    }
    std::stringstream ss(rows[6]);
    std::string cell;
    std::getline(ss, cell, ',');
    for (int c = 0; c < 4; ++c) {
      std::getline(ss, cell, ',');
      double mean = 0.0;
      for (const auto& v : vals) mean += v[c];
      mean /= vals.size();
      CHECK(parse_double(cell) == Approx(mean).margin(1e-12));
    }
  }
  SECTION("JSON report carries the config echo") {
    nlohmann::json j;
    std::ifstream(out / "reports" / "ev.json") >> j;
    CHECK(j.at("config").at("variant") == "plain");
    CHECK(j.at("config").at("folds") == 5);
    CHECK(j.at("folds").size() == 5);
  }
  SECTION("paired comparison CSV covers plain and fair") {
    const auto res2 = run_cli(common + " --variant plain --compare");
    REQUIRE(res2.exit_code == 0);
    const auto paired = lines_of(out / "reports" / "ev_paired.csv");
    REQUIRE(paired.size() == 7);
    CHECK(paired[0] ==
          "fold,fndcg_plain,fndcg_fair,cindex_plain,cindex_fair,brier_plain,brier_fair,tauc_plain,tauc_fair");
    CHECK(paired[6].rfind("mean,", 0) == 0);
  }
}

TEST_CASE("evaluate can score a saved model across folds") {
  const fs::path data = make_dataset(150, 8);
  const fs::path out = work_dir() / "eval_model_out";
  fs::remove_all(out);
  REQUIRE(run_cli("fit --data " + data.string() + " --variant plain --epochs 3 --batch-size 32 --seed 2 --name m" +
                  " --out " + out.string())
              .exit_code == 0);
  const auto res = run_cli("evaluate --data " + data.string() + " --model " + (out / "models" / "m.json").string() +
                           " --folds 5 --k 5 --seed 2 --name fixed --out " + out.string());
  REQUIRE(res.exit_code == 0);
  CHECK(lines_of(out / "reports" / "fixed_folds.csv").size() == 7);
}

TEST_CASE("sweep emits a long-format CSV with one row per metric") {
  const fs::path data = make_dataset(100, 9);
  const fs::path out = work_dir() / "sweep_out";
  fs::remove_all(out);
  const std::string cmd = "sweep --data " + data.string() +
                          " --gamma-grid e-1,e1 --k-grid 4,7 --folds 3 --epochs 2 --batch-size 25" +
                          " --variant fair --tau 0.1 --seed 2 --name sw --out " + out.string();
  const auto res = run_cli(cmd);
  REQUIRE(res.exit_code == 0);

  const fs::path csv = out / "sweeps" / "sw.csv";
  const auto rows = lines_of(csv);
  REQUIRE(rows.size() == 1 + 2 * 2 * 3 * 4);  // header + gammas*ks*folds*metrics
  CHECK(rows[0] == "variant,gamma,k,fold,metric,value");
  CHECK(rows[1].rfind("fair,", 0) == 0);

  SECTION("gamma tokens use the natural constant") {
    // first data row carries gamma = e^-1
    std::stringstream ss(rows[1]);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    CHECK(parse_double(cell) == Approx(std::exp(-1.0)).epsilon(1e-12));
  }
  SECTION("reruns are byte-identical") {
    const std::string first = slurp(csv);
    REQUIRE(run_cli(cmd).exit_code == 0);
    CHECK(slurp(csv) == first);
  }
}

TEST_CASE("ablation compares the variants on identical folds") {
  const fs::path data = make_dataset(120, 10);
  const fs::path out = work_dir() / "abl_out";
  fs::remove_all(out);
  const std::string base = "ablation --data " + data.string() +
                           " --folds 3 --epochs 2 --batch-size 25 --gamma 1 --k 5 --tau 0.1 --seed 2" +
                           " --name ab --out " + out.string();
  const auto res = run_cli(base);
  REQUIRE(res.exit_code == 0);
  const auto rows = lines_of(out / "reports" / "ab.csv");
  REQUIRE(rows.size() == 3);  // header + lipschitz + fair
  CHECK(rows[0] ==
        "variant,fndcg_fold0,fndcg_fold1,fndcg_fold2,fndcg_mean,cindex_fold0,cindex_fold1,cindex_fold2,cindex_mean");
  CHECK(rows[1].rfind("lipschitz,", 0) == 0);
  CHECK(rows[2].rfind("fair,", 0) == 0);

  SECTION("plain appears as a third row when flagged") {
    REQUIRE(run_cli(base + " --include-plain").exit_code == 0);
    const auto rows2 = lines_of(out / "reports" / "ab.csv");
    REQUIRE(rows2.size() == 4);
    CHECK(rows2[3].rfind("plain,", 0) == 0);
  }
}

TEST_CASE("config file values are used unless flags override them") {
  const fs::path data = make_dataset(100, 11);
  const fs::path out = work_dir() / "cfg_out";
  fs::remove_all(out);
  const fs::path cfg = work_dir() / "exp.cfg";
  std::ofstream(cfg) << "[data]\npath = " << data.string() << "\n[train]\nvariant = plain\nepochs = 2\n"
                     << "batch_size = 32\nseed = 6\n[output]\ndir = " << out.string() << "\n";
  REQUIRE(run_cli("fit --config " + cfg.string() + " --name viacfg").exit_code == 0);
  CHECK(fs::exists(out / "models" / "viacfg.json"));

  SECTION("flags win over the file") {
    REQUIRE(run_cli("fit --config " + cfg.string() + " --epochs 3 --name flagwin").exit_code == 0);
    CHECK(lines_of(out / "traces" / "flagwin.csv").size() == 4);  // header + 3 epochs
  }
}
