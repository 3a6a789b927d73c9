#include "rmnet/dataset_io.hpp"
#include "rmnet/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rmnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("rmnet_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"benchmark", "linear-b"}, {"methods", "ridge,sdnn,rmnet"}, {"reps", "2"},
           {"seed", "40"}, {"k", "1,2"}, {"m", "2"}, {"n_train", "128"}, {"n_val", "32"},
           {"n_test", "32"}, {"max_epochs", "3"}, {"patience", "2"}, {"hidden", "8"},
           {"alpha_grid", "0.1,1"}, {"g_max_epochs", "2"}, {"g_patience", "1"}})
    apply_setting(c, k, v);
  c.out_dir = out.string();
  return c;
}

struct Command {
  int status = 0;
  std::string output;
};

Command run_cli(const std::string& args) {
  const std::string cmd = std::string(RMNET_CLI_PATH) + " " + args + " 2>&1";
  Command r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  char buf[4096];
  while (const std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

}  // namespace

TEST(Config, SettingsAndErrors) {
  ExperimentConfig c;
  apply_setting(c, "methods", "ridge, cfrnet");
  apply_setting(c, "alpha_grid", "0.5,2");
  apply_setting(c, "bias_direction", "away");
  ASSERT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.methods[1], Method::CFRNet);
  EXPECT_EQ(c.train.alpha_grid, (std::vector<double>{0.5, 2.0}));
  EXPECT_THROW(apply_setting(c, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "reps", "two"), ConfigError);
  EXPECT_THROW(apply_setting(c, "methods", "svm"), ConfigError);
}

TEST(Config, FileParsingAndHash) {
  const fs::path dir = scratch("config");
  {
    std::ofstream f(dir / "a.cfg");
    f << "# comment\nbenchmark = quadratic-c\n\nreps = 3  # trailing\nout = x\n";
  }
  {
    std::ofstream f(dir / "bad.cfg");
    f << "reps = 3\nthis line has no equals\n";
  }
  ExperimentConfig a;
  load_config_file(a, (dir / "a.cfg").string());
  EXPECT_EQ(a.benchmark, "quadratic-c");
  EXPECT_EQ(a.replications, 3);
  try {
    ExperimentConfig b;
    load_config_file(b, (dir / "bad.cfg").string());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.cfg:2:"), std::string::npos) << e.what();
  }
  ExperimentConfig b = a;
  b.out_dir = "elsewhere";
  b.jobs = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.train.beta = 0.25;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Aggregate, MeanAndStandardError) {
  const MeanSe one = mean_se({2.0});
  EXPECT_EQ(one.mean, 2.0);
  EXPECT_TRUE(std::isnan(one.se));
  const std::vector<double> v{0.5, 0.9, 0.7, 0.6};
  double mean = 0.0, ss = 0.0;
  for (const double x : v) mean += x / 4.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  const MeanSe r = mean_se(v);
  EXPECT_NEAR(r.mean, mean, 1e-15);
  EXPECT_NEAR(r.se, std::sqrt(ss / 3.0) / 2.0, 1e-15);
}

TEST(Aggregate, CountsUndefinedAndFailedRuns) {
  auto record = [](int rep, bool ok, std::optional<double> nm, double regret, bool bound) {
    RunRecord r;
    r.method = Method::SDNN;
    r.replication = rep;
    r.ok = ok;
    MetricsReport m;
    m.k = 1;
    m.nmcg = nm;
    m.regret = regret;
    m.bound_satisfied = bound;
    if (ok) r.metrics.push_back(m);
    return r;
  };
  const std::vector<RunRecord> runs{record(0, true, 0.8, 0.2, true),
                                    record(1, true, std::nullopt, 0.4, true),
                                    record(2, false, 0.1, 9.0, false),
                                    record(3, true, 0.6, 0.3, false)};
  const auto rows = aggregate(runs, {Method::SDNN}, {1});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 3);
  EXPECT_EQ(rows[0].undefined, 1);
  EXPECT_NEAR(rows[0].nmcg_mean, 0.7, 1e-15);
  EXPECT_NEAR(rows[0].nmcg_se, std::sqrt(0.02) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(rows[0].regret_mean, 0.3, 1e-15);
  EXPECT_FALSE(rows[0].bounds_ok);
}

TEST(RunExperiment, WritesOutputsAndIsDeterministic) {
  const fs::path a = scratch("exp_a"), b = scratch("exp_b");
  const ExperimentResult ra = run_experiment(tiny_config(a));
  ExperimentConfig cb = tiny_config(b);
  cb.jobs = 2;
  const ExperimentResult rb = run_experiment(cb);
  EXPECT_TRUE(ra.all_succeeded());
  EXPECT_EQ(ra.dataset, "linear-b");
  EXPECT_EQ(ra.runs.size(), 6u);
  EXPECT_EQ(ra.summary.size(), 6u);
  for (const char* f : {"metrics.csv", "summary.csv", "summary.md", "runs.csv", "config.txt"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(slurp(a / "runs/rmnet_rep1/model.txt"), slurp(b / "runs/rmnet_rep1/model.txt"));
  const std::string metrics = slurp(a / "metrics.csv");
  EXPECT_EQ(metrics.rfind("# config_hash=" + ra.hash + " base_seed=40\n", 0), 0u);
  // Two seeds, three methods, two k values.
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 2 + 12);
  EXPECT_NE(metrics.find("sdnn,linear-b,41,2,"), std::string::npos);
  EXPECT_TRUE(fs::exists(a / "runs/sdnn_rep0/epochs.csv"));
}

TEST(RunExperiment, SummaryMatchesMetricsFile) {
  const fs::path dir = scratch("exp_summary");
  const ExperimentResult r = run_experiment(tiny_config(dir));
  std::vector<double> values;
  for (const auto& run : r.runs)
    if (run.method == Method::Ridge && run.ok) values.push_back(*run.metrics[0].nmcg);
  const MeanSe expect = mean_se(values);
  for (const auto& row : r.summary)
    if (row.method == Method::Ridge && row.k == 1) {
      EXPECT_EQ(row.nmcg_mean, expect.mean);
      EXPECT_EQ(row.nmcg_se, expect.se);
    }
}

TEST(Cli, GenerateEvaluateAndTrain) {
  const fs::path dir = scratch("cli");
  const std::string data = (dir / "data").string();
  const Command gen = run_cli("gen --benchmark quadratic-a --seed 3 --m 3 --set n_train=60 "
                              "--set n_val=20 --set n_test=30 --out " + data);
  ASSERT_EQ(gen.status, 0) << gen.output;
  for (const char* f : {"train.csv", "val.csv", "test.csv", "val_oracle.csv", "test_oracle.csv",
                        "meta.json"})
    EXPECT_TRUE(fs::exists(fs::path(data) / f)) << f;
  EXPECT_EQ(read_benchmark(data).train.size(), 60);

  // The oracle scored as a prediction is optimal.
  const Command oracle = run_cli("eval --data " + data + " --scores " + data +
                                 "/test_oracle.csv --k 1,2");
  ASSERT_EQ(oracle.status, 0) << oracle.output;
  EXPECT_NE(oracle.output.find("\n1,1,"), std::string::npos) << oracle.output;
  EXPECT_NE(oracle.output.find("\n2,1,"), std::string::npos) << oracle.output;

  const std::string model_dir = (dir / "ridge").string();
  const Command train = run_cli("train --data " + data + " --method ridge --out " + model_dir);
  ASSERT_EQ(train.status, 0) << train.output;
  const Command eval = run_cli("eval --data " + data + " --checkpoint " + model_dir +
                               "/model.txt --split val");
  EXPECT_EQ(eval.status, 0) << eval.output;
  EXPECT_NE(eval.output.find("k,nmcg,mcg,regret"), std::string::npos);
}

TEST(Cli, ReportsErrors) {
  const fs::path dir = scratch("cli_err");
  const Command both = run_cli("eval --data " + dir.string() + " --checkpoint a --scores b");
  EXPECT_NE(both.status, 0);
  const Command bad = run_cli("gen --benchmark linear-z --out " + (dir / "x").string());
  EXPECT_EQ(bad.status, 2) << bad.output;
  EXPECT_NE(bad.output.find("error:"), std::string::npos);
  const Command bad_key = run_cli("gen --set nonsense=1 --out " + (dir / "y").string());
  EXPECT_EQ(bad_key.status, 2) << bad_key.output;
}
