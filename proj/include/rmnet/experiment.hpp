#pragma once

// Replicated benchmark runs: regenerate data per replication, fit every
// method, evaluate on the test oracle, and aggregate mean and standard error.
//
// Config files are flat `key = value` lines; `#` starts a comment. Keys:
//   benchmark       linear-a ... quadratic-c, bilinear, sgemm
//   methods         comma list of ridge, rmnet, rmnet_no_er, rmnet_no_ipm,
//                   rmnet_no_mse, sdnn, mdnn, cfrnet
//   reps, seed, k (comma list), out, jobs, sgemm_path, m
//   d, n_train, n_val, n_test, noise_std, bias_strength, bias_direction
//   alpha_grid, beta, lr, batch_size, cfrnet_batch_size, l2, max_epochs,
//   patience, ridge_lambda, sinkhorn_epsilon_scale, sinkhorn_max_iters,
//   sinkhorn_tolerance, hidden, representation, g_lr, g_max_epochs, g_patience

#include "rmnet/eval.hpp"
#include "rmnet/sgemm.hpp"
#include "rmnet/train.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rmnet {

struct ExperimentConfig {
  std::string benchmark = "linear-a";
  std::vector<Method> methods{Method::RMNet};
  int replications = 10;
  std::uint64_t base_seed = 0;
  std::vector<Index> ks{1};
  std::string out_dir = "results";
  int jobs = 1;
  std::string sgemm_path;
  std::optional<int> m;  // default 5 for synthetic, 3 for sgemm
  SyntheticSpec synthetic;
  TrainConfig train;
};

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
void load_config_file(ExperimentConfig& config, const std::string& path);
void validate(const ExperimentConfig& config);

bool is_semi_synthetic(const ExperimentConfig& config);

// Every setting that affects results, one sorted `key=value` per line.
// Output location and worker count are excluded.
std::string canonical_config(const ExperimentConfig& config);
// FNV-1a 64 of canonical_config, 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// Data for one replication. `table` is required for sgemm.
Benchmark make_benchmark(const ExperimentConfig& config, std::uint64_t seed,
                         const SgemmTable* table = nullptr);
std::string dataset_name(const ExperimentConfig& config);

struct RunRecord {
  Method method = Method::Ridge;
  int replication = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double alpha = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<MetricsReport> metrics;  // one per k
};

struct SummaryRow {
  Method method = Method::Ridge;
  Index k = 1;
  int runs = 0;       // completed runs
  int undefined = 0;  // completed runs whose nmCG was undefined
  double nmcg_mean = 0.0;
  double nmcg_se = 0.0;
  double regret_mean = 0.0;
  double regret_se = 0.0;
  bool bounds_ok = true;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample std / sqrt(n); NaN when n < 2
};
MeanSe mean_se(const std::vector<double>& values);

std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& runs,
                                  const std::vector<Method>& methods, const std::vector<Index>& ks);

struct ExperimentResult {
  std::string dataset;
  std::string hash;
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;

  bool all_succeeded() const;
  bool all_bounds_ok() const;
  int exit_code() const { return all_succeeded() && all_bounds_ok() ? 0 : 1; }
};

// Runs every (replication, method) pair, writing into config.out_dir:
//   metrics.csv, summary.csv, summary.md, runs.csv, failures.csv,
//   config.txt and runs/<method>_rep<r>/{epochs.csv,model.txt}.
// Progress goes to `log` when given.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

void write_metrics_csv(std::ostream& out, const ExperimentResult& result,
                       std::uint64_t base_seed);
void write_summary_csv(std::ostream& out, const ExperimentResult& result);
void write_summary_markdown(std::ostream& out, const ExperimentResult& result);

}  // namespace rmnet
