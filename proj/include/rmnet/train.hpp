#pragma once

// Training loops: the regret-minimization network (supervised loss plus
// Sinkhorn balancing against uniformly re-drawn actions), its ablations, and
// the multi-head baselines.

#include "rmnet/datagen.hpp"
#include "rmnet/models.hpp"
#include "rmnet/sinkhorn.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rmnet {

enum class Method { Ridge, RMNet, RMNetNoER, RMNetNoIPM, RMNetNoMSE, SDNN, MDNN, CFRNet };

std::string to_string(Method m);
Method parse_method(const std::string& s);
// Display label used in report tables.
std::string method_label(Method m);

struct TrainConfig {
  std::vector<double> alpha_grid{0.1, 0.3, 1.0, 3.0, 10.0};
  double beta = 0.5;
  double lr = 1e-4;
  int batch_size = 64;
  int cfrnet_batch_size = 512;
  double l2 = 1e-4;
  int max_epochs = 300;
  int patience = 30;
  std::uint64_t seed = 0;
  double ridge_lambda = 1e-3;
  SinkhornOptions sinkhorn;
  Architecture arch;
  GConfig g;
};

void validate(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // xe/mse weighted by beta, plus alpha*ipm and l2
  double xe = 0.0;
  double mse = 0.0;
  double ipm = 0.0;
  double l2 = 0.0;
  double val_nmcg = 0.0;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_nmcg = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<EpochRecord> history;
  std::vector<std::pair<double, double>> alpha_scores;  // (alpha, best val nmCG)
  std::vector<long> counter_action_counts;              // uniform draws per action
  double seconds = 0.0;
};

void write_epoch_log(std::ostream& out, const TrainReport& report);

// Stop once the best value has not improved for `patience` epochs. The first
// entry sets the reference and does not count as an improvement.
bool convergence_check(const std::vector<double>& history, int patience);

struct RMNetRun {
  RMNetModel model;
  TrainReport report;
};

// g is fit internally when beta > 0 and none is supplied.
RMNetRun train_rmnet(const ObservationalDataset& train, const ObservationalDataset& val,
                     const OracleTable& val_oracle, const TrainConfig& config, double alpha,
                     double beta, const GModel* g = nullptr);

struct MultiHeadRun {
  MultiHeadModel model;
  TrainReport report;
};

// Factual MSE per head, plus alpha times the mean Sinkhorn distance between
// representation groups of every pair of actions with >= 2 batch members.
MultiHeadRun train_multihead(const ObservationalDataset& train, const ObservationalDataset& val,
                             const OracleTable& val_oracle, const TrainConfig& config,
                             double alpha, int batch_size);

struct FitResult {
  Model model;
  TrainReport report;
};

// Trains one configuration of `method`; alpha is ignored by methods without
// a balancing term.
FitResult fit_method(Method method, const Benchmark& data, const TrainConfig& config,
                     double alpha, const GModel* g = nullptr);

// Trains one model per alpha in the grid and keeps the best validation
// nmCG@1; ties go to the smaller alpha. Methods without a balancing term
// train once.
FitResult select_alpha(Method method, const Benchmark& data, const TrainConfig& config);

bool uses_alpha(Method method);
bool uses_g(Method method, const TrainConfig& config);

}  // namespace rmnet
