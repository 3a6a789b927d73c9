// Command-line front end: data generation, single fits, evaluation and
// replicated benchmark runs.

#include "rmnet/checkpoint.hpp"
#include "rmnet/dataset_io.hpp"
#include "rmnet/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace rmnet;

namespace {

// Flags shared by every subcommand that builds an ExperimentConfig. Values
// are applied in order: config file, named flags, then --set overrides.
struct CommonFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string*>> named;
  std::vector<std::string> sets;

  std::string benchmark, methods, reps, seed, alpha_grid, beta, k, out, sgemm_path, m, jobs,
      bias_direction;

  void add_to(CLI::App* app, bool experiment_flags) {
    app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override as key=value (repeatable)");
    add(app, "--benchmark", "benchmark", benchmark, "linear-a..quadratic-c, bilinear, sgemm");
    add(app, "--seed", "seed", seed, "base seed");
    add(app, "--m", "m", m, "number of action bits");
    add(app, "--sgemm-path", "sgemm_path", sgemm_path, "SGEMM performance CSV");
    add(app, "--bias-direction", "bias_direction", bias_direction, "toward or away");
    if (!experiment_flags) return;
    add(app, "--methods", "methods", methods, "comma list of methods");
    add(app, "--reps", "reps", reps, "replications");
    add(app, "--alpha-grid", "alpha_grid", alpha_grid, "comma list of alpha values");
    add(app, "--beta", "beta", beta, "cross-entropy weight");
    add(app, "--k", "k", k, "comma list of k");
    add(app, "--jobs", "jobs", jobs, "parallel workers");
  }

  void add(CLI::App* app, const std::string& flag, const std::string& key, std::string& target,
           const std::string& help) {
    app->add_option(flag, target, help);
    named.emplace_back(key, &target);
  }

  ExperimentConfig build() const {
    ExperimentConfig c;
    if (!config_file.empty()) load_config_file(c, config_file);
    for (const auto& [key, value] : named)
      if (!value->empty()) apply_setting(c, key, *value);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    return c;
  }
};

Benchmark load_or_build(const ExperimentConfig& c) {
  if (is_semi_synthetic(c)) {
    if (c.sgemm_path.empty()) throw ConfigError("--sgemm-path is required for sgemm");
    const SgemmTable table = load_sgemm(c.sgemm_path);
    return make_benchmark(c, c.base_seed, &table);
  }
  return make_benchmark(c, c.base_seed);
}

void print_metrics(std::ostream& out, const Matrix& scores, const OracleTable& oracle,
                   const std::vector<Index>& ks) {
  out << "k,nmcg,mcg,regret,mse_u,er_u,bound_rhs,bound_ok\n";
  for (const Index k : ks) {
    const MetricsReport r = evaluate(scores, oracle, k);
    out << k << ',' << (r.nmcg ? format_double(*r.nmcg) : "NA") << ',' << format_double(r.mcg)
        << ',' << format_double(r.regret) << ',' << format_double(r.mse_u) << ','
        << format_double(r.er_u) << ',' << format_double(r.bound_rhs) << ','
        << (r.bound_satisfied ? "true" : "false") << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regret-minimizing decision models over combinatorial action spaces"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen", "Generate a synthetic benchmark directory");
  gen_flags.add_to(gen, false);
  gen->add_option("--out", gen_out, "output directory");

  CommonFlags prep_flags;
  std::string prep_out = "data";
  auto* prep = app.add_subcommand("sgemm-prepare", "Build the semi-synthetic benchmark");
  prep_flags.add_to(prep, false);
  prep->add_option("--out", prep_out, "output directory");

  CommonFlags train_flags;
  std::string train_data, train_out = "model", train_method = "rmnet";
  auto* train = app.add_subcommand("train", "Fit one method on a benchmark directory");
  train_flags.add_to(train, true);
  train->add_option("--data", train_data, "benchmark directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--method", train_method, "method to fit");
  train->add_option("--out", train_out, "output directory");

  std::string eval_data, eval_checkpoint, eval_scores, eval_split = "test", eval_k = "1";
  auto* eval = app.add_subcommand("eval", "Score a checkpoint or a score table");
  eval->add_option("--data", eval_data, "benchmark directory")->required()->check(CLI::ExistingDirectory);
  auto* ck = eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  auto* sc = eval->add_option("--scores", eval_scores, "scores in oracle CSV layout")->check(CLI::ExistingFile);
  ck->excludes(sc);
  eval->add_option("--split", eval_split, "val or test")->check(CLI::IsMember({"val", "test"}));
  eval->add_option("--k", eval_k, "comma list of k");

  CommonFlags bench_flags;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "Replicated benchmark run");
  bench_flags.add_to(bench, true);
  bench->add_option("--out", bench_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ExperimentConfig c = gen_flags.build();
      if (is_semi_synthetic(c)) throw ConfigError("use sgemm-prepare for the sgemm benchmark");
      validate(c.train);
      write_benchmark(load_or_build(c), gen_out);
      std::cout << "wrote " << gen_out << '\n';
      return 0;
    }
    if (prep->parsed()) {
      ExperimentConfig c = prep_flags.build();
      c.benchmark = "sgemm";
      const Benchmark b = load_or_build(c);
      write_benchmark(b, prep_out);
      std::cout << "wrote " << prep_out << " (" << b.train.size() << " training rows, "
                << b.metadata.at("n_groups") << " groups)\n";
      return 0;
    }
    if (train->parsed()) {
      const ExperimentConfig c = train_flags.build();
      TrainConfig tc = c.train;
      tc.seed = c.base_seed;
      const Benchmark data = read_benchmark(train_data);
      const FitResult fit = select_alpha(parse_method(train_method), data, tc);
      fs::create_directories(train_out);
      save_model(fit.model, (fs::path(train_out) / "model.txt").string());
      std::ofstream log(fs::path(train_out) / "epochs.csv");
      write_epoch_log(log, fit.report);
      std::cout << "method=" << train_method << " alpha=" << format_double(fit.report.alpha)
                << " best_epoch=" << fit.report.best_epoch
                << " val_nmcg=" << format_double(fit.report.best_val_nmcg) << '\n';
      print_metrics(std::cout, score_all(fit.model, data.test.X), data.test_oracle, c.ks);
      return 0;
    }
    if (eval->parsed()) {
      if (eval_checkpoint.empty() == eval_scores.empty())
        throw ConfigError("give exactly one of --checkpoint or --scores");
      ExperimentConfig c;
      apply_setting(c, "k", eval_k);
      const Benchmark data = read_benchmark(eval_data);
      const bool test = eval_split == "test";
      const ObservationalDataset& ds = test ? data.test : data.val;
      const OracleTable& oracle = test ? data.test_oracle : data.val_oracle;
      Matrix scores;
      if (!eval_checkpoint.empty()) {
        scores = score_all(load_model(eval_checkpoint), ds.X);
      } else {
        std::ifstream in(eval_scores);
        scores = read_oracle_csv(in, oracle.rows(), oracle.m).values;
      }
      print_metrics(std::cout, scores, oracle, c.ks);
      return 0;
    }
    if (bench->parsed()) {
      ExperimentConfig c = bench_flags.build();
      if (!bench_out.empty()) c.out_dir = bench_out;
      const ExperimentResult r = run_experiment(c, &std::cerr);
      std::ifstream md(fs::path(c.out_dir) / "summary.md");
      std::cout << md.rdbuf();
      if (!r.all_succeeded()) std::cerr << "some runs failed, see failures.csv\n";
      if (!r.all_bounds_ok()) std::cerr << "regret bound violated\n";
      return r.exit_code();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
