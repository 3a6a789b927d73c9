#include "rmnet/experiment.hpp"

#include "rmnet/checkpoint.hpp"
#include "rmnet/dataset_io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace rmnet {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("setting '" + key + "': cannot parse '" + value + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  return parse_number<int>(key, value);
}
double parse_real(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string format_fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

constexpr const char* kSgemmId = "sgemm";

}  // namespace

bool is_semi_synthetic(const ExperimentConfig& config) { return config.benchmark == kSgemmId; }

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  TrainConfig& t = c.train;
  if (key == "benchmark") {
    if (value != kSgemmId) {
      const SyntheticSpec base = synthetic_spec_for(value);
      c.synthetic.setup = base.setup;
      c.synthetic.functional = base.functional;
    }
    c.benchmark = value;
  } else if (key == "methods") {
    c.methods.clear();
    for (const auto& m : split_list(value)) c.methods.push_back(parse_method(m));
  } else if (key == "reps") {
    c.replications = parse_int(key, value);
  } else if (key == "seed") {
    c.base_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "k") {
    c.ks.clear();
    for (const auto& k : split_list(value)) c.ks.push_back(parse_int(key, k));
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "jobs") {
    c.jobs = parse_int(key, value);
  } else if (key == "sgemm_path") {
    c.sgemm_path = value;
  } else if (key == "m") {
    c.m = parse_int(key, value);
  } else if (key == "d") {
    c.synthetic.d = parse_int(key, value);
  } else if (key == "n_train") {
    c.synthetic.n_train = parse_int(key, value);
  } else if (key == "n_val") {
    c.synthetic.n_val = parse_int(key, value);
  } else if (key == "n_test") {
    c.synthetic.n_test = parse_int(key, value);
  } else if (key == "noise_std") {
    c.synthetic.noise_std = parse_real(key, value);
  } else if (key == "bias_strength") {
    c.synthetic.bias_strength = parse_real(key, value);
  } else if (key == "bias_direction") {
    c.synthetic.bias_direction = parse_bias_direction(value);
  } else if (key == "alpha_grid") {
    t.alpha_grid.clear();
    for (const auto& a : split_list(value)) t.alpha_grid.push_back(parse_real(key, a));
  } else if (key == "beta") {
    t.beta = parse_real(key, value);
  } else if (key == "lr") {
    t.lr = parse_real(key, value);
  } else if (key == "batch_size") {
    t.batch_size = parse_int(key, value);
  } else if (key == "cfrnet_batch_size") {
    t.cfrnet_batch_size = parse_int(key, value);
  } else if (key == "l2") {
    t.l2 = parse_real(key, value);
  } else if (key == "max_epochs") {
    t.max_epochs = parse_int(key, value);
  } else if (key == "patience") {
    t.patience = parse_int(key, value);
  } else if (key == "ridge_lambda") {
    t.ridge_lambda = parse_real(key, value);
  } else if (key == "sinkhorn_epsilon_scale") {
    t.sinkhorn.epsilon_scale = parse_real(key, value);
  } else if (key == "sinkhorn_max_iters") {
    t.sinkhorn.max_iters = parse_int(key, value);
  } else if (key == "sinkhorn_tolerance") {
    t.sinkhorn.tolerance = parse_real(key, value);
  } else if (key == "hidden") {
    t.arch.hidden = parse_int(key, value);
  } else if (key == "representation") {
    t.arch.representation = parse_int(key, value);
  } else if (key == "g_lr") {
    t.g.lr = parse_real(key, value);
  } else if (key == "g_max_epochs") {
    t.g.max_epochs = parse_int(key, value);
  } else if (key == "g_patience") {
    t.g.patience = parse_int(key, value);
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

void load_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void validate(const ExperimentConfig& c) {
  if (c.replications < 1) throw ConfigError("reps must be >= 1");
  if (c.methods.empty()) throw ConfigError("methods must not be empty");
  if (c.ks.empty()) throw ConfigError("k list must not be empty");
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  for (const Index k : c.ks)
    if (k < 1) throw ConfigError("k must be >= 1");
  if (is_semi_synthetic(c)) {
    if (c.sgemm_path.empty()) throw ConfigError("sgemm benchmark needs sgemm_path");
    if (!fs::exists(c.sgemm_path)) throw ConfigError("sgemm_path does not exist: " + c.sgemm_path);
    const int m = c.m.value_or(3);
    if (m < 1 || m > static_cast<int>(kSgemmActionColumns.size()))
      throw ConfigError("sgemm m must be in 1..6");
  } else {
    synthetic_spec_for(c.benchmark);
    if (c.m && (*c.m < 1 || *c.m > 16)) throw ConfigError("m must be in 1..16");
  }
  for (const Index k : c.ks)
    if (k > (Index{1} << c.m.value_or(is_semi_synthetic(c) ? 3 : c.synthetic.m)))
      throw ConfigError("k exceeds the number of actions");
  validate(c.train);
}

std::string canonical_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  const TrainConfig& t = c.train;
  kv["benchmark"] = c.benchmark;
  std::string methods;
  for (std::size_t i = 0; i < c.methods.size(); ++i)
    methods += (i ? "," : "") + to_string(c.methods[i]);
  kv["methods"] = methods;
  kv["reps"] = std::to_string(c.replications);
  kv["seed"] = std::to_string(c.base_seed);
  std::string ks;
  for (std::size_t i = 0; i < c.ks.size(); ++i) ks += (i ? "," : "") + std::to_string(c.ks[i]);
  kv["k"] = ks;
  if (is_semi_synthetic(c)) {
    kv["m"] = std::to_string(c.m.value_or(3));
    kv["sgemm_path"] = c.sgemm_path;
  } else {
    const SyntheticSpec& s = c.synthetic;
    kv["m"] = std::to_string(c.m.value_or(s.m));
    kv["d"] = std::to_string(s.d);
    kv["n_train"] = std::to_string(s.n_train);
    kv["n_val"] = std::to_string(s.n_val);
    kv["n_test"] = std::to_string(s.n_test);
    kv["noise_std"] = format_double(s.noise_std);
    kv["bias_strength"] = format_double(s.bias_strength);
    kv["bias_direction"] = to_string(s.bias_direction);
  }
  kv["alpha_grid"] = join_doubles(t.alpha_grid);
  kv["beta"] = format_double(t.beta);
  kv["lr"] = format_double(t.lr);
  kv["batch_size"] = std::to_string(t.batch_size);
  kv["cfrnet_batch_size"] = std::to_string(t.cfrnet_batch_size);
  kv["l2"] = format_double(t.l2);
  kv["max_epochs"] = std::to_string(t.max_epochs);
  kv["patience"] = std::to_string(t.patience);
  kv["ridge_lambda"] = format_double(t.ridge_lambda);
  kv["sinkhorn_epsilon_scale"] = format_double(t.sinkhorn.epsilon_scale);
  kv["sinkhorn_max_iters"] = std::to_string(t.sinkhorn.max_iters);
  kv["sinkhorn_tolerance"] = format_double(t.sinkhorn.tolerance);
  kv["hidden"] = std::to_string(t.arch.hidden);
  kv["representation"] = std::to_string(t.arch.representation);
  kv["g_lr"] = format_double(t.g.lr);
  kv["g_max_epochs"] = std::to_string(t.g.max_epochs);
  kv["g_patience"] = std::to_string(t.g.patience);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : canonical_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string dataset_name(const ExperimentConfig& config) {
  if (is_semi_synthetic(config)) return "sgemm-m" + std::to_string(config.m.value_or(3));
  return config.benchmark;
}

Benchmark make_benchmark(const ExperimentConfig& config, std::uint64_t seed,
                         const SgemmTable* table) {
  if (is_semi_synthetic(config)) {
    if (!table) throw ConfigError("sgemm benchmark needs a loaded table");
    SemiSyntheticOptions opts;
    opts.m = config.m.value_or(3);
    opts.seed = seed;
    return build_semi_synthetic(*table, opts);
  }
  SyntheticSpec spec = config.synthetic;
  if (config.m) spec.m = *config.m;
  spec.seed = seed;
  return gen_synthetic(spec);
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe r;
  const auto n = static_cast<double>(values.size());
  if (values.empty()) {
    r.mean = r.se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  for (const double v : values) r.mean += v;
  r.mean /= n;
  if (values.size() < 2) {
    r.se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double ss = 0.0;
  for (const double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return r;
}

std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& runs,
                                  const std::vector<Method>& methods,
                                  const std::vector<Index>& ks) {
  std::vector<SummaryRow> rows;
  for (const Method method : methods) {
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      SummaryRow row;
      row.method = method;
      row.k = ks[ki];
      std::vector<double> nm, regret;
      for (const auto& run : runs) {
        if (run.method != method || !run.ok) continue;
        const MetricsReport& r = run.metrics.at(ki);
        ++row.runs;
        regret.push_back(r.regret);
        row.bounds_ok = row.bounds_ok && r.bound_satisfied;
        if (r.nmcg) {
          nm.push_back(*r.nmcg);
        } else {
          ++row.undefined;
        }
      }
      const MeanSe a = mean_se(nm), b = mean_se(regret);
      row.nmcg_mean = a.mean;
      row.nmcg_se = a.se;
      row.regret_mean = b.mean;
      row.regret_se = b.se;
      rows.push_back(row);
    }
  }
  return rows;
}

bool ExperimentResult::all_succeeded() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.ok; });
}

bool ExperimentResult::all_bounds_ok() const {
  for (const auto& r : runs)
    for (const auto& m : r.metrics)
      if (!m.bound_satisfied) return false;
  return true;
}

void write_metrics_csv(std::ostream& out, const ExperimentResult& result,
                       std::uint64_t base_seed) {
  out << "# config_hash=" << result.hash << " base_seed=" << base_seed << '\n';
  out << "method,dataset,seed,k,nmcg,regret,mse_u,er_u,bound_rhs,bound_ok\n";
  for (const auto& run : result.runs) {
    if (!run.ok) continue;
    for (const auto& m : run.metrics) {
      out << to_string(run.method) << ',' << result.dataset << ',' << run.seed << ',' << m.k << ','
          << (m.nmcg ? format_double(*m.nmcg) : "NA") << ',' << format_double(m.regret) << ','
          << format_double(m.mse_u) << ',' << format_double(m.er_u) << ','
          << format_double(m.bound_rhs) << ',' << (m.bound_satisfied ? "true" : "false") << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "# config_hash=" << result.hash << '\n';
  out << "method,dataset,k,runs,undefined,nmcg_mean,nmcg_se,regret_mean,regret_se,bounds_ok\n";
  for (const auto& r : result.summary)
    out << to_string(r.method) << ',' << result.dataset << ',' << r.k << ',' << r.runs << ','
        << r.undefined << ',' << format_double(r.nmcg_mean) << ',' << format_double(r.nmcg_se)
        << ',' << format_double(r.regret_mean) << ',' << format_double(r.regret_se) << ','
        << (r.bounds_ok ? "true" : "false") << '\n';
}

void write_summary_markdown(std::ostream& out, const ExperimentResult& result) {
  out << "| Method | k | nmCG (" << result.dataset << ") | Regret | Runs | Bound |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& r : result.summary) {
    out << "| " << method_label(r.method) << " | " << r.k << " | " << format_fixed(r.nmcg_mean, 3)
        << " ± " << format_fixed(r.nmcg_se, 3) << " | " << format_fixed(r.regret_mean, 3) << " ± "
        << format_fixed(r.regret_se, 3) << " | " << r.runs;
    if (r.undefined) out << " (" << r.undefined << " undefined)";
    out << " | " << (r.bounds_ok ? "ok" : "VIOLATED") << " |\n";
  }
  out << "\nconfig_hash " << result.hash << '\n';
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  validate(config);
  ExperimentResult result;
  result.dataset = dataset_name(config);
  result.hash = config_hash(config);
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir / "runs");
  write_file(out_dir / "config.txt", canonical_config(config));

  std::optional<SgemmTable> table;
  if (is_semi_synthetic(config)) table = load_sgemm(config.sgemm_path);

  const int n_methods = static_cast<int>(config.methods.size());
  const int n_tasks = config.replications * n_methods;
  result.runs.resize(n_tasks);
  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    *log << msg << std::endl;
  };

  // Data is regenerated per task; generation is cheap next to training and
  // keeps each task independent of scheduling.
  auto run_task = [&](int task) {
    RunRecord& rec = result.runs[task];
    rec.replication = task / n_methods;
    rec.method = config.methods[task % n_methods];
    rec.seed = config.base_seed + static_cast<std::uint64_t>(rec.replication);
    const std::string tag = to_string(rec.method) + "_rep" + std::to_string(rec.replication);
    try {
      const Benchmark data = make_benchmark(config, rec.seed, table ? &*table : nullptr);
      TrainConfig tc = config.train;
      tc.seed = rec.seed;
      FitResult fit = select_alpha(rec.method, data, tc);
      const Matrix scores = score_all(fit.model, data.test.X);
      for (const Index k : config.ks) rec.metrics.push_back(evaluate(scores, data.test_oracle, k));
      rec.alpha = fit.report.alpha;
      rec.best_epoch = fit.report.best_epoch;
      rec.epochs_run = fit.report.epochs_run;
      const fs::path run_dir = out_dir / "runs" / tag;
      fs::create_directories(run_dir);
      save_model(fit.model, (run_dir / "model.txt").string());
      std::ofstream epochs(run_dir / "epochs.csv");
      write_epoch_log(epochs, fit.report);
      rec.ok = true;
      const auto& m0 = rec.metrics.front();
      say(tag + ": nmcg@" + std::to_string(m0.k) + "=" +
          (m0.nmcg ? format_fixed(*m0.nmcg, 4) : std::string("undefined")) +
          " alpha=" + format_double(rec.alpha) + " epochs=" + std::to_string(rec.epochs_run) +
          " (" + format_fixed(fit.report.seconds, 1) + "s)" +
          (m0.bound_satisfied ? "" : " BOUND VIOLATED"));
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
      say(tag + ": FAILED: " + rec.error);
    }
  };

  const int workers = std::min(config.jobs, n_tasks);
  if (workers <= 1) {
    for (int t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int t = next++; t < n_tasks; t = next++) run_task(t);
      });
    for (auto& th : pool) th.join();
  }

  result.summary = aggregate(result.runs, config.methods, config.ks);
  if (!result.all_succeeded()) say("warning: some runs failed; aggregates cover completed runs");

  std::ostringstream metrics, summary, markdown, runs, failures;
  write_metrics_csv(metrics, result, config.base_seed);
  write_summary_csv(summary, result);
  write_summary_markdown(markdown, result);
  runs << "# config_hash=" << result.hash << "\nmethod,replication,seed,alpha,best_epoch,epochs_run\n";
  failures << "method,replication,seed,error\n";
  for (const auto& r : result.runs) {
    if (r.ok) {
      runs << to_string(r.method) << ',' << r.replication << ',' << r.seed << ','
           << format_double(r.alpha) << ',' << r.best_epoch << ',' << r.epochs_run << '\n';
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      failures << to_string(r.method) << ',' << r.replication << ',' << r.seed << ',' << msg << '\n';
    }
  }
  write_file(out_dir / "metrics.csv", metrics.str());
  write_file(out_dir / "summary.csv", summary.str());
  write_file(out_dir / "summary.md", markdown.str());
  write_file(out_dir / "runs.csv", runs.str());
  write_file(out_dir / "failures.csv", failures.str());
  return result;
}

}  // namespace rmnet
