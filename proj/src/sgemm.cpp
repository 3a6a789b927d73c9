#include "rmnet/sgemm.hpp"

#include "rmnet/actions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace rmnet {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace

SgemmTable parse_sgemm(std::istream& in) {
  constexpr int kColumns = kSgemmParamColumns + kSgemmRunColumns;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("sgemm: empty input");
  const auto header = split_csv(line);
  if (header.size() != kColumns)
    throw FormatError("sgemm: header has " + std::to_string(header.size()) +
                      " columns, expected " + std::to_string(kColumns));

  SgemmTable t;
  for (int c = 0; c < kSgemmParamColumns; ++c) t.param_names.emplace_back(trim(header[c]));

  std::vector<double> params;
  std::vector<double> speed;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_csv(line);
    if (fields.size() != kColumns)
      throw FormatError("sgemm: data row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " columns, expected " +
                        std::to_string(kColumns));
    double runs = 0.0;
    for (int c = 0; c < kColumns; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v) || !std::isfinite(v))
        throw FormatError("sgemm: data row " + std::to_string(row) + ", column " +
                          std::to_string(c + 1) + ": not a number");
      if (c < kSgemmParamColumns) {
        if (v != std::floor(v))
          throw FormatError("sgemm: data row " + std::to_string(row) + ", column " +
                            std::to_string(c + 1) + ": parameter is not an integer");
        params.push_back(v);
      } else {
        if (!(v > 0.0))
          throw FormatError("sgemm: data row " + std::to_string(row) +
                            ": run time must be positive");
        runs += v;
      }
    }
    speed.push_back(kSgemmRunColumns / runs);
  }
  const auto n = static_cast<Index>(speed.size());
  t.params = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>(params.data(), n,
                                                              kSgemmParamColumns);
  t.speed = Eigen::Map<const Vector>(speed.data(), n);
  return t;
}

SgemmTable load_sgemm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("sgemm: cannot open '" + path + "'");
  return parse_sgemm(in);
}

Benchmark build_semi_synthetic(const SgemmTable& table, const SemiSyntheticOptions& opts) {
  const int m = opts.m;
  if (m < 1 || m > static_cast<int>(kSgemmActionColumns.size()))
    throw ConfigError("semi-synthetic: m must be in 1..6");
  if (table.params.cols() != kSgemmParamColumns)
    throw ConfigError("semi-synthetic: table must have 14 parameter columns");
  const Index n = table.params.rows();
  if (n == 0) throw DataError("semi-synthetic: empty table");

  std::vector<int> action_cols;
  for (int i = 0; i < m; ++i) action_cols.push_back(kSgemmActionColumns[i] - 1);
  std::vector<int> feature_cols;
  for (int c = 0; c < kSgemmParamColumns; ++c)
    if (std::find(action_cols.begin(), action_cols.end(), c) == action_cols.end())
      feature_cols.push_back(c);
  const int d = static_cast<int>(feature_cols.size());

  // Binary action columns, lower value -> 0.
  Matrix A(n, m);
  for (int i = 0; i < m; ++i) {
    const int c = action_cols[i];
    const double lo = table.params.col(c).minCoeff();
    const double hi = table.params.col(c).maxCoeff();
    for (Index r = 0; r < n; ++r) {
      const double v = table.params(r, c);
      if (v != lo && v != hi)
        throw ConfigError("semi-synthetic: action column " + std::to_string(c + 1) +
                          " has more than two distinct values");
    }
    if (lo == hi)
      throw ConfigError("semi-synthetic: action column " + std::to_string(c + 1) +
                        " is constant");
    A.col(i) = (table.params.col(c).array() == hi).cast<double>();
  }

  Matrix features(n, d);
  for (int j = 0; j < d; ++j) {
    const Vector col = table.params.col(feature_cols[j]);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    features.col(j) = (col.array() - mean) / (sd > 0.0 ? sd : 1.0);
  }
  const double y_mean = table.speed.mean();
  const double y_std = std::sqrt((table.speed.array() - y_mean).square().mean());
  if (!(y_std > 0.0)) throw DataError("semi-synthetic: outcomes have zero variance");
  const Vector y = (table.speed.array() - y_mean) / y_std;

  // Group rows sharing the same raw feature combination, in first-seen order.
  const Index n_actions = num_actions(m);
  std::map<std::vector<double>, std::size_t> group_of;
  std::vector<Index> group_first_row;
  std::vector<std::vector<double>> group_outcomes;
  for (Index r = 0; r < n; ++r) {
    std::vector<double> key(d);
    for (int j = 0; j < d; ++j) key[j] = table.params(r, feature_cols[j]);
    auto [it, inserted] = group_of.try_emplace(std::move(key), group_first_row.size());
    if (inserted) {
      group_first_row.push_back(r);
      group_outcomes.emplace_back(n_actions, std::numeric_limits<double>::quiet_NaN());
    }
    auto& outcomes = group_outcomes[it->second];
    const Index a = action_index(A.row(r));
    if (!std::isnan(outcomes[a]))
      throw DataError("semi-synthetic: duplicate record at data row " + std::to_string(r + 1));
    outcomes[a] = y(r);
  }

  std::vector<std::size_t> groups;
  for (std::size_t g = 0; g < group_outcomes.size(); ++g) {
    const bool complete = std::none_of(group_outcomes[g].begin(), group_outcomes[g].end(),
                                       [](double v) { return std::isnan(v); });
    if (complete || opts.keep_incomplete_groups) groups.push_back(g);
  }
  if (groups.empty()) throw DataError("semi-synthetic: no complete feature group");

  Rng rng(opts.seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  const auto n_groups = groups.size();
  const auto n_train = static_cast<std::size_t>(std::floor(opts.train_fraction * n_groups));
  const auto n_val = static_cast<std::size_t>(std::floor(opts.val_fraction * n_groups));
  if (n_train < 2 || n_val < 1 || n_train + n_val >= n_groups)
    throw DataError("semi-synthetic: too few feature groups to split");

  std::normal_distribution<double> std_normal(0.0, 1.0);
  Vector w(d + m);
  for (Index i = 0; i < w.size(); ++i) w(i) = std_normal(rng);
  const Matrix actions = all_actions(m);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto build = [&](std::size_t begin, std::size_t end, OracleTable* oracle) {
    const auto rows = static_cast<Index>(end - begin);
    ObservationalDataset ds;
    ds.X.resize(rows, d);
    ds.A.resize(rows, m);
    ds.y.resize(rows);
    ds.y_mean = y_mean;
    ds.y_std = y_std;
    if (oracle) {
      oracle->m = m;
      oracle->values.resize(rows, n_actions);
    }
    for (Index i = 0; i < rows; ++i) {
      const std::size_t g = groups[begin + i];
      const auto& outcomes = group_outcomes[g];
      const RowVector x = features.row(group_first_row[g]);
      const double x_part = x.dot(w.head(d).transpose());
      // p(a | x, y) ~ exp(-strength * |y_a - [x; a]^T w|) over recorded actions.
      Vector logits = Vector::Constant(n_actions, -std::numeric_limits<double>::infinity());
      for (Index a = 0; a < n_actions; ++a) {
        if (std::isnan(outcomes[a])) continue;
        const double proj = x_part + actions.row(a).dot(w.tail(m).transpose());
        logits(a) = -opts.bias_strength * std::abs(outcomes[a] - proj);
      }
      const Vector p = (logits.array() - logits.maxCoeff()).exp().matrix();
      const Index chosen = sample_index(p / p.sum(), unif(rng));
      ds.X.row(i) = x;
      ds.A.row(i) = actions.row(chosen);
      ds.y(i) = outcomes[chosen];
      if (oracle)
        for (Index a = 0; a < n_actions; ++a) oracle->values(i, a) = outcomes[a];
    }
    return ds;
  };

  Benchmark b;
  b.train = build(0, n_train, nullptr);
  b.val = build(n_train, n_train + n_val, &b.val_oracle);
  b.test = build(n_train + n_val, n_groups, &b.test_oracle);

  std::ostringstream ym, ys;
  ym.precision(17);
  ys.precision(17);
  ym << y_mean;
  ys << y_std;
  b.metadata = {
      {"kind", "semi-synthetic"},
      {"benchmark", "sgemm-m" + std::to_string(m)},
      {"d", std::to_string(d)},
      {"m", std::to_string(m)},
      {"bias_strength", std::to_string(opts.bias_strength)},
      {"seed", std::to_string(opts.seed)},
      {"n_groups", std::to_string(n_groups)},
      {"n_train", std::to_string(n_train)},
      {"n_val", std::to_string(n_val)},
      {"n_test", std::to_string(n_groups - n_train - n_val)},
      {"keep_incomplete_groups", opts.keep_incomplete_groups ? "true" : "false"},
      {"y_mean", ym.str()},
      {"y_std", ys.str()},
  };
  return b;
}

}  // namespace rmnet
