#include "rmnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rmnet {

Index rank_of(const Eigen::Ref<const RowVector>& values, Index index) {
  require_shape(index >= 0 && index < values.size(), "rank: index out of range");
  const double v = values(index);
  require_shape(!std::isnan(v), "rank: indexed entry is infeasible");
  Index r = 0;
  for (Index j = 0; j < values.size(); ++j)
    if (values(j) >= v) ++r;
  return r;
}

std::vector<Index> topk_actions(const Eigen::Ref<const RowVector>& values, Index k) {
  std::vector<Index> idx;
  idx.reserve(values.size());
  for (Index j = 0; j < values.size(); ++j)
    if (!std::isnan(values(j))) idx.push_back(j);
  require_shape(k >= 1 && k <= static_cast<Index>(idx.size()),
                "topk: k must be in 1..number of feasible actions");
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Index a, Index b) {
    return values(a) > values(b) || (values(a) == values(b) && a < b);
  });
  idx.resize(k);
  return idx;
}

namespace {

void check_shapes(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle) {
  require_shape(scores.rows() == oracle.values.rows() && scores.cols() == oracle.values.cols(),
                "scores shape does not match the oracle table");
}

// Score row restricted to the row's feasible actions.
RowVector masked_scores(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                        Index i) {
  RowVector s = scores.row(i);
  for (Index j = 0; j < s.size(); ++j) {
    if (!oracle.feasible(i, j)) {
      s(j) = std::numeric_limits<double>::quiet_NaN();
    } else if (!std::isfinite(s(j))) {
      throw NumericError("non-finite score at row " + std::to_string(i) + ", action " +
                         std::to_string(j));
    }
  }
  return s;
}

struct RowGains {
  double predicted = 0.0;
  double best = 0.0;
};

RowGains row_gains(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle, Index i,
                   Index k) {
  const RowVector truth = oracle.values.row(i);
  RowGains g;
  for (const Index a : topk_actions(masked_scores(scores, oracle, i), k)) g.predicted += truth(a);
  for (const Index a : topk_actions(truth, k)) g.best += truth(a);
  return g;
}

std::vector<char> membership(const std::vector<Index>& top, Index n) {
  std::vector<char> in(n, 0);
  for (const Index a : top) in[a] = 1;
  return in;
}

// k-th largest non-NaN value.
double kth_value(const RowVector& values, Index k) {
  return values(topk_actions(values, k).back());
}

}  // namespace

CumulativeGain mcg_regret(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                          Index k) {
  check_shapes(scores, oracle);
  require_shape(oracle.rows() > 0, "mcg: empty evaluation set");
  double predicted = 0.0, best = 0.0;
  for (Index i = 0; i < oracle.rows(); ++i) {
    const RowGains g = row_gains(scores, oracle, i, k);
    predicted += g.predicted;
    best += g.best;
  }
  const double denom = static_cast<double>(k) * static_cast<double>(oracle.rows());
  return {predicted / denom, (best - predicted) / denom};
}

std::optional<double> nmcg(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                           Index k) {
  check_shapes(scores, oracle);
  double predicted = 0.0, best = 0.0;
  for (Index i = 0; i < oracle.rows(); ++i) {
    const RowGains g = row_gains(scores, oracle, i, k);
    predicted += g.predicted;
    best += g.best;
  }
  if (best == 0.0) return std::nullopt;
  return predicted / best;
}

double uniform_mse(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle) {
  check_shapes(scores, oracle);
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < oracle.rows(); ++i)
    for (Index j = 0; j < oracle.values.cols(); ++j)
      if (oracle.feasible(i, j)) {
        const double e = oracle.values(i, j) - scores(i, j);
        sum += e * e;
        ++count;
      }
  require_shape(count > 0, "uniform_mse: no feasible entries");
  return sum / static_cast<double>(count);
}

double er_ku(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle, Index k) {
  check_shapes(scores, oracle);
  const Index n_actions = oracle.values.cols();
  Index errors = 0, count = 0;
  for (Index i = 0; i < oracle.rows(); ++i) {
    const auto truth_top = membership(topk_actions(oracle.values.row(i), k), n_actions);
    const auto pred_top = membership(topk_actions(masked_scores(scores, oracle, i), k), n_actions);
    for (Index j = 0; j < n_actions; ++j) {
      if (!oracle.feasible(i, j)) continue;
      ++count;
      if (truth_top[j] != pred_top[j]) ++errors;
    }
  }
  require_shape(count > 0, "er_ku: no feasible entries");
  return static_cast<double>(errors) / static_cast<double>(count);
}

double er_via_01loss(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                     Index k) {
  check_shapes(scores, oracle);
  Index errors = 0, count = 0;
  for (Index i = 0; i < oracle.rows(); ++i) {
    const RowVector truth = oracle.values.row(i);
    const RowVector pred = masked_scores(scores, oracle, i);
    const double y_kth = kth_value(truth, k);
    const double f_kth = kth_value(pred, k);
    for (Index j = 0; j < truth.size(); ++j) {
      if (std::isnan(truth(j))) continue;
      ++count;
      const double t = truth(j) - y_kth;
      const double shifted = pred(j) - f_kth + y_kth;
      const double t_hat = shifted - y_kth;
      if ((t >= 0.0) != (t_hat >= 0.0)) ++errors;
    }
  }
  require_shape(count > 0, "er_via_01loss: no feasible entries");
  return static_cast<double>(errors) / static_cast<double>(count);
}

BoundCheck bound_check(double regret, double er, double mse, double num_actions, Index k) {
  BoundCheck b;
  b.rhs = num_actions / static_cast<double>(k) * std::sqrt(er * mse);
  b.satisfied = regret <= b.rhs + 1e-9;
  return b;
}

double mean_feasible_actions(const OracleTable& oracle) {
  if (oracle.rows() == 0) return 0.0;
  const Index feasible = (oracle.values.array() == oracle.values.array()).count();
  return static_cast<double>(feasible) / static_cast<double>(oracle.rows());
}

MetricsReport evaluate(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                       Index k) {
  MetricsReport r;
  r.k = k;
  const CumulativeGain cg = mcg_regret(scores, oracle, k);
  r.mcg = cg.mcg;
  r.regret = cg.regret;
  r.nmcg = nmcg(scores, oracle, k);
  r.mse_u = uniform_mse(scores, oracle);
  r.er_u = er_ku(scores, oracle, k);
  const BoundCheck b = bound_check(r.regret, r.er_u, r.mse_u, mean_feasible_actions(oracle), k);
  r.bound_rhs = b.rhs;
  r.bound_satisfied = b.satisfied;
  return r;
}

}  // namespace rmnet
