#pragma once

// Decision metrics for a scorer over all actions of each evaluation row.
//
// Scores and oracle values are n x |A| matrices. A NaN oracle entry marks an
// infeasible action for that row: it is excluded from ranking, selection
// and every average. Metrics that average over (row, action) pairs pool over
// feasible pairs.

#include "rmnet/datagen.hpp"

#include <optional>
#include <vector>

namespace rmnet {

// |{a' : v(a') >= v(index)}| over non-NaN entries.
Index rank_of(const Eigen::Ref<const RowVector>& values, Index index);

// The k largest non-NaN entries; ties go to the smaller action index.
std::vector<Index> topk_actions(const Eigen::Ref<const RowVector>& values, Index k);

struct CumulativeGain {
  double mcg = 0.0;
  double regret = 0.0;
};

CumulativeGain mcg_regret(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                          Index k);

// Realized gain of the predicted top-k over that of the oracle top-k, summed
// over rows before dividing. nullopt when the denominator is zero.
std::optional<double> nmcg(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                           Index k);

double uniform_mse(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle);

// Fraction of feasible (row, action) pairs whose top-k membership differs
// between the oracle and the scorer. Membership follows topk_actions, which
// coincides with rank <= k whenever no tie straddles the k-th position.
double er_ku(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle, Index k);

// Same error through the shifted-score 0-1 classification form.
double er_via_01loss(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                     Index k);

struct BoundCheck {
  double rhs = 0.0;
  bool satisfied = false;
};

// Regret <= (|A| / k) sqrt(ER * MSE). |A| is the mean feasible-action count.
BoundCheck bound_check(double regret, double er, double mse, double num_actions, Index k);

struct MetricsReport {
  Index k = 1;
  std::optional<double> nmcg;
  double mcg = 0.0;
  double regret = 0.0;
  double mse_u = 0.0;
  double er_u = 0.0;
  double bound_rhs = 0.0;
  bool bound_satisfied = false;
};

MetricsReport evaluate(const Eigen::Ref<const Matrix>& scores, const OracleTable& oracle,
                       Index k);

double mean_feasible_actions(const OracleTable& oracle);

}  // namespace rmnet
