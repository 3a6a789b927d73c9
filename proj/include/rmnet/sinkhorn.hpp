#pragma once

// Entropy-regularized optimal transport between two point clouds with
// uniform weights, used as the representation-balancing distance.

#include "rmnet/core.hpp"

#include <optional>

namespace rmnet {

// C(i, j) = |a_i - b_j|^2, one point per row.
template <typename DerivedA, typename DerivedB>
Matrix cost_matrix(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  require_shape(a.cols() == b.cols(), "cost_matrix: point dimensions differ");
  Matrix c(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    c.col(j) = (a.rowwise() - b.row(j)).rowwise().squaredNorm();
  return c;
}

struct SinkhornOptions {
  std::optional<double> epsilon;  // absolute; overrides epsilon_scale
  double epsilon_scale = 0.1;     // epsilon = scale * mean(C)
  int max_iters = 200;
  double tolerance = 1e-6;        // L1 marginal residual
};

struct TransportProblem {
  Matrix source;  // n x r
  Matrix target;  // n' x r
  double epsilon = 1.0;
  int max_iters = 200;
  double tolerance = 1e-6;
};

TransportProblem make_transport_problem(Matrix source, Matrix target,
                                        const SinkhornOptions& opts = {});

struct SinkhornResult {
  double distance = 0.0;  // <P, C>, entropy term excluded
  Matrix plan;
  Matrix cost;
  int iterations = 0;
  double marginal_error = 0.0;
  bool converged = false;
  bool log_domain = false;
};

SinkhornResult sinkhorn_distance(const TransportProblem& problem);

struct SinkhornGradient {
  Matrix source;
  Matrix target;
};

// Gradient of <P, C(source, target)> with the plan held fixed.
SinkhornGradient sinkhorn_grad(const TransportProblem& problem, const Matrix& plan);

}  // namespace rmnet
