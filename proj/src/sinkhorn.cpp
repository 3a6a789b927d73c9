#include "rmnet/sinkhorn.hpp"

#include <cmath>

namespace rmnet {

namespace {

// exp(-C/eps) underflows below ~1e-308 once C/eps passes ~708.
constexpr double kMaxScaledCost = 500.0;

void validate(const TransportProblem& p) {
  require_shape(p.source.rows() > 0 && p.target.rows() > 0, "sinkhorn: empty point set");
  require_shape(p.source.cols() == p.target.cols(), "sinkhorn: point dimensions differ");
  if (!(p.epsilon > 0.0) || !std::isfinite(p.epsilon))
    throw ShapeError("sinkhorn: epsilon must be positive and finite");
  if (p.max_iters < 1) throw ShapeError("sinkhorn: max_iters must be >= 1");
}

void solve_scaling(const Matrix& cost, double eps, const TransportProblem& p,
                   SinkhornResult& r) {
  const Index n = cost.rows();
  const Index k = cost.cols();
  const double a = 1.0 / static_cast<double>(n);
  const double b = 1.0 / static_cast<double>(k);
  const Matrix kernel = (-cost / eps).array().exp().matrix();
  Vector u = Vector::Ones(n);
  Vector v = Vector::Ones(k);
  for (r.iterations = 1; r.iterations <= p.max_iters; ++r.iterations) {
    u = (a / (kernel * v).array()).matrix();
    v = (b / (kernel.transpose() * u).array()).matrix();
    // Columns match exactly after the v update; rows carry the residual.
    r.marginal_error = (u.array() * (kernel * v).array() - a).abs().sum();
    if (!std::isfinite(r.marginal_error)) break;
    if (r.marginal_error < p.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, p.max_iters);
  r.plan = u.asDiagonal() * kernel * v.asDiagonal();
}

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
  const double mx = x.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((x.array() - mx).exp().sum());
}

void solve_log_domain(const Matrix& cost, double eps, const TransportProblem& p,
                      SinkhornResult& r) {
  const Index n = cost.rows();
  const Index k = cost.cols();
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(k));
  const double a = 1.0 / static_cast<double>(n);
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(k);
  r.log_domain = true;
  for (r.iterations = 1; r.iterations <= p.max_iters; ++r.iterations) {
    for (Index i = 0; i < n; ++i)
      f(i) = eps * log_a - eps * log_sum_exp((g - cost.row(i).transpose()) / eps);
    for (Index j = 0; j < k; ++j)
      g(j) = eps * log_b - eps * log_sum_exp((f - cost.col(j)) / eps);
    double residual = 0.0;
    for (Index i = 0; i < n; ++i)
      residual += std::abs(
          std::exp(f(i) / eps + log_sum_exp((g - cost.row(i).transpose()) / eps)) - a);
    r.marginal_error = residual;
    if (!std::isfinite(residual)) break;
    if (residual < p.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, p.max_iters);
  r.plan.resize(n, k);
  for (Index j = 0; j < k; ++j)
    r.plan.col(j) = ((f.array() + g(j) - cost.col(j).array()) / eps).exp().matrix();
}

}  // namespace

TransportProblem make_transport_problem(Matrix source, Matrix target,
                                        const SinkhornOptions& opts) {
  TransportProblem p;
  p.max_iters = opts.max_iters;
  p.tolerance = opts.tolerance;
  if (opts.epsilon) {
    p.epsilon = *opts.epsilon;
  } else {
    const double mean_cost = cost_matrix(source, target).mean();
    // All points coincide: any epsilon gives the same (zero-cost) plan.
    p.epsilon = mean_cost > 0.0 ? opts.epsilon_scale * mean_cost : 1.0;
  }
  p.source = std::move(source);
  p.target = std::move(target);
  return p;
}

SinkhornResult sinkhorn_distance(const TransportProblem& problem) {
  validate(problem);
  SinkhornResult r;
  r.cost = cost_matrix(problem.source, problem.target);
  if (r.cost.maxCoeff() / problem.epsilon > kMaxScaledCost) {
    solve_log_domain(r.cost, problem.epsilon, problem, r);
  } else {
    solve_scaling(r.cost, problem.epsilon, problem, r);
  }
  if (!r.plan.allFinite())
    throw NumericError("sinkhorn: transport plan is not finite; increase epsilon");
  r.distance = (r.plan.array() * r.cost.array()).sum();
  return r;
}

SinkhornGradient sinkhorn_grad(const TransportProblem& problem, const Matrix& plan) {
  require_shape(plan.rows() == problem.source.rows() && plan.cols() == problem.target.rows(),
                "sinkhorn_grad: plan shape does not match the problem");
  require_shape(problem.source.cols() == problem.target.cols(),
                "sinkhorn_grad: point dimensions differ");
  SinkhornGradient g;
  g.source = 2.0 * (plan.rowwise().sum().asDiagonal() * problem.source - plan * problem.target);
  g.target = 2.0 * (plan.colwise().sum().transpose().asDiagonal() * problem.target -
                    plan.transpose() * problem.source);
  return g;
}

}  // namespace rmnet
