#include "rmnet/sinkhorn.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rmnet;

namespace {

SinkhornResult solve(const Matrix& a, const Matrix& b, double eps, int iters = 2000,
                     double tol = 1e-10) {
  SinkhornOptions o;
  o.epsilon = eps;
  o.max_iters = iters;
  o.tolerance = tol;
  return sinkhorn_distance(make_transport_problem(a, b, o));
}

}  // namespace

TEST(CostMatrix, Examples) {
  Matrix a(1, 2), b(1, 2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;
  EXPECT_EQ(cost_matrix(a, a)(0, 0), 0.0);
  EXPECT_EQ(cost_matrix(a, b)(0, 0), 25.0);
  EXPECT_THROW(cost_matrix(a, Matrix::Zero(1, 3)), ShapeError);
}

TEST(CostMatrix, MatchesDoubleLoop) {
  const Matrix a = support::random_matrix(3, 2, 1), b = support::random_matrix(4, 2, 2);
  const Matrix c = cost_matrix(a, b);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) {
      double s = 0.0;
      for (Index k = 0; k < 2; ++k) s += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
      EXPECT_NEAR(c(i, j), s, 1e-14);
    }
}

TEST(Sinkhorn, SinglePointPairIsExact) {
  Matrix a(1, 2), b(1, 2);
  a << 1.0, -2.0;
  b << 4.0, 2.0;
  const SinkhornResult r = sinkhorn_distance(make_transport_problem(a, b));
  EXPECT_DOUBLE_EQ(r.distance, 25.0);
  EXPECT_DOUBLE_EQ(r.plan(0, 0), 1.0);
}

TEST(Sinkhorn, IdenticalBatchesApproachZero) {
  const Matrix a = support::random_matrix(6, 3, 4);
  for (const double eps : {0.1, 0.03, 0.01}) {
    const SinkhornResult r = solve(a, a, eps);
    EXPECT_LE(r.distance, 10.0 * eps * std::log(6.0)) << "eps=" << eps;
    EXPECT_GE(r.distance, 0.0);
  }
}

TEST(Sinkhorn, ThreeByThreeNearExactOT) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix a = support::random_matrix(3, 2, 100 + seed);
    const Matrix b = support::random_matrix(3, 2, 200 + seed);
    const Matrix c = cost_matrix(a, b);
    const double exact = support::exact_ot_uniform(c);
    const SinkhornResult r = solve(a, b, 0.01 * c.mean());
    EXPECT_LE(std::abs(r.distance - exact), 0.05 * exact) << "seed " << seed;
  }
}

TEST(Sinkhorn, MarginalsAreUniform) {
  const Matrix a = support::random_matrix(7, 4, 5), b = support::random_matrix(5, 4, 6);
  const SinkhornResult r = sinkhorn_distance(make_transport_problem(a, b));
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.plan.rowwise().sum().array() - 1.0 / 7.0).abs().sum(), 1e-6);
  EXPECT_LT((r.plan.colwise().sum().array() - 1.0 / 5.0).abs().sum(), 1e-6);
}

TEST(Sinkhorn, LogDomainForSmallEpsilon) {
  const Matrix a = support::random_matrix(5, 2, 7, 3.0), b = support::random_matrix(5, 2, 8, 3.0);
  const double eps = 1e-3 * cost_matrix(a, b).mean();
  const SinkhornResult r = solve(a, b, eps, 5000, 1e-9);
  EXPECT_TRUE(r.log_domain);
  EXPECT_TRUE(r.plan.allFinite());
  EXPECT_NEAR(r.distance, support::exact_ot_uniform(cost_matrix(a, b)),
              1e-2 * support::exact_ot_uniform(cost_matrix(a, b)));
}

TEST(Sinkhorn, SymmetricForEqualSizes) {
  const Matrix a = support::random_matrix(6, 3, 9), b = support::random_matrix(6, 3, 10);
  const double eps = 0.1 * cost_matrix(a, b).mean();
  EXPECT_NEAR(solve(a, b, eps).distance, solve(b, a, eps).distance, 1e-8);
}

TEST(Sinkhorn, CostShrinksWithEpsilon) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = support::random_matrix(6, 2, 300 + seed);
    const Matrix b = support::random_matrix(6, 2, 400 + seed);
    const double mean = cost_matrix(a, b).mean();
    double previous = std::numeric_limits<double>::infinity();
    for (const double scale : {1.0, 0.3, 0.1, 0.03, 0.01}) {
      const double d = solve(a, b, scale * mean, 20000, 1e-12).distance;
      EXPECT_LE(d, previous + 1e-9) << "seed " << seed << " scale " << scale;
      previous = d;
    }
    EXPECT_GE(previous, support::exact_ot_uniform(cost_matrix(a, b)) - 1e-9);
  }
}

TEST(Sinkhorn, RejectsBadProblems) {
  TransportProblem p;
  p.source = Matrix::Zero(0, 2);
  p.target = Matrix::Zero(2, 2);
  EXPECT_THROW(sinkhorn_distance(p), ShapeError);
  p.source = Matrix::Zero(2, 2);
  p.epsilon = 0.0;
  EXPECT_THROW(sinkhorn_distance(p), ShapeError);
}

TEST(SinkhornGrad, SinglePair) {
  Matrix a(1, 2), b(1, 2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;
  const TransportProblem p = make_transport_problem(a, b);
  const SinkhornGradient g = sinkhorn_grad(p, Matrix::Ones(1, 1));
  EXPECT_DOUBLE_EQ(g.source(0, 0), -6.0);
  EXPECT_DOUBLE_EQ(g.source(0, 1), -8.0);
  EXPECT_DOUBLE_EQ(g.target(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(g.target(0, 1), 8.0);
  const SinkhornGradient z = sinkhorn_grad(make_transport_problem(a, a), Matrix::Ones(1, 1));
  EXPECT_EQ(z.source.squaredNorm(), 0.0);
}

TEST(SinkhornGrad, MatchesBruteForceSum) {
  const Matrix a = support::random_matrix(4, 3, 11), b = support::random_matrix(5, 3, 12);
  const TransportProblem p = make_transport_problem(a, b);
  const SinkhornResult r = sinkhorn_distance(p);
  const SinkhornGradient g = sinkhorn_grad(p, r.plan);
  for (Index i = 0; i < 4; ++i) {
    RowVector s = RowVector::Zero(3);
    for (Index j = 0; j < 5; ++j) s += r.plan(i, j) * 2.0 * (a.row(i) - b.row(j));
    EXPECT_TRUE(g.source.row(i).isApprox(s, 1e-12));
  }
}

// Entropic objective <P, C> + eps * sum P log P at the solved plan. Its
// derivative is exactly the fixed-plan gradient; the reported distance drops
// the entropy term and differs from it by an O(eps) plan-sensitivity term.
double entropic_objective(const SinkhornResult& r, double eps) {
  double s = 0.0;
  for (Index i = 0; i < r.plan.size(); ++i) {
    const double p = r.plan.data()[i];
    if (p > 0.0) s += p * std::log(p);
  }
  return r.distance + eps * s;
}

TEST(SinkhornGrad, DirectionalDerivativeOfEntropicObjective) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = support::random_matrix(8, 3, 500 + seed);
    const Matrix b = support::random_matrix(8, 3, 600 + seed) + Matrix::Constant(8, 3, 0.5);
    const Matrix va = support::random_matrix(8, 3, 700 + seed);
    const Matrix vb = support::random_matrix(8, 3, 800 + seed);
    const double eps = 0.1 * cost_matrix(a, b).mean();
    const SinkhornResult r = solve(a, b, eps, 20000, 1e-14);
    SinkhornOptions o;
    o.epsilon = eps;
    const SinkhornGradient g = sinkhorn_grad(make_transport_problem(a, b, o), r.plan);
    const double analytic =
        (g.source.array() * va.array()).sum() + (g.target.array() * vb.array()).sum();
    const double h = 1e-6;
    const double fd = (entropic_objective(solve(a + h * va, b + h * vb, eps, 20000, 1e-14), eps) -
                       entropic_objective(solve(a - h * va, b - h * vb, eps, 20000, 1e-14), eps)) /
                      (2 * h);
    EXPECT_LE(std::abs(fd - analytic), 1e-6 * std::max(1.0, std::abs(fd))) << "seed " << seed;
  }
}
