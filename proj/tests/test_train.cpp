#include "rmnet/actions.hpp"
#include "rmnet/eval.hpp"
#include "rmnet/train.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

using namespace rmnet;

namespace {

Benchmark small_data(int m, std::uint64_t seed) {
  SyntheticSpec spec = synthetic_spec_for("linear-a");
  spec.m = m;
  spec.n_train = 256;
  spec.n_val = 64;
  spec.n_test = 64;
  spec.seed = seed;
  return gen_synthetic(spec);
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.arch.hidden = 16;
  c.arch.representation = 4;
  c.lr = 1e-3;
  c.max_epochs = 6;
  c.patience = 5;
  c.seed = seed;
  c.g.hidden = 8;
  c.g.max_epochs = 3;
  c.g.patience = 2;
  c.alpha_grid = {0.1};
  return c;
}

bool same_network(const Network& a, const Network& b) {
  if (a.depth() != b.depth()) return false;
  for (std::size_t l = 0; l < a.depth(); ++l)
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  return true;
}

// Brute-force scan for the last strict improvement over the running best; -1
// when the first entry was never beaten.
bool reference_converged(const std::vector<double>& h, int patience) {
  long last = -1;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] > *std::max_element(h.begin(), h.begin() + static_cast<long>(i))) last = static_cast<long>(i);
  return static_cast<long>(h.size()) - 1 - last >= patience;
}

}  // namespace

TEST(Methods, NamesRoundTrip) {
  for (const Method m : {Method::Ridge, Method::RMNet, Method::RMNetNoER, Method::RMNetNoIPM,
                         Method::RMNetNoMSE, Method::SDNN, Method::MDNN, Method::CFRNet})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(method_label(Method::RMNetNoIPM), "RMNet (w/o D_IPM)");
  EXPECT_THROW(parse_method("svm"), ConfigError);
  EXPECT_TRUE(uses_alpha(Method::CFRNet));
  EXPECT_FALSE(uses_alpha(Method::RMNetNoIPM));
  TrainConfig c;
  EXPECT_TRUE(uses_g(Method::RMNet, c));
  EXPECT_TRUE(uses_g(Method::RMNetNoMSE, c));
  EXPECT_FALSE(uses_g(Method::RMNetNoER, c));
  c.beta = 0.0;
  EXPECT_FALSE(uses_g(Method::RMNet, c));
}

TEST(Validate, RejectsBadConfigs) {
  TrainConfig c;
  EXPECT_NO_THROW(validate(c));
  auto expect_bad = [](TrainConfig bad) { EXPECT_THROW(validate(bad), ConfigError); };
  TrainConfig t = c;
  t.alpha_grid = {};
  expect_bad(t);
  t = c;
  t.alpha_grid = {0.1, -1.0};
  expect_bad(t);
  t = c;
  t.beta = 1.5;
  expect_bad(t);
  t = c;
  t.batch_size = 1;
  expect_bad(t);
  t = c;
  t.patience = t.max_epochs;
  expect_bad(t);
  t = c;
  t.lr = -1.0;
  expect_bad(t);
}

TEST(ConvergenceCheck, Examples) {
  EXPECT_FALSE(convergence_check({0.1, 0.2, 0.3, 0.4, 0.5}, 2));
  EXPECT_FALSE(convergence_check({0.5, 0.6}, 1));
  EXPECT_TRUE(convergence_check({0.5, 0.6, 0.6}, 1));
  EXPECT_FALSE(convergence_check({0.5, 0.5}, 3));
  EXPECT_TRUE(convergence_check({0.5, 0.5, 0.5}, 3));
  EXPECT_THROW(convergence_check({}, 1), ShapeError);
}

TEST(ConvergenceCheck, MatchesBruteForceScan) {
  Rng rng(3);
  std::uniform_int_distribution<int> level(0, 4);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> h(1 + t % 12);
    for (auto& v : h) v = level(rng) * 0.25;
    const int patience = 1 + t % 5;
    EXPECT_EQ(convergence_check(h, patience), reference_converged(h, patience));
  }
}

TEST(TrainRMNet, SdnnEqualsRmnetWithoutBalancingOrRanking) {
  const Benchmark b = small_data(3, 1);
  const TrainConfig c = small_config(7);
  const FitResult sdnn = fit_method(Method::SDNN, b, c, 0.3);
  const RMNetRun plain = train_rmnet(b.train, b.val, b.val_oracle, c, 0.0, 0.0);
  const auto& s = std::get<RMNetModel>(sdnn.model);
  EXPECT_TRUE(same_network(s.extractor, plain.model.extractor));
  EXPECT_TRUE(same_network(s.hypothesis, plain.model.hypothesis));
  EXPECT_EQ(sdnn.report.epochs_run, plain.report.epochs_run);
}

TEST(TrainRMNet, ZeroLearningRateKeepsInitialParameters) {
  const Benchmark b = small_data(2, 2);
  TrainConfig c = small_config(8);
  c.lr = 0.0;
  c.l2 = 0.0;
  const RMNetRun run = train_rmnet(b.train, b.val, b.val_oracle, c, 1.0, 0.5);
  const RMNetModel init = make_rmnet(5, 2, derive_seed(8, 10), c.arch);
  EXPECT_TRUE(same_network(run.model.extractor, init.extractor));
  EXPECT_TRUE(same_network(run.model.hypothesis, init.hypothesis));
}

TEST(TrainRMNet, Deterministic) {
  const Benchmark b = small_data(3, 3);
  const TrainConfig c = small_config(9);
  const RMNetRun a = train_rmnet(b.train, b.val, b.val_oracle, c, 0.3, 0.5);
  const RMNetRun r = train_rmnet(b.train, b.val, b.val_oracle, c, 0.3, 0.5);
  EXPECT_TRUE(same_network(a.model.extractor, r.model.extractor));
  EXPECT_TRUE(same_network(a.model.hypothesis, r.model.hypothesis));
  std::ostringstream la, lr;
  write_epoch_log(la, a.report);
  write_epoch_log(lr, r.report);
  EXPECT_EQ(la.str(), lr.str());
  EXPECT_EQ(la.str().substr(0, la.str().find('\n')), "epoch,loss,xe,mse,ipm,val_nmcg");
}

TEST(TrainRMNet, ReturnsBestValidationCheckpoint) {
  const Benchmark b = small_data(3, 4);
  TrainConfig c = small_config(10);
  c.max_epochs = 10;
  c.patience = 9;
  const RMNetRun run = train_rmnet(b.train, b.val, b.val_oracle, c, 0.1, 0.5);
  double best = -1e300;
  int best_epoch = 0;
  for (const auto& e : run.report.history)
    if (e.val_nmcg > best) {
      best = e.val_nmcg;
      best_epoch = e.epoch;
    }
  EXPECT_EQ(run.report.best_epoch, best_epoch);
  EXPECT_EQ(run.report.best_val_nmcg, best);
  EXPECT_EQ(*nmcg(rmnet_score_all(run.model, b.val.X), b.val_oracle, 1), best);
}

TEST(TrainRMNet, LossDecomposes) {
  const Benchmark b = small_data(3, 5);
  const TrainConfig c = small_config(11);
  const double alpha = 0.7, beta = 0.4;
  const RMNetRun run = train_rmnet(b.train, b.val, b.val_oracle, c, alpha, beta);
  for (const auto& e : run.report.history) {
    EXPECT_GT(e.ipm, 0.0);
    EXPECT_NEAR(e.loss, beta * e.xe + (1 - beta) * e.mse + alpha * e.ipm + e.l2, 1e-10);
  }
}

TEST(TrainRMNet, CounterActionsAreUniform) {
  const Benchmark b = small_data(3, 6);
  TrainConfig c = small_config(12);
  c.max_epochs = 20;
  c.patience = 19;
  c.lr = 0.0;  // flat validation history: stops after `patience` epochs
  const RMNetRun run = train_rmnet(b.train, b.val, b.val_oracle, c, 0.5, 0.0);
  long total = 0;
  for (const long n : run.report.counter_action_counts) total += n;
  EXPECT_EQ(total, 256L * run.report.epochs_run);
  EXPECT_EQ(run.report.epochs_run, 19);
  EXPECT_LT(support::chi_square_uniform(run.report.counter_action_counts),
            support::chi_square_bound(7));
}

TEST(TrainRMNet, NoCounterActionsWithoutBalancing) {
  const Benchmark b = small_data(2, 6);
  const RMNetRun run = train_rmnet(b.train, b.val, b.val_oracle, small_config(1), 0.0, 0.5);
  for (const long n : run.report.counter_action_counts) EXPECT_EQ(n, 0);
  for (const auto& e : run.report.history) EXPECT_EQ(e.ipm, 0.0);
}

TEST(TrainMultihead, HeadCountAndSinglePairDistance) {
  const Benchmark b = small_data(1, 7);
  TrainConfig c = small_config(13);
  c.lr = 0.0;
  c.l2 = 0.0;
  const MultiHeadRun run = train_multihead(b.train, b.val, b.val_oracle, c, 1.0, 256);
  EXPECT_EQ(run.model.heads.size(), 2u);
  // One full batch with m = 1 forms exactly one pair of action groups.
  const MultiHeadModel init = make_multihead(5, 1, derive_seed(13, 10), c.arch);
  const Matrix repr = forward(init.extractor, b.train.X);
  std::vector<Index> g0, g1;
  for (Index i = 0; i < b.train.size(); ++i) (b.train.A(i, 0) > 0.5 ? g1 : g0).push_back(i);
  ASSERT_GE(g0.size(), 2u);
  ASSERT_GE(g1.size(), 2u);
  Matrix s0(g0.size(), repr.cols()), s1(g1.size(), repr.cols());
  for (std::size_t i = 0; i < g0.size(); ++i) s0.row(i) = repr.row(g0[i]);
  for (std::size_t i = 0; i < g1.size(); ++i) s1.row(i) = repr.row(g1[i]);
  const double expected =
      sinkhorn_distance(make_transport_problem(s0, s1, c.sinkhorn)).distance;
  EXPECT_NEAR(run.report.history.front().ipm, expected, 1e-6 * expected);
}

TEST(TrainMultihead, MdnnHeadsMatchActionCount) {
  const Benchmark b = small_data(3, 8);
  const FitResult r = fit_method(Method::MDNN, b, small_config(2), 1.0);
  const auto& model = std::get<MultiHeadModel>(r.model);
  EXPECT_EQ(model.heads.size(), 8u);
  EXPECT_EQ(r.report.alpha, 0.0);
  for (const auto& e : r.report.history) EXPECT_EQ(e.ipm, 0.0);
  EXPECT_EQ(score_all(r.model, b.test.X).cols(), 8);
}

TEST(SelectAlpha, SingletonGrid) {
  const Benchmark b = small_data(2, 9);
  TrainConfig c = small_config(3);
  c.alpha_grid = {0.3};
  const FitResult r = select_alpha(Method::RMNet, b, c);
  EXPECT_EQ(r.report.alpha, 0.3);
  ASSERT_EQ(r.report.alpha_scores.size(), 1u);
}

TEST(SelectAlpha, DuplicateValuesTieToFirst) {
  const Benchmark b = small_data(2, 10);
  TrainConfig c = small_config(4);
  c.alpha_grid = {0.3, 0.3};
  const FitResult r = select_alpha(Method::RMNet, b, c);
  ASSERT_EQ(r.report.alpha_scores.size(), 2u);
  EXPECT_EQ(r.report.alpha_scores[0].second, r.report.alpha_scores[1].second);
  EXPECT_EQ(r.report.alpha, 0.3);
}

TEST(SelectAlpha, KeepsBestScoreSmallestAlphaOnTies) {
  const Benchmark b = small_data(2, 11);
  TrainConfig c = small_config(5);
  c.alpha_grid = {3.0, 0.1, 1.0};
  const FitResult r = select_alpha(Method::RMNetNoER, b, c);
  double best = -1e300, best_alpha = 0.0;
  for (const auto& [a, s] : r.report.alpha_scores)
    if (s > best || (s == best && a < best_alpha)) {
      best = s;
      best_alpha = a;
    }
  EXPECT_EQ(r.report.alpha, best_alpha);
  EXPECT_EQ(r.report.best_val_nmcg, best);
}

TEST(FitMethod, RidgeAndMethodsWithoutAlphaTrainOnce) {
  const Benchmark b = small_data(2, 12);
  const FitResult r = select_alpha(Method::Ridge, b, small_config(6));
  EXPECT_EQ(model_kind(r.model), "ridge");
  EXPECT_TRUE(r.report.alpha_scores.empty());
  EXPECT_TRUE(std::isfinite(r.report.best_val_nmcg));
}

TEST(TrainRMNet, RejectsMismatchedData) {
  const Benchmark b = small_data(2, 13);
  const Benchmark other = small_data(3, 13);
  EXPECT_THROW(train_rmnet(b.train, other.val, other.val_oracle, small_config(1), 0.1, 0.5),
               ShapeError);
  EXPECT_THROW(train_rmnet(b.train, b.val, b.val_oracle, small_config(1), -0.1, 0.5),
               ConfigError);
}
