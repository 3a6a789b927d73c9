#include "rmnet/train.hpp"

#include "rmnet/actions.hpp"
#include "rmnet/dataset_io.hpp"
#include "rmnet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace rmnet {

std::string to_string(Method m) {
  switch (m) {
    case Method::Ridge: return "ridge";
    case Method::RMNet: return "rmnet";
    case Method::RMNetNoER: return "rmnet_no_er";
    case Method::RMNetNoIPM: return "rmnet_no_ipm";
    case Method::RMNetNoMSE: return "rmnet_no_mse";
    case Method::SDNN: return "sdnn";
    case Method::MDNN: return "mdnn";
    case Method::CFRNet: return "cfrnet";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (const Method m : {Method::Ridge, Method::RMNet, Method::RMNetNoER, Method::RMNetNoIPM,
                         Method::RMNetNoMSE, Method::SDNN, Method::MDNN, Method::CFRNet})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + s + "'");
}

std::string method_label(Method m) {
  switch (m) {
    case Method::Ridge: return "OLS";
    case Method::RMNet: return "RMNet";
    case Method::RMNetNoER: return "RMNet (w/o ER)";
    case Method::RMNetNoIPM: return "RMNet (w/o D_IPM)";
    case Method::RMNetNoMSE: return "RMNet (w/o MSE)";
    case Method::SDNN: return "S-DNN";
    case Method::MDNN: return "M-DNN";
    case Method::CFRNet: return "CFRNet";
  }
  return "?";
}

void validate(const TrainConfig& c) {
  if (c.alpha_grid.empty()) throw ConfigError("alpha grid must not be empty");
  for (const double a : c.alpha_grid)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha values must be finite and >= 0");
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (c.batch_size < 2 || c.cfrnet_batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (!(c.lr >= 0.0) || !(c.l2 >= 0.0)) throw ConfigError("lr and l2 must be >= 0");
  if (c.max_epochs < 1 || c.patience < 1) throw ConfigError("max_epochs and patience must be >= 1");
  if (c.patience >= c.max_epochs)
    throw ConfigError("patience (" + std::to_string(c.patience) + ") must be smaller than max_epochs (" +
                      std::to_string(c.max_epochs) + ")");
}

void write_epoch_log(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss,xe,mse,ipm,val_nmcg\n";
  for (const auto& e : report.history)
    out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.xe) << ','
        << format_double(e.mse) << ',' << format_double(e.ipm) << ','
        << format_double(e.val_nmcg) << '\n';
}

bool convergence_check(const std::vector<double>& history, int patience) {
  require_shape(!history.empty(), "convergence_check: empty history");
  double best = history.front();
  std::ptrdiff_t last_improvement = -1;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] > best) {
      best = history[i];
      last_improvement = static_cast<std::ptrdiff_t>(i);
    }
  }
  const auto n = static_cast<std::ptrdiff_t>(history.size());
  const std::ptrdiff_t stale = last_improvement < 0 ? n : n - 1 - last_improvement;
  return stale >= patience;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double validation_score(const Model& model, const ObservationalDataset& val,
                        const OracleTable& oracle) {
  const auto v = nmcg(score_all(model, val.X), oracle, 1);
  return v ? *v : -std::numeric_limits<double>::infinity();
}

template <typename Derived>
Matrix gather_rows(const Eigen::MatrixBase<Derived>& src, const std::vector<Index>& order,
                   std::size_t start, Index count) {
  Matrix out(count, src.cols());
  for (Index i = 0; i < count; ++i) out.row(i) = src.row(order[start + i]);
  return out;
}

void check_data(const ObservationalDataset& train, const ObservationalDataset& val,
                const OracleTable& val_oracle) {
  require_shape(train.size() >= 2, "training set needs at least two rows");
  require_shape(val.size() == val_oracle.rows(), "validation oracle does not match the set");
  require_shape(val.d() == train.d() && val.m() == train.m() && val_oracle.m == train.m(),
                "train/validation dimensions differ");
}

// Sums per-batch records; finish() turns them into epoch means.
struct EpochAccumulator {
  EpochRecord sum;
  int batches = 0;

  void add(double loss, double xe, double mse, double ipm, double l2) {
    sum.loss += loss;
    sum.xe += xe;
    sum.mse += mse;
    sum.ipm += ipm;
    sum.l2 += l2;
    ++batches;
  }
  EpochRecord finish(int epoch) const {
    EpochRecord r = sum;
    const double inv = 1.0 / batches;
    r.epoch = epoch;
    r.loss *= inv;
    r.xe *= inv;
    r.mse *= inv;
    r.ipm *= inv;
    r.l2 *= inv;
    return r;
  }
};

}  // namespace

RMNetRun train_rmnet(const ObservationalDataset& train, const ObservationalDataset& val,
                     const OracleTable& val_oracle, const TrainConfig& config, double alpha,
                     double beta, const GModel* g) {
  validate(config);
  check_data(train, val, val_oracle);
  if (!(alpha >= 0.0) || !(beta >= 0.0 && beta <= 1.0))
    throw ConfigError("alpha must be >= 0 and beta in [0, 1]");
  const auto t0 = Clock::now();
  const int m = train.m();
  const Index n_actions = num_actions(m);

  RMNetRun run;
  run.report.alpha = alpha;
  run.report.beta = beta;
  run.report.counter_action_counts.assign(n_actions, 0);
  RMNetModel model = make_rmnet(train.d(), m, derive_seed(config.seed, 10), config.arch);

  GModel fitted_g;
  Vector g_train = Vector::Zero(train.size());
  if (beta > 0.0) {
    if (!g) {
      GConfig gc = config.g;
      gc.seed = derive_seed(config.seed, 11);
      fitted_g = fit_g(train, val, gc);
      g = &fitted_g;
    }
    g_train = g_predict(*g, train.X);
  }

  AdamState adam_ext = AdamState::for_network(model.extractor, config.lr);
  AdamState adam_hyp = AdamState::for_network(model.hypothesis, config.lr);
  Rng shuffle_rng(derive_seed(config.seed, 12));
  Rng counter_rng(derive_seed(config.seed, 13));
  std::uniform_int_distribution<Index> uniform_action(0, n_actions - 1);
  const Matrix actions = all_actions(m);

  std::vector<Index> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> val_history;
  double best = -std::numeric_limits<double>::infinity();
  run.model = model;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochAccumulator acc;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const auto nb = static_cast<Index>(
          std::min<std::size_t>(config.batch_size, order.size() - start));
      const Matrix xb = gather_rows(train.X, order, start, nb);
      const Matrix ab = gather_rows(train.A, order, start, nb);
      const Vector yb = gather_rows(train.y, order, start, nb).col(0);
      const Vector gb = gather_rows(g_train, order, start, nb).col(0);

      ForwardCache ext_cache, hyp_cache;
      const Matrix repr = forward(model.extractor, join_inputs(xb, ab), ext_cache);
      const Vector f = forward(model.hypothesis, repr, hyp_cache).col(0);
      const LossTerms terms = supervised_loss(f, yb, gb, beta);
      BackwardResult hyp = backward(model.hypothesis, hyp_cache, terms.df);
      Matrix repr_grad = std::move(hyp.input);

      double ipm = 0.0;
      std::optional<BackwardResult> counter_back;
      if (alpha > 0.0) {
        Matrix counter(nb, m);
        for (Index i = 0; i < nb; ++i) {
          const Index a = uniform_action(counter_rng);
          ++run.report.counter_action_counts[a];
          counter.row(i) = actions.row(a);
        }
        ForwardCache counter_cache;
        const Matrix counter_repr =
            forward(model.extractor, join_inputs(xb, counter), counter_cache);
        const TransportProblem problem =
            make_transport_problem(repr, counter_repr, config.sinkhorn);
        const SinkhornResult ot = sinkhorn_distance(problem);
        const SinkhornGradient og = sinkhorn_grad(problem, ot.plan);
        ipm = ot.distance;
        repr_grad += alpha * og.source;
        counter_back = backward(model.extractor, counter_cache, alpha * og.target);
      }
      BackwardResult ext = backward(model.extractor, ext_cache, repr_grad);
      Gradient ext_grad = std::move(ext.params);
      if (counter_back) ext_grad += counter_back->params;
      const Penalty ext_pen = l2_penalty(model.extractor, config.l2);
      const Penalty hyp_pen = l2_penalty(model.hypothesis, config.l2);
      ext_grad += ext_pen.grad;
      hyp.params += hyp_pen.grad;

      const double l2 = ext_pen.value + hyp_pen.value;
      const double loss = terms.total + alpha * ipm + l2;
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no));
      adam_step(model.extractor, ext_grad, adam_ext);
      adam_step(model.hypothesis, hyp.params, adam_hyp);
      acc.add(loss, terms.xe, terms.mse, ipm, l2);
    }

    EpochRecord rec = acc.finish(epoch);
    const double score = validation_score(Model{model}, val, val_oracle);
    rec.val_nmcg = score;
    run.report.history.push_back(rec);
    if (score > best) {
      best = score;
      run.model = model;
      run.report.best_epoch = epoch;
    }
    val_history.push_back(score);
    run.report.epochs_run = epoch;
    if (convergence_check(val_history, config.patience)) break;
  }
  run.report.best_val_nmcg = best;
  run.report.seconds = seconds_since(t0);
  return run;
}

MultiHeadRun train_multihead(const ObservationalDataset& train, const ObservationalDataset& val,
                             const OracleTable& val_oracle, const TrainConfig& config,
                             double alpha, int batch_size) {
  validate(config);
  check_data(train, val, val_oracle);
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  const auto t0 = Clock::now();
  const int m = train.m();

  MultiHeadRun run;
  run.report.alpha = alpha;
  MultiHeadModel model = make_multihead(train.d(), m, derive_seed(config.seed, 10), config.arch);
  AdamState adam_ext = AdamState::for_network(model.extractor, config.lr);
  std::vector<AdamState> adam_heads;
  for (const auto& h : model.heads) adam_heads.push_back(AdamState::for_network(h, config.lr));

  std::vector<Index> action_of(train.size());
  for (Index i = 0; i < train.size(); ++i) action_of[i] = action_index(train.A.row(i));

  Rng shuffle_rng(derive_seed(config.seed, 12));
  std::vector<Index> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> val_history;
  double best = -std::numeric_limits<double>::infinity();
  run.model = model;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochAccumulator acc;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_no) {
      const auto nb =
          static_cast<Index>(std::min<std::size_t>(batch_size, order.size() - start));
      const Matrix xb = gather_rows(train.X, order, start, nb);
      std::map<Index, std::vector<Index>> groups;  // action -> batch rows
      for (Index i = 0; i < nb; ++i) groups[action_of[order[start + i]]].push_back(i);

      ForwardCache ext_cache;
      const Matrix repr = forward(model.extractor, xb, ext_cache);
      Matrix repr_grad = Matrix::Zero(nb, repr.cols());
      std::vector<Gradient> head_grads;
      for (const auto& h : model.heads) head_grads.push_back(Gradient::zeros_like(h));

      double sq_err = 0.0;
      for (const auto& [a, rows] : groups) {
        const auto count = static_cast<Index>(rows.size());
        Matrix r(count, repr.cols());
        Vector y(count);
        for (Index i = 0; i < count; ++i) {
          r.row(i) = repr.row(rows[i]);
          y(i) = train.y(order[start + rows[i]]);
        }
        ForwardCache head_cache;
        const Vector f = forward(model.heads[a], r, head_cache).col(0);
        const Vector resid = y - f;
        sq_err += resid.squaredNorm();
        const Matrix df = (-2.0 / static_cast<double>(nb)) * resid;
        BackwardResult hb = backward(model.heads[a], head_cache, df);
        head_grads[a] = std::move(hb.params);
        for (Index i = 0; i < count; ++i) repr_grad.row(rows[i]) += hb.input.row(i);
      }
      const double mse = sq_err / static_cast<double>(nb);

      double ipm = 0.0;
      if (alpha > 0.0) {
        std::vector<const std::vector<Index>*> present;
        for (const auto& [a, rows] : groups)
          if (rows.size() >= 2) present.push_back(&rows);
        const std::size_t pairs = present.size() * (present.size() - (present.empty() ? 0 : 1)) / 2;
        for (std::size_t p = 0; p < present.size(); ++p) {
          for (std::size_t q = p + 1; q < present.size(); ++q) {
            const auto& ra = *present[p];
            const auto& rb = *present[q];
            Matrix sa(ra.size(), repr.cols()), sb(rb.size(), repr.cols());
            for (std::size_t i = 0; i < ra.size(); ++i) sa.row(i) = repr.row(ra[i]);
            for (std::size_t i = 0; i < rb.size(); ++i) sb.row(i) = repr.row(rb[i]);
            const TransportProblem problem = make_transport_problem(sa, sb, config.sinkhorn);
            const SinkhornResult ot = sinkhorn_distance(problem);
            const SinkhornGradient og = sinkhorn_grad(problem, ot.plan);
            const double w = 1.0 / static_cast<double>(pairs);
            ipm += w * ot.distance;
            for (std::size_t i = 0; i < ra.size(); ++i)
              repr_grad.row(ra[i]) += alpha * w * og.source.row(i);
            for (std::size_t i = 0; i < rb.size(); ++i)
              repr_grad.row(rb[i]) += alpha * w * og.target.row(i);
          }
        }
      }

      BackwardResult ext = backward(model.extractor, ext_cache, repr_grad);
      Penalty pen = l2_penalty(model.extractor, config.l2);
      double l2 = pen.value;
      ext.params += pen.grad;
      for (std::size_t h = 0; h < model.heads.size(); ++h) {
        Penalty hp = l2_penalty(model.heads[h], config.l2);
        l2 += hp.value;
        head_grads[h] += hp.grad;
      }
      const double loss = mse + alpha * ipm + l2;
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_no));
      adam_step(model.extractor, ext.params, adam_ext);
      for (std::size_t h = 0; h < model.heads.size(); ++h)
        adam_step(model.heads[h], head_grads[h], adam_heads[h]);
      acc.add(loss, 0.0, mse, ipm, l2);
    }

    EpochRecord rec = acc.finish(epoch);
    const double score = validation_score(Model{model}, val, val_oracle);
    rec.val_nmcg = score;
    run.report.history.push_back(rec);
    if (score > best) {
      best = score;
      run.model = model;
      run.report.best_epoch = epoch;
    }
    val_history.push_back(score);
    run.report.epochs_run = epoch;
    if (convergence_check(val_history, config.patience)) break;
  }
  run.report.best_val_nmcg = best;
  run.report.seconds = seconds_since(t0);
  return run;
}

bool uses_alpha(Method method) {
  switch (method) {
    case Method::RMNet:
    case Method::RMNetNoER:
    case Method::RMNetNoMSE:
    case Method::CFRNet: return true;
    default: return false;
  }
}

namespace {

double method_beta(Method method, const TrainConfig& config) {
  switch (method) {
    case Method::RMNet:
    case Method::RMNetNoIPM: return config.beta;
    case Method::RMNetNoMSE: return 1.0;
    default: return 0.0;
  }
}

}  // namespace

bool uses_g(Method method, const TrainConfig& config) {
  switch (method) {
    case Method::RMNet:
    case Method::RMNetNoIPM:
    case Method::RMNetNoMSE: return method_beta(method, config) > 0.0;
    default: return false;
  }
}

FitResult fit_method(Method method, const Benchmark& data, const TrainConfig& config,
                     double alpha, const GModel* g) {
  validate(config);
  const double a = uses_alpha(method) ? alpha : 0.0;
  switch (method) {
    case Method::Ridge: {
      const auto t0 = Clock::now();
      RidgeModel ridge = ridge_fit(data.train, config.ridge_lambda);
      FitResult r{Model{ridge}, {}};
      r.report.best_val_nmcg = validation_score(r.model, data.val, data.val_oracle);
      r.report.seconds = seconds_since(t0);
      return r;
    }
    case Method::MDNN:
    case Method::CFRNet: {
      const int batch = method == Method::CFRNet ? config.cfrnet_batch_size : config.batch_size;
      MultiHeadRun run = train_multihead(data.train, data.val, data.val_oracle, config, a, batch);
      return {Model{std::move(run.model)}, std::move(run.report)};
    }
    default: {
      RMNetRun run = train_rmnet(data.train, data.val, data.val_oracle, config, a,
                                 method_beta(method, config), g);
      return {Model{std::move(run.model)}, std::move(run.report)};
    }
  }
}

FitResult select_alpha(Method method, const Benchmark& data, const TrainConfig& config) {
  validate(config);
  if (!uses_alpha(method)) return fit_method(method, data, config, 0.0);

  // g does not depend on alpha, so it is fit once for the whole grid.
  GModel g;
  const GModel* gp = nullptr;
  if (uses_g(method, config)) {
    GConfig gc = config.g;
    gc.seed = derive_seed(config.seed, 11);
    g = fit_g(data.train, data.val, gc);
    gp = &g;
  }
  std::optional<FitResult> best;
  std::vector<std::pair<double, double>> scores;
  double total_seconds = 0.0;
  for (const double alpha : config.alpha_grid) {
    FitResult r = fit_method(method, data, config, alpha, gp);
    scores.emplace_back(alpha, r.report.best_val_nmcg);
    total_seconds += r.report.seconds;
    const bool better = !best || r.report.best_val_nmcg > best->report.best_val_nmcg ||
                        (r.report.best_val_nmcg == best->report.best_val_nmcg &&
                         alpha < best->report.alpha);
    if (better) best = std::move(r);
  }
  best->report.alpha_scores = std::move(scores);
  best->report.seconds = total_seconds;
  return std::move(*best);
}

}  // namespace rmnet
