#include "rmnet/models.hpp"

#include "rmnet/actions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rmnet {

namespace {

std::vector<Index> layer_sizes(Index in, Index hidden, Index out, int layers) {
  std::vector<Index> sizes{in};
  for (int l = 0; l + 1 < layers; ++l) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

constexpr double kSigmoidClamp = 30.0;

}  // namespace

RMNetModel make_rmnet(int d, int m, std::uint64_t seed, const Architecture& arch) {
  RMNetModel model;
  model.d = d;
  model.m = m;
  const auto ext = layer_sizes(d + m, arch.hidden, arch.representation, arch.extractor_layers);
  const auto hyp = layer_sizes(arch.representation, arch.hidden, 1, arch.hypothesis_layers);
  model.extractor = make_mlp(ext, arch.activation, derive_seed(seed, 0));
  model.hypothesis = make_mlp(hyp, arch.activation, derive_seed(seed, 1));
  return model;
}

MultiHeadModel make_multihead(int d, int m, std::uint64_t seed, const Architecture& arch) {
  MultiHeadModel model;
  model.d = d;
  model.m = m;
  const auto ext = layer_sizes(d, arch.hidden, arch.representation, arch.extractor_layers);
  const auto hyp = layer_sizes(arch.representation, arch.hidden, 1, arch.hypothesis_layers);
  model.extractor = make_mlp(ext, arch.activation, derive_seed(seed, 0));
  for (Index j = 0; j < num_actions(m); ++j)
    model.heads.push_back(make_mlp(hyp, arch.activation, derive_seed(seed, 1 + j)));
  return model;
}

Matrix join_inputs(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& A) {
  require_shape(X.rows() == A.rows(), "feature and action batches differ in length");
  Matrix z(X.rows(), X.cols() + A.cols());
  z << X, A;
  return z;
}

Matrix tile_all_actions(const Eigen::Ref<const Matrix>& X, int m) {
  const Index n_actions = num_actions(m);
  const Matrix actions = all_actions(m);
  Matrix z(X.rows() * n_actions, X.cols() + m);
  for (Index i = 0; i < X.rows(); ++i) {
    z.block(i * n_actions, 0, n_actions, X.cols()).rowwise() = X.row(i);
    z.block(i * n_actions, X.cols(), n_actions, m) = actions;
  }
  return z;
}

Matrix rmnet_repr(const RMNetModel& model, const Eigen::Ref<const Matrix>& X,
                  const Eigen::Ref<const Matrix>& A) {
  require_shape(X.cols() == model.d && A.cols() == model.m, "rmnet: input dimensions mismatch");
  return forward(model.extractor, join_inputs(X, A));
}

Vector rmnet_score(const RMNetModel& model, const Eigen::Ref<const Matrix>& X,
                   const Eigen::Ref<const Matrix>& A) {
  return forward(model.hypothesis, rmnet_repr(model, X, A)).col(0);
}

Matrix rmnet_score_all(const RMNetModel& model, const Eigen::Ref<const Matrix>& X) {
  require_shape(X.cols() == model.d, "rmnet: feature dimension mismatch");
  const Index n_actions = num_actions(model.m);
  const Vector flat = forward(model.hypothesis, forward(model.extractor, tile_all_actions(X, model.m))).col(0);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), X.rows(), n_actions);
}

Matrix multihead_score_all(const MultiHeadModel& model, const Eigen::Ref<const Matrix>& X) {
  require_shape(X.cols() == model.d, "multi-head: feature dimension mismatch");
  const Matrix repr = forward(model.extractor, X);
  Matrix out(X.rows(), static_cast<Index>(model.heads.size()));
  for (std::size_t j = 0; j < model.heads.size(); ++j)
    out.col(static_cast<Index>(j)) = forward(model.heads[j], repr).col(0);
  return out;
}

Vector multihead_score(const MultiHeadModel& model, const Eigen::Ref<const Matrix>& X,
                       const Eigen::Ref<const Matrix>& A) {
  require_shape(A.cols() == model.m && A.rows() == X.rows(), "multi-head: action batch mismatch");
  const Matrix all = multihead_score_all(model, X);
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) out(i) = all(i, action_index(A.row(i)));
  return out;
}

RidgeModel ridge_fit(const ObservationalDataset& train, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("ridge: lambda must be positive");
  const Index n = train.size();
  require_shape(n > 0, "ridge: empty training set");
  Matrix z(n, train.d() + train.m() + 1);
  z << train.X, train.A, Vector::Ones(n);
  Matrix gram = z.transpose() * z;
  // Intercept is unpenalized.
  gram.diagonal().head(gram.rows() - 1).array() += lambda;
  RidgeModel model;
  model.d = train.d();
  model.m = train.m();
  model.lambda = lambda;
  model.coef = gram.ldlt().solve(z.transpose() * train.y);
  return model;
}

Vector ridge_predict(const RidgeModel& model, const Eigen::Ref<const Matrix>& X,
                     const Eigen::Ref<const Matrix>& A) {
  require_shape(X.cols() == model.d && A.cols() == model.m && X.rows() == A.rows(),
                "ridge: input dimensions mismatch");
  return X * model.coef.head(model.d) + A * model.coef.segment(model.d, model.m) +
         Vector::Constant(X.rows(), model.coef(model.d + model.m));
}

Matrix ridge_score_all(const RidgeModel& model, const Eigen::Ref<const Matrix>& X) {
  require_shape(X.cols() == model.d, "ridge: feature dimension mismatch");
  const Vector base = X * model.coef.head(model.d);
  const Vector action_part = all_actions(model.m) * model.coef.segment(model.d, model.m);
  Matrix out = base.replicate(1, action_part.size());
  out.rowwise() += action_part.transpose();
  out.array() += model.coef(model.d + model.m);
  return out;
}

Matrix score_all(const Model& model, const Eigen::Ref<const Matrix>& X) {
  return std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RidgeModel>) {
          return ridge_score_all(m, X);
        } else if constexpr (std::is_same_v<T, RMNetModel>) {
          return rmnet_score_all(m, X);
        } else {
          return multihead_score_all(m, X);
        }
      },
      model);
}

std::string model_kind(const Model& model) {
  switch (model.index()) {
    case 0: return "ridge";
    case 1: return "single-head";
    default: return "multi-head";
  }
}

SoftXe soft_xe_loss(double f, double y, double g) {
  const double ts = std::clamp(y - g, -kSigmoidClamp, kSigmoidClamp);
  const double tv = std::clamp(f - g, -kSigmoidClamp, kSigmoidClamp);
  const double s = sigmoid(ts);
  const double v = sigmoid(tv);
  // log v = -softplus(-tv), log(1 - v) = -softplus(tv)
  return {s * softplus(-tv) + (1.0 - s) * softplus(tv), v - s};
}

LossTerms supervised_loss(const Eigen::Ref<const Vector>& f, const Eigen::Ref<const Vector>& y,
                          const Eigen::Ref<const Vector>& g, double beta) {
  const Index n = f.size();
  require_shape(n > 0, "loss on an empty batch");
  require_shape(y.size() == n && g.size() == n, "loss: batch length mismatch");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  LossTerms t;
  t.df.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const SoftXe xe = soft_xe_loss(f(i), y(i), g(i));
    const double r = y(i) - f(i);
    t.xe += xe.loss;
    t.mse += r * r;
    t.df(i) = inv_n * (beta * xe.grad - (1.0 - beta) * 2.0 * r);
  }
  t.xe *= inv_n;
  t.mse *= inv_n;
  t.total = beta * t.xe + (1.0 - beta) * t.mse;
  return t;
}

CombinedLoss combined_loss(const RMNetModel& model, const Eigen::Ref<const Matrix>& X,
                           const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Vector>& y,
                           const Eigen::Ref<const Vector>& g_values, double beta) {
  require_shape(X.rows() > 0, "combined_loss: empty batch");
  ForwardCache ext_cache, hyp_cache;
  const Matrix repr = forward(model.extractor, join_inputs(X, A), ext_cache);
  const Vector f = forward(model.hypothesis, repr, hyp_cache).col(0);
  CombinedLoss out;
  out.terms = supervised_loss(f, y, g_values, beta);
  BackwardResult hyp = backward(model.hypothesis, hyp_cache, out.terms.df);
  BackwardResult ext = backward(model.extractor, ext_cache, hyp.input);
  out.hypothesis = std::move(hyp.params);
  out.extractor = std::move(ext.params);
  return out;
}

GModel fit_g(const ObservationalDataset& train, const ObservationalDataset& val,
             const GConfig& config) {
  require_shape(train.size() > 0 && val.size() > 0, "fit_g: empty data");
  const std::vector<Index> sizes{train.d(), config.hidden, config.hidden, 1};
  GModel g{make_mlp(sizes, Activation::ELU, derive_seed(config.seed, 0))};
  AdamState adam = AdamState::for_network(g.net, config.lr);
  Rng shuffle_rng(derive_seed(config.seed, 1));

  auto val_mse = [&](const Network& net) {
    return (forward(net, val.X).col(0) - val.y).squaredNorm() / static_cast<double>(val.size());
  };
  GModel best = g;
  double best_mse = val_mse(g.net);
  int stale = 0;
  std::vector<Index> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.max_epochs && stale < config.patience; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto count = static_cast<Index>(
          std::min<std::size_t>(config.batch_size, order.size() - start));
      Matrix xb(count, train.d());
      Vector yb(count);
      for (Index i = 0; i < count; ++i) {
        xb.row(i) = train.X.row(order[start + i]);
        yb(i) = train.y(order[start + i]);
      }
      ForwardCache cache;
      const Vector pred = forward(g.net, xb, cache).col(0);
      const Matrix grad_out = (2.0 / static_cast<double>(count)) * (pred - yb);
      adam_step(g.net, backward(g.net, cache, grad_out).params, adam);
    }
    const double mse = val_mse(g.net);
    if (mse < best_mse) {
      best_mse = mse;
      best = g;
      stale = 0;
    } else {
      ++stale;
    }
  }
  return best;
}

Vector g_predict(const GModel& g, const Eigen::Ref<const Matrix>& X) {
  return forward(g.net, X).col(0);
}

}  // namespace rmnet
