#pragma once

// Outcome models scored over the full action space, and the losses used to
// train them.

#include "rmnet/datagen.hpp"
#include "rmnet/nn.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rmnet {

struct Architecture {
  Index hidden = 64;
  Index representation = 10;
  int extractor_layers = 4;
  int hypothesis_layers = 3;
  Activation activation = Activation::ELU;
};

// Single-head scorer f(x, a) = h(phi([x; a])).
struct RMNetModel {
  Network extractor;
  Network hypothesis;
  int d = 0;
  int m = 0;
};

// Shared phi(x) with one hypothesis head per action index.
struct MultiHeadModel {
  Network extractor;
  std::vector<Network> heads;
  int d = 0;
  int m = 0;
};

// Conditional mean of the outcome under the logging policy, E[y | x].
struct GModel {
  Network net;
};

// Linear model on [x; a; 1].
struct RidgeModel {
  Vector coef;
  int d = 0;
  int m = 0;
  double lambda = 1e-3;
};

using Model = std::variant<RidgeModel, RMNetModel, MultiHeadModel>;

RMNetModel make_rmnet(int d, int m, std::uint64_t seed, const Architecture& arch = {});
MultiHeadModel make_multihead(int d, int m, std::uint64_t seed, const Architecture& arch = {});

// [X, A] side by side.
Matrix join_inputs(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& A);

// Every (row, action) pair, row-major: row i*2^m + j holds x_i and action j.
Matrix tile_all_actions(const Eigen::Ref<const Matrix>& X, int m);

Matrix rmnet_repr(const RMNetModel& model, const Eigen::Ref<const Matrix>& X,
                  const Eigen::Ref<const Matrix>& A);
Vector rmnet_score(const RMNetModel& model, const Eigen::Ref<const Matrix>& X,
                   const Eigen::Ref<const Matrix>& A);
Matrix rmnet_score_all(const RMNetModel& model, const Eigen::Ref<const Matrix>& X);

Vector multihead_score(const MultiHeadModel& model, const Eigen::Ref<const Matrix>& X,
                       const Eigen::Ref<const Matrix>& A);
Matrix multihead_score_all(const MultiHeadModel& model, const Eigen::Ref<const Matrix>& X);

RidgeModel ridge_fit(const ObservationalDataset& train, double lambda = 1e-3);
Vector ridge_predict(const RidgeModel& model, const Eigen::Ref<const Matrix>& X,
                     const Eigen::Ref<const Matrix>& A);
Matrix ridge_score_all(const RidgeModel& model, const Eigen::Ref<const Matrix>& X);

// n x 2^m scores of any model.
Matrix score_all(const Model& model, const Eigen::Ref<const Matrix>& X);
std::string model_kind(const Model& model);

// Soft-label cross-entropy with s = sigma(y - g), v = sigma(f - g):
// -[s log v + (1 - s) log(1 - v)],  d/df = v - s.
// Sigmoid arguments are clamped to [-30, 30].
struct SoftXe {
  double loss = 0.0;
  double grad = 0.0;
};
SoftXe soft_xe_loss(double f, double y, double g);

// beta * mean(soft_xe) + (1 - beta) * mean((y - f)^2) and its derivative in f.
struct LossTerms {
  double total = 0.0;
  double xe = 0.0;
  double mse = 0.0;
  Vector df;
};
LossTerms supervised_loss(const Eigen::Ref<const Vector>& f, const Eigen::Ref<const Vector>& y,
                          const Eigen::Ref<const Vector>& g, double beta);

struct CombinedLoss {
  LossTerms terms;
  Gradient extractor;
  Gradient hypothesis;
};

// Supervised loss of an RMNet on one batch. g_values are constants: no
// gradient flows into the model that produced them.
CombinedLoss combined_loss(const RMNetModel& model, const Eigen::Ref<const Matrix>& X,
                           const Eigen::Ref<const Matrix>& A, const Eigen::Ref<const Vector>& y,
                           const Eigen::Ref<const Vector>& g_values, double beta);

struct GConfig {
  Index hidden = 64;
  double lr = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
};

// Least-squares fit of y on x with early stopping on validation factual MSE.
GModel fit_g(const ObservationalDataset& train, const ObservationalDataset& val,
             const GConfig& config);
Vector g_predict(const GModel& g, const Eigen::Ref<const Matrix>& X);

}  // namespace rmnet
