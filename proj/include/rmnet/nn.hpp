#pragma once

// Small dense feedforward networks with exact reverse-mode gradients.
//
// Batches are row-major in the statistical sense: one sample per row, so a
// layer maps an n x in batch to n x out via  Z = X W^T + 1 b^T,  H = act(Z).

#include "rmnet/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rmnet {

enum class Activation { Identity, ReLU, ELU };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct Network {
  std::vector<Matrix> weights;  // out x in
  std::vector<Vector> biases;   // out
  std::vector<Activation> activations;

  std::size_t depth() const { return weights.size(); }
  Index input_width() const { return weights.front().cols(); }
  Index output_width() const { return weights.back().rows(); }
};

// Same shapes as a Network's parameters.
struct Gradient {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradient zeros_like(const Network& net);

  Gradient& operator+=(const Gradient& other);
  Gradient& add_scaled(const Gradient& other, double scale);
  Gradient& operator*=(double scale);
  double squared_norm() const;
};

struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> preactivations;  // Z of each layer
};

struct BackwardResult {
  Gradient params;
  Matrix input;  // d loss / d batch
};

// Weights ~ N(0, 2 / fan_in), biases zero. sizes has depth + 1 entries and
// activations has depth entries.
Network init_network(std::span<const Index> sizes, std::span<const Activation> activations,
                     std::uint64_t seed);

// Hidden layers use `hidden`; the output layer is the identity.
Network make_mlp(std::span<const Index> sizes, Activation hidden, std::uint64_t seed);

Matrix forward(const Network& net, const Eigen::Ref<const Matrix>& batch);
Matrix forward(const Network& net, const Eigen::Ref<const Matrix>& batch, ForwardCache& cache);

BackwardResult backward(const Network& net, const ForwardCache& cache,
                        const Eigen::Ref<const Matrix>& output_grad);

struct AdamState {
  Gradient first_moment;
  Gradient second_moment;
  long step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_network(const Network& net, double lr);
};

// Bias-corrected Adam update in place. Throws NumericError on a non-finite
// gradient entry, naming the offending tensor; params are untouched then.
void adam_step(Network& net, const Gradient& grad, AdamState& state);

struct Penalty {
  double value = 0.0;
  Gradient grad;
};

// strength * sum of squared weights (biases excluded).
Penalty l2_penalty(const Network& net, double strength);

// Text checkpoint of one network; doubles are written in shortest
// round-trip form so read(write(net)) is bit-identical.
void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in);

bool bitwise_equal(const Network& a, const Network& b);

}  // namespace rmnet
