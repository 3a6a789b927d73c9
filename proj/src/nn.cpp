#include "rmnet/nn.hpp"

#include <cmath>
#include <cstring>

namespace rmnet {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::ELU: return "elu";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::ReLU;
  if (s == "elu") return Activation::ELU;
  throw FormatError("unknown activation '" + s + "'");
}

Gradient Gradient::zeros_like(const Network& net) {
  Gradient g;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

Gradient& Gradient::operator+=(const Gradient& other) { return add_scaled(other, 1.0); }

Gradient& Gradient::add_scaled(const Gradient& other, double scale) {
  require_shape(other.weights.size() == weights.size(), "gradient depth mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
  return *this;
}

Gradient& Gradient::operator*=(double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= scale;
    biases[l] *= scale;
  }
  return *this;
}

double Gradient::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    s += weights[l].squaredNorm() + biases[l].squaredNorm();
  return s;
}

Network init_network(std::span<const Index> sizes, std::span<const Activation> activations,
                     std::uint64_t seed) {
  if (sizes.size() < 2) throw ShapeError("network needs at least an input and an output size");
  require_shape(activations.size() + 1 == sizes.size(),
                "need one activation per layer");
  for (const Index s : sizes) require_shape(s >= 1, "layer sizes must be >= 1");

  Rng rng(seed);
  Network net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Index in = sizes[l];
    const Index out = sizes[l + 1];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    Matrix w(out, in);
    for (Index r = 0; r < out; ++r)
      for (Index c = 0; c < in; ++c) w(r, c) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(out));
    net.activations.push_back(activations[l]);
  }
  return net;
}

Network make_mlp(std::span<const Index> sizes, Activation hidden, std::uint64_t seed) {
  if (sizes.size() < 2) throw ShapeError("network needs at least an input and an output size");
  std::vector<Activation> acts(sizes.size() - 1, hidden);
  acts.back() = Activation::Identity;
  return init_network(sizes, acts, seed);
}

namespace {

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::ReLU: z = z.cwiseMax(0.0); break;
    case Activation::ELU:
      z = (z.array() > 0.0).select(z.array(), z.array().exp() - 1.0);
      break;
  }
}

// Multiplies grad in place by act'(z).
void apply_derivative(Activation a, const Matrix& z, Matrix& grad) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::ReLU: grad.array() *= (z.array() > 0.0).cast<double>(); break;
    case Activation::ELU:
      grad.array() *= (z.array() > 0.0).select(Matrix::Ones(z.rows(), z.cols()).array(),
                                               z.array().exp());
      break;
  }
}

Matrix affine(const Matrix& w, const Vector& b, const Eigen::Ref<const Matrix>& x) {
  Matrix z = x * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

}  // namespace

Matrix forward(const Network& net, const Eigen::Ref<const Matrix>& batch) {
  require_shape(batch.cols() == net.input_width(), "forward: input width mismatch");
  Matrix h = batch;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    h = affine(net.weights[l], net.biases[l], h);
    apply_activation(net.activations[l], h);
  }
  return h;
}

Matrix forward(const Network& net, const Eigen::Ref<const Matrix>& batch, ForwardCache& cache) {
  require_shape(batch.cols() == net.input_width(), "forward: input width mismatch");
  cache.inputs.resize(net.depth());
  cache.preactivations.resize(net.depth());
  Matrix h = batch;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    cache.inputs[l] = h;
    cache.preactivations[l] = affine(net.weights[l], net.biases[l], h);
    h = cache.preactivations[l];
    apply_activation(net.activations[l], h);
  }
  return h;
}

BackwardResult backward(const Network& net, const ForwardCache& cache,
                        const Eigen::Ref<const Matrix>& output_grad) {
  require_shape(cache.inputs.size() == net.depth(), "backward: cache does not match network");
  const Index n = cache.inputs.front().rows();
  require_shape(output_grad.rows() == n && output_grad.cols() == net.output_width(),
                "backward: output gradient shape mismatch");

  BackwardResult res;
  res.params.weights.resize(net.depth());
  res.params.biases.resize(net.depth());
  Matrix delta = output_grad;
  for (std::size_t l = net.depth(); l-- > 0;) {
    apply_derivative(net.activations[l], cache.preactivations[l], delta);
    res.params.weights[l].noalias() = delta.transpose() * cache.inputs[l];
    res.params.biases[l] = delta.colwise().sum().transpose();
    Matrix next = delta * net.weights[l];
    delta.swap(next);
  }
  res.input = std::move(delta);
  return res;
}

AdamState AdamState::for_network(const Network& net, double lr) {
  AdamState s;
  s.first_moment = Gradient::zeros_like(net);
  s.second_moment = Gradient::zeros_like(net);
  s.lr = lr;
  return s;
}

void adam_step(Network& net, const Gradient& grad, AdamState& state) {
  require_shape(grad.weights.size() == net.depth() &&
                    state.first_moment.weights.size() == net.depth(),
                "adam: depth mismatch");
  for (std::size_t l = 0; l < net.depth(); ++l) {
    require_shape(grad.weights[l].rows() == net.weights[l].rows() &&
                      grad.weights[l].cols() == net.weights[l].cols() &&
                      grad.biases[l].size() == net.biases[l].size(),
                  "adam: gradient shape mismatch at layer " + std::to_string(l));
    if (!grad.weights[l].allFinite())
      throw NumericError("adam: non-finite gradient in layer " + std::to_string(l) + " weight");
    if (!grad.biases[l].allFinite())
      throw NumericError("adam: non-finite gradient in layer " + std::to_string(l) + " bias");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square();
    param.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < net.depth(); ++l) {
    update(net.weights[l], grad.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    update(net.biases[l], grad.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

Penalty l2_penalty(const Network& net, double strength) {
  if (!(strength >= 0.0)) throw ShapeError("l2 strength must be >= 0");
  Penalty p;
  p.grad = Gradient::zeros_like(net);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    p.value += strength * net.weights[l].squaredNorm();
    p.grad.weights[l] = 2.0 * strength * net.weights[l];
  }
  return p;
}

bool bitwise_equal(const Network& a, const Network& b) {
  if (a.depth() != b.depth()) return false;
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
  };
  for (std::size_t l = 0; l < a.depth(); ++l) {
    if (a.activations[l] != b.activations[l]) return false;
    if (!same(a.weights[l], b.weights[l]) || !same(a.biases[l], b.biases[l])) return false;
  }
  return true;
}

}  // namespace rmnet
