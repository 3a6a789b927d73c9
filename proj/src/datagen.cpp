#include "rmnet/datagen.hpp"

#include "rmnet/actions.hpp"

#include <cmath>
#include <sstream>

namespace rmnet {

bool OracleTable::feasible(Index row, Index action) const {
  return !std::isnan(values(row, action));
}

bool OracleTable::complete() const { return !values.hasNaN(); }

Vector propensity(double x_sigma, const Eigen::Ref<const Vector>& a_sigma_all,
                  double strength) {
  Vector logits = strength * (a_sigma_all.array() - x_sigma).abs().matrix();
  logits.array() -= logits.maxCoeff();
  Vector p = logits.array().exp().matrix();
  return p / p.sum();
}

Index sample_index(const Eigen::Ref<const Vector>& probs, double u) {
  double acc = 0.0;
  for (Index j = 0; j < probs.size(); ++j) {
    acc += probs(j);
    if (u < acc) return j;
  }
  // u landed in the rounding gap above the final partial sum.
  for (Index j = probs.size() - 1; j >= 0; --j)
    if (probs(j) > 0.0) return j;
  return probs.size() - 1;
}

SyntheticParams draw_params(const SyntheticSpec& spec, Rng& rng) {
  const double d = spec.d;
  const double m = spec.m;
  std::normal_distribution<double> nx(0.0, std::sqrt(1.0 / d));
  std::normal_distribution<double> na(0.0, std::sqrt(1.0 / m));
  std::normal_distribution<double> nw(0.0, std::sqrt(1.0 / (d * m)));

  // Every vector is drawn for every configuration so the RNG stream layout
  // does not depend on setup/functional.
  SyntheticParams p;
  p.w_x.resize(spec.d);
  for (Index i = 0; i < p.w_x.size(); ++i) p.w_x(i) = nx(rng);
  p.w_a.resize(spec.m);
  for (Index i = 0; i < p.w_a.size(); ++i) p.w_a(i) = na(rng);
  p.w_a_prime.resize(spec.m);
  for (Index i = 0; i < p.w_a_prime.size(); ++i) p.w_a_prime(i) = na(rng);
  p.w_bilinear.resize(spec.d, spec.m);
  for (Index c = 0; c < p.w_bilinear.cols(); ++c)
    for (Index r = 0; r < p.w_bilinear.rows(); ++r) p.w_bilinear(r, c) = nw(rng);
  return p;
}

namespace {

struct Projections {
  double x_sigma;
  double x_upsilon;
};

Projections project_features(const Eigen::Ref<const Vector>& x,
                             const SyntheticParams& params,
                             const SyntheticSpec& spec) {
  if (spec.functional != Functional::Bilinear && spec.setup == Setup::B) {
    const Index rest = x.size() - 1;
    return {x(0), params.w_x.tail(rest).dot(x.tail(rest))};
  }
  const double v = params.w_x.dot(x);
  return {v, v};
}

double action_sigma(const Eigen::Ref<const Vector>& a, const SyntheticParams& params) {
  return params.w_a.dot(a);
}

double action_upsilon(const Eigen::Ref<const Vector>& a, const SyntheticParams& params,
                      const SyntheticSpec& spec) {
  if (spec.setup == Setup::A) return params.w_a_prime.dot(a);
  return params.w_a.dot(a);
}

void validate(const SyntheticSpec& spec) {
  if (spec.d < 1 || spec.m < 1 || spec.m > 20)
    throw ConfigError("synthetic spec: need d >= 1 and 1 <= m <= 20");
  if (spec.functional != Functional::Bilinear && spec.setup == Setup::B && spec.d < 2)
    throw ConfigError("synthetic spec: Setup-B needs d >= 2");
  if (spec.n_train < 2)
    throw ConfigError("synthetic spec: n_train must be >= 2 for standardization");
  if (spec.n_val < 1 || spec.n_test < 1)
    throw ConfigError("synthetic spec: n_val and n_test must be >= 1");
  if (!std::isfinite(spec.bias_strength) || !(spec.noise_std >= 0.0))
    throw ConfigError("synthetic spec: bias_strength must be finite, noise_std >= 0");
}

struct RawPartition {
  Matrix X;
  Matrix A;
  Vector y;
  Matrix oracle;  // expected outcomes for every action
};

RawPartition draw_partition(int n, const SyntheticSpec& spec,
                            const SyntheticParams& params, const Matrix& actions,
                            const Vector& a_sigma_all, Rng& rng) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double strength = spec.bias_direction == BiasDirection::Toward
                              ? -spec.bias_strength
                              : spec.bias_strength;
  const Index n_actions = actions.rows();

  RawPartition out;
  out.X.resize(n, spec.d);
  out.A.resize(n, spec.m);
  out.y.resize(n);
  out.oracle.resize(n, n_actions);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < spec.d; ++j) out.X(i, j) = std_normal(rng);
    const Vector x = out.X.row(i).transpose();
    for (Index j = 0; j < n_actions; ++j)
      out.oracle(i, j) = expected_outcome(x, actions.row(j).transpose(), params, spec);
    const Vector p = propensity(project_features(x, params, spec).x_sigma, a_sigma_all,
                                strength);
    const Index chosen = sample_index(p, unif(rng));
    out.A.row(i) = actions.row(chosen);
    out.y(i) = out.oracle(i, chosen) + spec.noise_std * std_normal(rng);
  }
  return out;
}

ObservationalDataset standardized(const RawPartition& raw, double mean, double sd) {
  ObservationalDataset ds;
  ds.X = raw.X;
  ds.A = raw.A;
  ds.y = (raw.y.array() - mean) / sd;
  ds.y_mean = mean;
  ds.y_std = sd;
  return ds;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double expected_outcome(const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& a,
                        const SyntheticParams& params, const SyntheticSpec& spec) {
  if (spec.functional == Functional::Bilinear) return x.dot(params.w_bilinear * a);
  const double x_up = project_features(x, params, spec).x_upsilon;
  const double a_up = action_upsilon(a, params, spec);
  if (spec.functional == Functional::Linear) return a_up - 2.0 * x_up;
  return a_up * a_up - 2.0 * x_up;
}

Benchmark gen_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const SyntheticParams params = draw_params(spec, rng);
  const Matrix actions = all_actions(spec.m);
  Vector a_sigma_all(actions.rows());
  for (Index j = 0; j < actions.rows(); ++j)
    a_sigma_all(j) = action_sigma(actions.row(j).transpose(), params);

  const RawPartition train = draw_partition(spec.n_train, spec, params, actions, a_sigma_all, rng);
  const RawPartition val = draw_partition(spec.n_val, spec, params, actions, a_sigma_all, rng);
  const RawPartition test = draw_partition(spec.n_test, spec, params, actions, a_sigma_all, rng);

  const double mean = train.y.mean();
  const double sd = std::sqrt((train.y.array() - mean).square().mean());
  if (!(sd > 0.0)) throw DataError("training outcomes have zero variance");

  Benchmark b;
  b.train = standardized(train, mean, sd);
  b.val = standardized(val, mean, sd);
  b.test = standardized(test, mean, sd);
  b.val_oracle = {(val.oracle.array() - mean) / sd, spec.m};
  b.test_oracle = {(test.oracle.array() - mean) / sd, spec.m};

  b.metadata = {
      {"kind", "synthetic"},
      {"benchmark", benchmark_name(spec)},
      {"setup", to_string(spec.setup)},
      {"functional", to_string(spec.functional)},
      {"d", std::to_string(spec.d)},
      {"m", std::to_string(spec.m)},
      {"bias_strength", fmt(spec.bias_strength)},
      {"bias_direction", to_string(spec.bias_direction)},
      {"noise_std", fmt(spec.noise_std)},
      {"n_train", std::to_string(spec.n_train)},
      {"n_val", std::to_string(spec.n_val)},
      {"n_test", std::to_string(spec.n_test)},
      {"seed", std::to_string(spec.seed)},
      {"y_mean", fmt(mean)},
      {"y_std", fmt(sd)},
  };
  return b;
}

std::string to_string(Setup s) {
  switch (s) {
    case Setup::A: return "A";
    case Setup::B: return "B";
    case Setup::C: return "C";
  }
  return "?";
}

std::string to_string(Functional f) {
  switch (f) {
    case Functional::Linear: return "linear";
    case Functional::Quadratic: return "quadratic";
    case Functional::Bilinear: return "bilinear";
  }
  return "?";
}

std::string to_string(BiasDirection b) {
  return b == BiasDirection::Toward ? "toward" : "away";
}

BiasDirection parse_bias_direction(const std::string& s) {
  if (s == "toward") return BiasDirection::Toward;
  if (s == "away") return BiasDirection::Away;
  throw ConfigError("unknown bias direction '" + s + "' (expected toward|away)");
}

std::string benchmark_name(const SyntheticSpec& spec) {
  if (spec.functional == Functional::Bilinear) return "bilinear";
  std::string s = to_string(spec.functional) + "-";
  s += static_cast<char>('a' + static_cast<int>(spec.setup));
  return s;
}

SyntheticSpec synthetic_spec_for(const std::string& id) {
  SyntheticSpec spec;
  if (id == "bilinear") {
    spec.functional = Functional::Bilinear;
    return spec;
  }
  const auto dash = id.rfind('-');
  if (dash == std::string::npos || dash + 2 != id.size())
    throw ConfigError("unknown benchmark '" + id + "'");
  const std::string fn = id.substr(0, dash);
  const char setup = id[dash + 1];
  if (fn == "linear") {
    spec.functional = Functional::Linear;
  } else if (fn == "quadratic") {
    spec.functional = Functional::Quadratic;
  } else {
    throw ConfigError("unknown benchmark '" + id + "'");
  }
  switch (setup) {
    case 'a': spec.setup = Setup::A; break;
    case 'b': spec.setup = Setup::B; break;
    case 'c': spec.setup = Setup::C; break;
    default: throw ConfigError("unknown benchmark '" + id + "'");
  }
  return spec;
}

}  // namespace rmnet
