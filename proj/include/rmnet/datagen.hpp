#pragma once

// Biased observational benchmarks with known potential-outcome oracles.

#include "rmnet/core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace rmnet {

enum class Setup { A, B, C };
enum class Functional { Linear, Quadratic, Bilinear };

// Whether the logging policy prefers actions whose projection is close to
// (Toward) or far from (Away) the feature projection.
enum class BiasDirection { Toward, Away };

struct SyntheticSpec {
  Setup setup = Setup::A;
  Functional functional = Functional::Linear;  // Bilinear ignores setup
  int d = 5;
  int m = 5;
  double bias_strength = 10.0;
  BiasDirection bias_direction = BiasDirection::Toward;
  double noise_std = 0.1;
  int n_train = 1000;
  int n_val = 100;
  int n_test = 200;
  std::uint64_t seed = 0;
};

struct SyntheticParams {
  Vector w_x;        // d, N(0, 1/d)
  Vector w_a;        // m, N(0, 1/m)
  Vector w_a_prime;  // m, N(0, 1/m); outcome projection in Setup-A
  Matrix w_bilinear; // d x m, N(0, 1/(dm))
};

struct ObservationalDataset {
  Matrix X;  // n x d
  Matrix A;  // n x m, entries in {0,1}
  Vector y;  // standardized factual outcomes
  double y_mean = 0.0;
  double y_std = 1.0;

  Index size() const { return X.rows(); }
  int d() const { return static_cast<int>(X.cols()); }
  int m() const { return static_cast<int>(A.cols()); }
};

// values(i, j): standardized potential outcome of row i under action j.
// NaN marks an action that is infeasible (unrecorded) for that row.
struct OracleTable {
  Matrix values;
  int m = 0;

  Index rows() const { return values.rows(); }
  bool feasible(Index row, Index action) const;
  bool complete() const;
};

struct Benchmark {
  ObservationalDataset train;
  ObservationalDataset val;
  ObservationalDataset test;
  OracleTable val_oracle;
  OracleTable test_oracle;
  std::map<std::string, std::string> metadata;
};

// Softmax over actions of strength * |x_sigma - a_sigma(a)|.
Vector propensity(double x_sigma, const Eigen::Ref<const Vector>& a_sigma_all,
                  double strength);

SyntheticParams draw_params(const SyntheticSpec& spec, Rng& rng);

// Noiseless outcome before standardization.
double expected_outcome(const Eigen::Ref<const Vector>& x,
                        const Eigen::Ref<const Vector>& a,
                        const SyntheticParams& params, const SyntheticSpec& spec);

Benchmark gen_synthetic(const SyntheticSpec& spec);

// Benchmark ids: linear-a ... quadratic-c, bilinear.
SyntheticSpec synthetic_spec_for(const std::string& benchmark_id);
std::string benchmark_name(const SyntheticSpec& spec);

std::string to_string(Setup s);
std::string to_string(Functional f);
std::string to_string(BiasDirection b);
BiasDirection parse_bias_direction(const std::string& s);

// Categorical draw from a probability vector given u in [0, 1).
Index sample_index(const Eigen::Ref<const Vector>& probs, double u);

}  // namespace rmnet
