#pragma once

// SGEMM GPU-kernel performance table and the semi-synthetic benchmark
// built from it by treating some kernel parameters as action bits.

#include "rmnet/datagen.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace rmnet {

inline constexpr int kSgemmParamColumns = 14;
inline constexpr int kSgemmRunColumns = 4;

// 1-indexed parameter columns used as action bits, taken from the head.
inline constexpr std::array<int, 6> kSgemmActionColumns = {8, 11, 12, 13, 14, 3};

struct SgemmTable {
  std::vector<std::string> param_names;
  Matrix params;  // rows x 14
  Vector speed;   // 4 / sum of the four run times
};

SgemmTable load_sgemm(const std::string& path);
SgemmTable parse_sgemm(std::istream& in);

struct SemiSyntheticOptions {
  int m = 3;
  std::uint64_t seed = 0;
  double bias_strength = 10.0;
  double train_fraction = 0.80;
  double val_fraction = 0.05;
  // Groups missing some actions stay in with a reduced feasible set.
  bool keep_incomplete_groups = true;
};

Benchmark build_semi_synthetic(const SgemmTable& table, const SemiSyntheticOptions& opts);

}  // namespace rmnet
