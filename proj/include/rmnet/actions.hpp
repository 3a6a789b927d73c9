#pragma once

// Binary action vectors a in {0,1}^m and their integer indices.
// Bit i of the index is action coordinate i (bit 0 least significant).

#include "rmnet/core.hpp"

namespace rmnet {

inline Index num_actions(int m) { return Index{1} << m; }

RowVector action_bits(Index index, int m);

// Inverse of action_bits. Entries must be exactly 0 or 1.
Index action_index(const Eigen::Ref<const RowVector>& bits);

// All 2^m actions, row j = action_bits(j, m).
Matrix all_actions(int m);

}  // namespace rmnet
