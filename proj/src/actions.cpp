#include "rmnet/actions.hpp"

namespace rmnet {

RowVector action_bits(Index index, int m) {
  require_shape(m >= 1 && m < 31, "action dimension m out of range");
  require_shape(index >= 0 && index < num_actions(m), "action index out of range");
  RowVector bits(m);
  for (int i = 0; i < m; ++i) bits(i) = static_cast<double>((index >> i) & 1);
  return bits;
}

Index action_index(const Eigen::Ref<const RowVector>& bits) {
  Index index = 0;
  for (Index i = 0; i < bits.size(); ++i) {
    const double b = bits(i);
    if (b == 1.0) {
      index |= Index{1} << i;
    } else if (b != 0.0) {
      throw ShapeError("action entry is not binary");
    }
  }
  return index;
}

Matrix all_actions(int m) {
  const Index n = num_actions(m);
  Matrix out(n, m);
  for (Index j = 0; j < n; ++j) out.row(j) = action_bits(j, m);
  return out;
}

}  // namespace rmnet
