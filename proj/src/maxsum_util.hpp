#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace qcavity {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Values within this distance of the maximum count as tied.
inline constexpr double kTieTolerance = 1e-12;

/// Shifts the table so its maximum is 0. A table with no finite entry is left
/// at -inf and reported by returning false.
inline bool normalize_max(std::span<double> table) {
  double top = kNegInf;
  for (double x : table) top = std::max(top, x);
  if (!std::isfinite(top)) {
    std::fill(table.begin(), table.end(), kNegInf);
    return false;
  }
  for (auto& x : table) x -= top;
  return true;
}

/// First index in `order` whose value is within kTieTolerance of the maximum.
inline int argmax_with_ties(std::span<const double> values, std::span<const int> order) {
  double top = kNegInf;
  for (double x : values) top = std::max(top, x);
  if (!std::isfinite(top)) return order.empty() ? -1 : order.front();
  for (int l : order)
    if (values[l] >= top - kTieTolerance) return l;
  return order.front();
}

}  // namespace qcavity
