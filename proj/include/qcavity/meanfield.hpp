#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcavity/instance.hpp"

namespace qcavity {

/// Symmetric grid {l * step : l = -half_count..half_count}.
struct FieldGrid {
  double step = 0.02;
  int half_count = 150;

  int size() const { return 2 * half_count + 1; }
  double value(int index) const { return (index - half_count) * step; }
  /// Grid indices ordered by |value|, negative before positive.
  std::vector<int> tie_break_order() const;
  void validate() const;
};

/// Energy of the product state with per-spin fields B (K = 0):
///   -sum J_ij tanh(2B_i) tanh(2B_j) - sum h_i / cosh(2B_i).
double mf_energy(const QuantumInstance& inst, std::span<const double> B);

struct MFResult {
  std::vector<double> B;
  double energy = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// MaxSum over per-spin fields on the quantum graph. Messages start random
/// (seeded), are max-normalized to 0 after each sweep, and the fields are read
/// off by conditioned arg-max from a spanning-tree order (equal to the local
/// arg-max when it is unique, and consistent under ties). On loopy graphs the
/// best configuration seen over all sweeps is returned.
MFResult mf_maxsum_solve(const QuantumInstance& inst, const FieldGrid& grid = {},
                         int max_iters = 1000, std::uint64_t seed = 0);

}  // namespace qcavity
