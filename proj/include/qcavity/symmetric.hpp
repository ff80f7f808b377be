#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qcavity/instance.hpp"

namespace qcavity {

/// How the joint maximum over the states of a site's other edges is taken.
enum class InnerMax {
  Exhaustive,   // exact joint maximum
  Coordinate,   // iterated single-edge maximization, 10 rounds
  Convolution,  // sequential convolution table (general solver only)
};

InnerMax parse_inner_max(std::string_view name);
std::string to_string(InnerMax inner);

/// Couplings {l * step : |l| <= half_count}, truncated to |K| <= cap.
struct CouplingGrid {
  double step = 0.01;
  int half_count = 200;
  std::optional<double> cap;

  std::vector<double> values() const;
  /// Positions into values() ordered by |K|, negative first.
  std::vector<int> tie_break_order() const;
  void validate() const;
};

/// -sum J_ij tanh(2K_ij) - sum_i h_i / prod_{j in di} cosh(2K_ij), with K
/// given per quantum edge in instance order.
double ss_energy(const QuantumInstance& inst, std::span<const double> K);

struct SSResult {
  std::vector<double> K;  // per quantum edge
  double energy = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// MaxSum over per-edge couplings at the symmetric cavity fixed point.
///
/// Exhaustive mode computes the joint maximum exactly at any degree: the site
/// term only depends on the other edges through sum ln cosh(2K), so
/// partial combinations are reduced to the upper hull of
/// (prod 1/cosh 2K, sum of messages) as they are accumulated.
SSResult ss_maxsum_solve(const QuantumInstance& inst, const CouplingGrid& grid = {},
                         int max_iters = 1000, std::uint64_t seed = 0,
                         InnerMax inner = InnerMax::Exhaustive);

}  // namespace qcavity
