#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qcavity/classical_bp.hpp"
#include "qcavity/meanfield.hpp"
#include "qcavity/symmetric.hpp"

namespace qcavity {

/// Symmetric grid {l * step : |l| <= half_count} addressed by signed index l.
struct GridAxis {
  double step = 0.05;
  int half_count = 60;

  double value(int l) const { return l * step; }
  int nearest(double x) const;  // rounded and clipped to the grid
  int size() const { return 2 * half_count + 1; }
};

/// Candidate state of one edge: coupling index and the directed cavity-field
/// pair (fwd = first->second, rev = second->first), all as signed grid indices.
struct EdgeState {
  int k = 0;
  int nu_fwd = 0;
  int nu_rev = 0;

  auto operator<=>(const EdgeState&) const = default;
};

/// Per classical edge, the ordered list of candidate states.
struct SearchSpace {
  std::vector<std::vector<EdgeState>> edges;
};

/// messages[d][s] = M_{source(d) -> target(d)}(state s of edge d/2).
using GSMessages = std::vector<std::vector<double>>;
/// weights[e][s] for state s of edge e.
using GSWeights = std::vector<std::vector<double>>;

struct GSConfig {
  GridAxis b_grid{0.05, 60};
  GridAxis k_grid{0.05, 40};
  GridAxis nu_grid{0.05, 120};
  int states_per_edge = 20;
  double tolerance_initial = 0.2;
  double tolerance_decay = 0.7;
  /// Defaults to twice the nu grid step.
  std::optional<double> tolerance_floor;
  double delta_m = 0.05;
  std::optional<double> k_max;
  double resample_fraction = 0.5;
  double proposal_radius = 5.0;  // in grid bins
  int outer_rounds = 30;
  int max_sweeps = 50;
  double sweep_tolerance = 1e-9;
  int refit_restarts = 8;
  bool seed_mean_field = true;
  bool seed_symmetric = true;
  FieldGrid seed_field_grid{0.02, 150};
  CouplingGrid seed_coupling_grid{0.01, 200, std::nullopt};
  InnerMax inner = InnerMax::Exhaustive;
  int convolution_refine = 4;
  int y_bins = 64;
  std::uint64_t seed = 0;

  void validate() const;
  double tolerance_at(int round) const;
  double floor() const;
  /// Applies the default coupling cap: 1 on graphs with cycles.
  static GSConfig defaults_for(const ClassicalGraph& graph);
};

/// Bond energy of a state.
double state_bond_energy(const GSConfig& cfg, double J, const EdgeState& s);

struct SweepStats {
  double change = 0.0;
  int flagged_edges = 0;  // directed tables with no admissible state
};

/// One synchronous MaxSum-BP sweep:
///   M_{i->j}(s) = -<e_ij>(s) + max_{B_i, s_k : BP at i within tol} { -<e_i> + sum_k M_{k->i}(s_k) }
/// followed by max-normalization of every table.
SweepStats gs_maxsum_sweep(const Problem& problem, const SearchSpace& spaces, GSMessages& messages,
                           const GSConfig& cfg, double tolerance);

GSMessages zero_messages(const Problem& problem, const SearchSpace& spaces);

/// w_ij(s) = <e_ij>(s) + M_{i->j}(s) + M_{j->i}(s).
GSWeights gs_weights(const Problem& problem, const SearchSpace& spaces, const GSMessages& messages,
                     const GSConfig& cfg);

/// Keeps the best (1 - resample_fraction) * S states of every edge and refills
/// with distinct grid-aligned Gaussian proposals around the best one (radius
/// proposal_radius * radius_scale bins). Edges whose weights are all -inf are
/// redrawn uniformly. `anchors[e]`, when given, are inserted right after the
/// kept states. A resample_fraction of 0 returns the spaces unchanged.
SearchSpace gs_resample(const SearchSpace& spaces, const GSWeights& weights, const GSConfig& cfg,
                        std::mt19937_64& rng, double radius_scale = 1.0,
                        const std::vector<std::vector<EdgeState>>* anchors = nullptr);

/// A full assignment on the grids.
struct GSAssignment {
  std::vector<int> b;            // B index per spin
  std::vector<EdgeState> edges;  // state per classical edge
};

/// sum_e <e_e> + sum_i <e_i> when every BP equation holds within tolerance,
/// otherwise nullopt.
std::optional<double> gs_discrete_energy(const Problem& problem, const GSConfig& cfg,
                                         const GSAssignment& assignment, double tolerance);

/// Parameters and cavity fields of an assignment.
ParameterSet assignment_parameters(const GSConfig& cfg, const GSAssignment& assignment);
CavityFieldSet assignment_fields(const GSConfig& cfg, const GSAssignment& assignment);

struct GSResult {
  ParameterSet params;
  CavityFieldSet fields;
  Observables obs;
  double energy = 0.0;  // refit energy
  /// -(sum Delta e_i - sum Delta e_ij) of the final round, when finite.
  std::optional<double> maxsum_estimate;
  /// Discrete objective of the final round's conditioned extraction.
  std::optional<double> discrete_energy;
  std::string source;  // which candidate produced the result
  bool converged = false;
  int sweeps = 0;
  int rounds = 0;
  int flagged_edges = 0;
  int site_disagreements = 0;
  bool below_delta_m = false;
  bool fallback = false;
  std::vector<std::string> warnings;
  SearchSpace spaces;
  GSMessages messages;
};

/// Outer loop of sweeps to convergence, extraction, refit and resampling with
/// a shrinking tolerance. With `initial` the search spaces start from it
/// instead of the seeded random draw.
GSResult gs_solve(const Problem& problem, const GSConfig& cfg,
                  const std::optional<SearchSpace>& initial = std::nullopt);

}  // namespace qcavity
