#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qcavity/instance.hpp"

namespace qcavity {

/// Cavity fields are clamped to [-kFieldCap, kFieldCap]; tanh is saturated
/// to machine precision well before this.
inline constexpr double kFieldCap = 30.0;

/// Real variational parameters of the Ising ansatz
///   a(s) ~ exp(sum_i B_i s_i + sum_(ij) K_ij s_i s_j),
/// so |a|^2 is a classical Ising measure with fields 2B and couplings 2K.
struct ParameterSet {
  std::vector<double> B;  // per spin
  std::vector<double> K;  // per classical edge

  bool operator==(const ParameterSet&) const = default;
};

/// Directed cavity fields nu_{i->j}, with mu_{i->j}(s) ~ exp(nu_{i->j} s),
/// indexed by ClassicalGraph directed-edge index.
struct CavityFieldSet {
  std::vector<double> nu;

  bool operator==(const CavityFieldSet&) const = default;
};

/// An instance together with the classical graph of its ansatz.
struct Problem {
  QuantumInstance instance;
  ClassicalGraph graph;
  std::vector<double> bond_j;  // J per classical edge

  static Problem build(QuantumInstance inst);
  static Problem build(QuantumInstance inst, ClassicalGraph graph);
};

/// ln cosh(x), stable for large |x|.
double log_cosh(double x);

/// Field shift a neighbour with cavity field nu and coupling K adds:
/// (1/2) ln[cosh(nu + 2K) / cosh(nu - 2K)].
double cavity_shift(double nu, double K);

double clamp_field(double nu);

/// One synchronous sweep of the cavity-field BP equations.
CavityFieldSet bp_update(const ClassicalGraph& graph, const ParameterSet& params,
                         const CavityFieldSet& fields);

/// Total local field 2B_i + sum_k shift(nu_{k->i}, K_ik); <s^z_i> = tanh of it.
double local_field(const ClassicalGraph& graph, const ParameterSet& params,
                   const CavityFieldSet& fields, int i);

enum class BPInit { Zero, Random, Given };

struct BPOptions {
  BPInit init = BPInit::Zero;
  std::uint64_t seed = 0;
  /// nu <- (1 - damping) nu_new + damping nu_old
  double damping = 0.0;
  double tolerance = 1e-9;
  int max_iters = 10000;
  /// Used when init == Given.
  CavityFieldSet initial;
};

/// 0 on forests, 0.5 otherwise.
double default_damping(const ClassicalGraph& graph);

struct BPReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> magnetization_z;
};

struct BPResult {
  CavityFieldSet fields;
  BPReport report;
};

BPResult bp_fixed_point(const ClassicalGraph& graph, const ParameterSet& params,
                        const BPOptions& options = {});

/// <e_ij> = -J <s_i s_j> under the pair marginal built from nu_{i->j}, nu_{j->i}.
double bond_energy(double J, double K, double nu_ij, double nu_ji);

struct NeighborField {
  double K;   // coupling K_ik
  double nu;  // incoming cavity field nu_{k->i}
};

/// <e_i> = -h_i <s^x_i> = -2h / (e^{2B} y_+ + e^{-2B} y_-).
double site_energy(double h, double B, std::span<const NeighborField> neighbors);

/// <s^x_i> = 2 / (e^{2B} y_+ + e^{-2B} y_-); equals -site_energy/h for h > 0.
double transverse_magnetization(double B, std::span<const NeighborField> neighbors);

struct Observables {
  double energy = 0.0;
  std::optional<double> m_x;  // absent when every h_i == 0
  double q_z = 0.0;
  std::vector<double> sigma_z;
  std::vector<double> sigma_x;
  double mean_abs_sigma_z = 0.0;
};

Observables observables(const Problem& problem, const ParameterSet& params,
                        const CavityFieldSet& fields);

/// Incoming neighbour view of spin i.
std::vector<NeighborField> neighbor_fields(const ClassicalGraph& graph, const ParameterSet& params,
                                           const CavityFieldSet& fields, int i);

/// Variational energy of a concrete parameter set: BP fixed point followed by
/// observables, with fixed-point selection by minimum mean |<s^z>|.
struct Refit {
  CavityFieldSet fields;
  Observables obs;
  BPReport report;
  /// True when delta_m > 0 but no fixed point reached the threshold.
  bool below_delta_m = false;
};

struct RefitOptions {
  double delta_m = 0.0;
  int restarts = 8;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
  int max_iters = 10000;
};

/// Runs BP from `init` (or zero), then, when delta_m > 0 on a graph with
/// cycles and the result has mean |<s^z>| < delta_m, from seeded random
/// starts, keeping the lowest-energy fixed point that passes the threshold.
Refit refit(const Problem& problem, const ParameterSet& params,
            const std::optional<CavityFieldSet>& init, const RefitOptions& options);

}  // namespace qcavity
