#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qcavity/classical_bp.hpp"
#include "qcavity/instance.hpp"

namespace qcavity {

inline constexpr int kMaxExactSpins = 24;
inline constexpr int kMaxDenseSpins = 12;

/// Raised when an instance is too large for the requested exact method.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Basis state sigma has s_i = +1 when bit i is 0 and -1 when it is 1.
inline int spin_of(std::uint64_t sigma, int i) { return (sigma >> i) & 1U ? -1 : 1; }

/// Diagonal element -sum J_ij s_i s_j.
double diagonal_energy(const QuantumInstance& inst, std::uint64_t sigma);

/// w = H v, matrix-free: w[s] = E_0(s) v[s] - sum_i h_i v[s ^ (1 << i)].
void apply_h(const QuantumInstance& inst, std::span<const double> v, std::span<double> w);
std::vector<double> apply_h(const QuantumInstance& inst, std::span<const double> v);

/// <v|H|v> / <v|v>.
double expectation(const QuantumInstance& inst, std::span<const double> v);

struct ExactOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-12;
  int max_iters = 100000;
  /// Krylov dimension per restart. 2 is the plain two-vector modified
  /// Lanczos; larger values restart from the lowest Ritz vector of a longer
  /// recurrence, rebuilt in a second pass so only four vectors are stored.
  int krylov_dim = 24;
  int max_reseeds = 5;
};

struct ExactResult {
  double energy = 0.0;
  std::vector<double> sigma_x;
  std::vector<double> sigma_z;
  std::optional<double> m_x;  // absent when every h_i == 0
  std::vector<double> vector;
  int iterations = 0;  // restarts
  int matvecs = 0;
  bool converged = false;
};

ExactResult ground_state(const QuantumInstance& inst, const ExactOptions& options = {});

/// Full Hamiltonian matrix, n <= kMaxDenseSpins.
Eigen::MatrixXd dense_hamiltonian(const QuantumInstance& inst);
double dense_ground_energy(const QuantumInstance& inst);

/// Normalized amplitudes a(s) ~ exp(sum B_i s_i + sum K_ij s_i s_j) of the
/// Ising ansatz, by direct enumeration.
std::vector<double> ansatz_state(const ClassicalGraph& graph, const ParameterSet& params);

}  // namespace qcavity
