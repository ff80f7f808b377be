#pragma once

#include <optional>
#include <vector>

namespace qcavity {

/// Uniform ansatz B_i = B, K_ij = K on a d-regular ferromagnet (J = 1).
struct HomogeneousPoint {
  double B = 0.0;
  double K = 0.0;
  double nu = 0.0;  // uniform cavity field
  double energy = 0.0;  // per spin
  double m_z = 0.0;
  double m_x = 0.0;
};

/// Distinct stable solutions of nu = 2B + (d-1) * shift(nu, K) reached by
/// damped iteration from 0, +2 and -2, polished to a residual below 1e-12.
std::vector<double> homog_branches(double B, double K, int d);

/// Chosen uniform fixed point. At B = 0 the nonzero branch is returned when
/// it exists (positive sign); otherwise the branch of lowest energy at field h.
double homog_fixed_point(double B, double K, int d, double h = 1.0);

/// Energy per spin (d/2) <e_bond> + <e_site> and magnetizations at a given nu.
HomogeneousPoint homog_point(double B, double K, int d, double h, double nu);

/// homog_point at homog_fixed_point(B, K, d, h).
HomogeneousPoint homog_energy(double B, double K, int d, double h);

struct HomogGrid {
  double b_step = 0.01;
  double b_max = 3.0;
  double k_step = 0.01;
  double k_min = -0.5;
  double k_max = 2.0;
};

struct HomogRow {
  double h = 0.0;
  HomogeneousPoint point;
};

struct HomogCurve {
  std::vector<HomogRow> rows;
  /// Largest h whose minimizer has m_z > 1e-3, refined by bisection to 1e-3.
  std::optional<double> h_c;
  /// Location and size of the largest energy jump between consecutive rows.
  double largest_jump_h = 0.0;
  double largest_jump = 0.0;
};

struct HomogScan {
  HomogCurve ising;       // (B, K) ansatz
  HomogCurve mean_field;  // K = 0
};

/// Quantum-cavity estimate of the ferromagnetic critical field at d = 3.
inline constexpr double kReferenceCriticalField = 2.23;

inline constexpr double kOrderedThreshold = 1e-3;

/// Global grid minimum of e(B, K) for each h in [h_min, h_max] (step h_step),
/// with B >= 0 by the global spin-flip symmetry.
HomogScan homog_scan(int d, double h_min, double h_max, double h_step, const HomogGrid& grid = {});

}  // namespace qcavity
