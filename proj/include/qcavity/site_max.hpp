#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace qcavity {

/// One candidate state of an edge (i,k), seen from site i.
struct OrientedState {
  double K = 0.0;
  double nu_in = 0.0;   // nu_{k->i}
  double nu_out = 0.0;  // nu_{i->k}
};

struct SiteEdge {
  std::vector<OrientedState> states;
  std::vector<double> messages;  // M_{k->i}(state), -inf allowed
};

/// The site-local part of the MaxSum-BP update for messages leaving site i
/// along a target edge j: the other incident edges with their incoming
/// messages, the site field grid and the BP tolerance.
struct SiteProblem {
  double h = 0.0;
  double b_step = 0.05;
  int b_half = 60;
  double tolerance = 0.1;
  std::vector<SiteEdge> others;  // all incident edges except the target
};

/// Best admissible site field: maximizes 2h / (e^{2B} y_+ + e^{-2B} y_-)
/// over grid indices l (B = l * b_step, |l| <= b_half) for which every BP
/// residual |offsets[a] - 2B| <= tolerance. Ties go to the smaller |l|, then
/// the negative one. index is unset (feasible == false) if no l is admissible.
struct SiteFieldChoice {
  bool feasible = false;
  int index = 0;
  double value = 0.0;  // -<e_i>
};

SiteFieldChoice best_site_field(std::span<const double> offsets, double tolerance, double log_y_plus,
                                double log_y_minus, double h, double b_step, int b_half);

/// max over B and the other edges' states, subject to the BP equations at
/// site i within the tolerance, of  -<e_i> + sum_k M_{k->i}(s_k).
/// Targets are oriented from i: nu_out = nu_{i->j}, nu_in = nu_{j->i}.
/// Entries with no admissible combination are -inf.
std::vector<double> exhaustive_inner_max(const SiteProblem& site, std::span<const OrientedState> targets);

/// Bins of the sequential convolution table. Cavity-field increments are
/// rounded to multiples of x_step and log-factors of y_+/y_- to multiples of
/// y_step; 2 * b_step must be an integer multiple of x_step.
struct ConvolutionGrids {
  double x_step = 0.025;
  int x_half = 800;
  double y_step = 0.1875;
  int y_half = 40;
};

/// Thrown when a reachable table coordinate falls outside the grids.
class GridOverflow : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Grids large enough for every reachable coordinate: x spans
/// 2 * b_half * b_step plus degree * 2 * k_max, y uses `y_bins` logarithmic
/// bins over [exp(-2 k_max degree), exp(2 k_max degree)] with `degree` bins of
/// rounding margin on each side.
ConvolutionGrids default_convolution_grids(double b_step, int b_half, int refine, double k_max,
                                           int degree, int y_bins = 64);

/// Same maximum as exhaustive_inner_max, computed by folding the other edges
/// in one at a time through the table F_t(x_+, x_-, y_+, y_-):
///   x_+ : increments of the edges folded so far,
///   x_- : 2B plus the increments of the edges still to come (target last),
///   y_+/y_- : log-products of cosh(nu +- 2K) / cosh(nu) folded so far.
/// Each fold enforces nu_{i->k} = x_+ + x_- for the edge being added. The
/// result equals the exhaustive maximum with increments rounded to the bins.
std::vector<double> convolution_inner_max(const SiteProblem& site, std::span<const OrientedState> targets,
                                          const ConvolutionGrids& grids);

}  // namespace qcavity
