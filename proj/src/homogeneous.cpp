#include "qcavity/homogeneous.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qcavity/classical_bp.hpp"

namespace qcavity {

namespace {

double residual(double nu, double B, double K, int d) { return 2.0 * B + (d - 1) * cavity_shift(nu, K) - nu; }

double solve_from(double nu, double B, double K, int d) {
  for (int it = 0; it < 400; ++it) {
    double next = clamp_field(0.5 * nu + 0.5 * (2.0 * B + (d - 1) * cavity_shift(nu, K)));
    if (std::abs(next - nu) < 1e-14) {
      nu = next;
      break;
    }
    nu = next;
  }
  // Newton polish; the derivative of shift(nu, K) is (tanh(nu + 2K) - tanh(nu - 2K)) / 2.
  for (int it = 0; it < 100; ++it) {
    double f = residual(nu, B, K, d);
    if (std::abs(f) < 1e-14) break;
    double slope = (d - 1) * 0.5 * (std::tanh(nu + 2.0 * K) - std::tanh(nu - 2.0 * K)) - 1.0;
    if (std::abs(slope) < 1e-300) break;
    double next = clamp_field(nu - f / slope);
    if (std::abs(residual(next, B, K, d)) >= std::abs(f)) break;
    nu = next;
  }
  return nu;
}

}  // namespace

std::vector<double> homog_branches(double B, double K, int d) {
  if (d < 2) throw std::invalid_argument("homogeneous ansatz needs degree >= 2");
  std::vector<double> out;
  for (double start : {0.0, 2.0, -2.0}) {
    double nu = solve_from(start, B, K, d);
    if (std::abs(residual(nu, B, K, d)) > 1e-10) continue;
    bool dup = std::any_of(out.begin(), out.end(), [&](double x) { return std::abs(x - nu) < 1e-8; });
    if (!dup) out.push_back(nu);
  }
  if (out.empty()) out.push_back(solve_from(2.0 * B, B, K, d));
  return out;
}

HomogeneousPoint homog_point(double B, double K, int d, double h, double nu) {
  HomogeneousPoint p;
  p.B = B;
  p.K = K;
  p.nu = nu;
  std::vector<NeighborField> nbrs(d, NeighborField{K, nu});
  p.m_x = transverse_magnetization(B, nbrs);
  p.energy = 0.5 * d * bond_energy(1.0, K, nu, nu) - h * p.m_x;
  p.m_z = std::tanh(2.0 * B + d * cavity_shift(nu, K));
  return p;
}

double homog_fixed_point(double B, double K, int d, double h) {
  auto branches = homog_branches(B, K, d);
  if (B == 0.0) {
    double best = 0.0;
    for (double nu : branches)
      if (nu > best + 1e-8) best = nu;
    return best;
  }
  double best_nu = branches.front();
  double best_e = homog_point(B, K, d, h, best_nu).energy;
  for (double nu : branches) {
    double e = homog_point(B, K, d, h, nu).energy;
    if (e < best_e - 1e-15 || (e <= best_e + 1e-15 && std::abs(nu) > std::abs(best_nu))) {
      best_e = e;
      best_nu = nu;
    }
  }
  return best_nu;
}

HomogeneousPoint homog_energy(double B, double K, int d, double h) {
  return homog_point(B, K, d, h, homog_fixed_point(B, K, d, h));
}

namespace {

// Per grid point and branch: bond part, site part per unit field, magnetizations.
struct Entry {
  double B, K, nu, bond, site_unit, m_z, m_x;
  bool symmetric_at_zero;  // the nu = 0 branch at B = 0 when a polarized one exists
};

class Table {
 public:
  Table(int d, const HomogGrid& grid, bool mean_field_only) {
    const int nb = static_cast<int>(std::floor(grid.b_max / grid.b_step + 1e-9));
    const int k_lo = static_cast<int>(std::ceil(grid.k_min / grid.k_step - 1e-9));
    const int k_hi = static_cast<int>(std::floor(grid.k_max / grid.k_step + 1e-9));
    for (int ib = 0; ib <= nb; ++ib) {
      const double B = ib * grid.b_step;
      for (int ik = mean_field_only ? 0 : k_lo; ik <= (mean_field_only ? 0 : k_hi); ++ik) {
        const double K = ik * grid.k_step;
        auto branches = homog_branches(B, K, d);
        const bool polarized = std::any_of(branches.begin(), branches.end(), [](double x) { return std::abs(x) > 1e-8; });
        for (double nu : branches) {
          if (B == 0.0 && nu < -1e-8) continue;  // mirror image of the positive branch
          auto p = homog_point(B, K, d, 1.0, nu);
          double bond = 0.5 * d * bond_energy(1.0, K, nu, nu);
          entries_.push_back({B, K, nu, bond, -p.m_x, p.m_z, p.m_x, B == 0.0 && polarized && std::abs(nu) <= 1e-8});
        }
      }
    }
  }

  HomogeneousPoint minimize(double h) const {
    const Entry* best = nullptr;
    double best_e = std::numeric_limits<double>::infinity();
    for (const auto& en : entries_) {
      if (en.symmetric_at_zero) continue;
      double e = en.bond + h * en.site_unit;
      if (e < best_e - 1e-13 || (e <= best_e + 1e-13 && best && std::abs(en.m_z) > std::abs(best->m_z))) {
        best_e = std::min(e, best_e);
        best = &en;
      }
    }
    HomogeneousPoint p;
    p.B = best->B;
    p.K = best->K;
    p.nu = best->nu;
    p.energy = best->bond + h * best->site_unit;
    p.m_z = std::abs(best->m_z);
    p.m_x = best->m_x;
    return p;
  }

 private:
  std::vector<Entry> entries_;
};

HomogCurve scan_curve(const Table& table, double h_min, double h_max, double h_step) {
  HomogCurve curve;
  const int steps = static_cast<int>(std::floor((h_max - h_min) / h_step + 1e-9));
  for (int s = 0; s <= steps; ++s) {
    double h = h_min + s * h_step;
    curve.rows.push_back({h, table.minimize(h)});
  }
  for (std::size_t r = 1; r < curve.rows.size(); ++r) {
    double jump = std::abs(curve.rows[r].point.energy - curve.rows[r - 1].point.energy);
    if (jump > curve.largest_jump) {
      curve.largest_jump = jump;
      curve.largest_jump_h = curve.rows[r].h;
    }
  }
  int last = -1;
  for (std::size_t r = 0; r < curve.rows.size(); ++r)
    if (curve.rows[r].point.m_z > kOrderedThreshold) last = static_cast<int>(r);
  if (last < 0) return curve;
  double lo = curve.rows[last].h;
  if (last + 1 < static_cast<int>(curve.rows.size())) {
    double hi = curve.rows[last + 1].h;
    while (hi - lo > 1e-3) {
      double mid = 0.5 * (lo + hi);
      if (table.minimize(mid).m_z > kOrderedThreshold)
        lo = mid;
      else
        hi = mid;
    }
  }
  curve.h_c = lo;
  return curve;
}

}  // namespace

HomogScan homog_scan(int d, double h_min, double h_max, double h_step, const HomogGrid& grid) {
  if (d < 2) throw std::invalid_argument("homogeneous ansatz needs degree >= 2");
  if (!(h_step > 0.0) || h_max < h_min) throw std::invalid_argument("invalid h range");
  if (!(grid.b_step > 0.0) || !(grid.k_step > 0.0) || grid.k_min > grid.k_max || grid.b_max < 0.0)
    throw std::invalid_argument("invalid homogeneous grid");
  HomogScan out;
  out.ising = scan_curve(Table(d, grid, false), h_min, h_max, h_step);
  out.mean_field = scan_curve(Table(d, grid, true), h_min, h_max, h_step);
  return out;
}

}  // namespace qcavity
