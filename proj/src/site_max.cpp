#include "qcavity/site_max.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>

#include "maxsum_util.hpp"
#include "qcavity/classical_bp.hpp"

namespace qcavity {

namespace {

double site_value(double h, double two_b, double ly_plus, double ly_minus) {
  if (h == 0.0) return 0.0;
  double a = two_b + ly_plus, b = -two_b + ly_minus;
  double hi = std::max(a, b);
  return 2.0 * h * std::exp(-(hi + std::log1p(std::exp(std::min(a, b) - hi))));
}

// Prefers the index closer to 0, then the negative one.
bool preferred(int a, int b) {
  if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
  return a < b;
}

struct Increments {
  double u, ly_plus, ly_minus;
};

Increments increments(const OrientedState& s) {
  double base = log_cosh(s.nu_in);
  return {cavity_shift(s.nu_in, s.K), log_cosh(s.nu_in + 2.0 * s.K) - base, log_cosh(s.nu_in - 2.0 * s.K) - base};
}

}  // namespace

SiteFieldChoice best_site_field(std::span<const double> offsets, double tolerance, double log_y_plus,
                                double log_y_minus, double h, double b_step, int b_half) {
  auto admissible = [&](int l) {
    const double two_b = 2.0 * l * b_step;
    for (double o : offsets)
      if (std::abs(o - two_b) > tolerance) return false;
    return true;
  };
  int lo = -b_half, hi = b_half;
  if (!offsets.empty()) {
    auto [mn, mx] = std::minmax_element(offsets.begin(), offsets.end());
    const double two = 2.0 * b_step;
    const double lo_real = std::ceil((*mx - tolerance) / two) - 1.0;
    const double hi_real = std::floor((*mn + tolerance) / two) + 1.0;
    if (lo_real > b_half || hi_real < -b_half) return {};
    lo = std::max(lo, static_cast<int>(lo_real));
    hi = std::min(hi, static_cast<int>(hi_real));
    while (lo <= hi && !admissible(lo)) ++lo;
    while (hi >= lo && !admissible(hi)) --hi;
  }
  if (lo > hi) return {};

  SiteFieldChoice best;
  best.feasible = true;
  if (h == 0.0) {
    best.index = lo > 0 ? lo : (hi < 0 ? hi : 0);
    best.value = 0.0;
    return best;
  }
  // The site term is unimodal in B with its peak at (ln y_- - ln y_+) / 4.
  const double peak = (log_y_minus - log_y_plus) / (4.0 * b_step);
  const double clamped = std::clamp(peak, static_cast<double>(lo), static_cast<double>(hi));
  const int cands[2] = {static_cast<int>(std::floor(clamped)), static_cast<int>(std::ceil(clamped))};
  best.value = kNegInf;
  for (int l : cands) {
    double v = site_value(h, 2.0 * l * b_step, log_y_plus, log_y_minus);
    if (v > best.value + kTieTolerance || (v >= best.value - kTieTolerance && preferred(l, best.index))) {
      best.value = std::max(v, best.value);
      best.index = l;
    }
  }
  best.value = site_value(h, 2.0 * best.index * b_step, log_y_plus, log_y_minus);
  return best;
}

std::vector<double> exhaustive_inner_max(const SiteProblem& site, std::span<const OrientedState> targets) {
  const std::size_t d = site.others.size();
  std::vector<std::vector<Increments>> inc(d);
  std::vector<std::vector<int>> live(d);  // states with a finite message
  for (std::size_t k = 0; k < d; ++k) {
    const auto& e = site.others[k];
    for (std::size_t s = 0; s < e.states.size(); ++s) {
      inc[k].push_back(increments(e.states[s]));
      if (std::isfinite(e.messages[s])) live[k].push_back(static_cast<int>(s));
    }
  }
  std::vector<double> out(targets.size(), kNegInf);
  for (std::size_t k = 0; k < d; ++k)
    if (live[k].empty()) return out;

  std::vector<std::size_t> pos(d, 0);
  std::vector<double> offsets(d + 1);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Increments tgt = increments(targets[t]);
    std::fill(pos.begin(), pos.end(), 0);
    while (true) {
      double U = tgt.u, lyp = tgt.ly_plus, lym = tgt.ly_minus, msg = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const auto& x = inc[k][live[k][pos[k]]];
        U += x.u;
        lyp += x.ly_plus;
        lym += x.ly_minus;
        msg += site.others[k].messages[live[k][pos[k]]];
      }
      for (std::size_t k = 0; k < d; ++k)
        offsets[k] = site.others[k].states[live[k][pos[k]]].nu_out - (U - inc[k][live[k][pos[k]]].u);
      offsets[d] = targets[t].nu_out - (U - tgt.u);
      auto choice = best_site_field(offsets, site.tolerance, lyp, lym, site.h, site.b_step, site.b_half);
      if (choice.feasible) out[t] = std::max(out[t], choice.value + msg);

      std::size_t k = 0;
      while (k < d && ++pos[k] == live[k].size()) pos[k++] = 0;
      if (k == d) break;
    }
  }
  return out;
}

ConvolutionGrids default_convolution_grids(double b_step, int b_half, int refine, double k_max, int degree,
                                           int y_bins) {
  if (refine < 1 || y_bins < 2 || degree < 1) throw std::invalid_argument("invalid convolution grid parameters");
  ConvolutionGrids g;
  g.x_step = 2.0 * b_step / refine;
  const double reach = 2.0 * b_half * b_step + degree * 2.0 * k_max;
  g.x_half = static_cast<int>(std::ceil(reach / g.x_step)) + degree;
  const double y_span = 2.0 * k_max * degree;
  g.y_step = y_span > 0.0 ? 2.0 * y_span / y_bins : 1.0;
  g.y_half = y_bins / 2 + degree;
  return g;
}

namespace {

constexpr int kPackOffset = 1 << 15;

std::uint64_t pack(int xp, int xm, int a, int b) {
  auto f = [](int v) { return static_cast<std::uint64_t>(v + kPackOffset); };
  return (f(xp) << 48) | (f(xm) << 32) | (f(a) << 16) | f(b);
}

int unpack(std::uint64_t key, int slot) {
  return static_cast<int>((key >> (16 * (3 - slot))) & 0xFFFF) - kPackOffset;
}

struct Quantized {
  int u, a, b;
};

}  // namespace

std::vector<double> convolution_inner_max(const SiteProblem& site, std::span<const OrientedState> targets,
                                          const ConvolutionGrids& grids) {
  const double ratio = 2.0 * site.b_step / grids.x_step;
  const int m = static_cast<int>(std::lround(ratio));
  if (m < 1 || std::abs(ratio - m) > 1e-9)
    throw std::invalid_argument("convolution x_step must divide 2 * b_step");
  if (grids.x_half >= kPackOffset || grids.y_half >= kPackOffset || grids.x_half < 0 || grids.y_half < 0)
    throw std::invalid_argument("convolution grid too large");

  auto quantize = [&](const OrientedState& s) {
    Increments x = increments(s);
    return Quantized{static_cast<int>(std::lround(x.u / grids.x_step)),
                     static_cast<int>(std::lround(x.ly_plus / grids.y_step)),
                     static_cast<int>(std::lround(x.ly_minus / grids.y_step))};
  };
  auto overflow = [](const std::string& who) {
    throw GridOverflow("convolution grid overflow at " + who);
  };

  const std::size_t d = site.others.size();
  std::vector<std::vector<Quantized>> q(d);
  for (std::size_t k = 0; k < d; ++k)
    for (const auto& s : site.others[k].states) q[k].push_back(quantize(s));
  std::vector<Quantized> qt;
  for (const auto& s : targets) qt.push_back(quantize(s));

  // Reachable range of x_- at step 0: 2B plus every increment still to come.
  auto bounds = [](const std::vector<Quantized>& v) {
    int lo = 0, hi = 0;
    for (std::size_t s = 0; s < v.size(); ++s) {
      lo = s == 0 ? v[s].u : std::min(lo, v[s].u);
      hi = s == 0 ? v[s].u : std::max(hi, v[s].u);
    }
    return std::pair{lo, hi};
  };
  long x_lo = -static_cast<long>(site.b_half) * m, x_hi = static_cast<long>(site.b_half) * m;
  for (std::size_t k = 0; k <= d; ++k) {
    auto [lo, hi] = bounds(k < d ? q[k] : qt);
    x_lo += lo;
    x_hi += hi;
    if (x_lo < -grids.x_half || x_hi > grids.x_half)
      overflow(k < d ? "incident edge " + std::to_string(k) : std::string("the target edge"));
  }

  std::unordered_map<std::uint64_t, double> table, next;
  for (long x = x_lo; x <= x_hi; ++x) table[pack(0, static_cast<int>(x), 0, 0)] = 0.0;

  for (std::size_t k = 0; k < d; ++k) {
    next.clear();
    const auto& edge = site.others[k];
    for (const auto& [key, value] : table) {
      const int xp = unpack(key, 0), xm = unpack(key, 1), a = unpack(key, 2), b = unpack(key, 3);
      for (std::size_t s = 0; s < edge.states.size(); ++s) {
        const double msg = edge.messages[s];
        if (!std::isfinite(msg)) continue;
        const Quantized& z = q[k][s];
        // The BP equation of this edge: nu_{i->k} = x_+ + x_- without its own increment.
        if (std::abs(edge.states[s].nu_out - (xp + xm - z.u) * grids.x_step) > site.tolerance) continue;
        const int nxp = xp + z.u, nxm = xm - z.u, na = a + z.a, nb = b + z.b;
        if (std::abs(nxp) > grids.x_half) overflow("incident edge " + std::to_string(k));
        if (std::abs(na) > grids.y_half || std::abs(nb) > grids.y_half)
          overflow("incident edge " + std::to_string(k) + " (y range)");
        auto [it, inserted] = next.try_emplace(pack(nxp, nxm, na, nb), value + msg);
        if (!inserted) it->second = std::max(it->second, value + msg);
      }
    }
    table.swap(next);
  }

  std::vector<double> out(targets.size(), kNegInf);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Quantized& z = qt[t];
    for (const auto& [key, value] : table) {
      const int xp = unpack(key, 0), xm = unpack(key, 1);
      const int two_b = xm - z.u;
      if (two_b % m != 0) continue;
      const int l = two_b / m;
      if (std::abs(l) > site.b_half) continue;
      const double offset = targets[t].nu_out - xp * grids.x_step;
      if (std::abs(offset - 2.0 * l * site.b_step) > site.tolerance) continue;
      const int a = unpack(key, 2) + z.a, b = unpack(key, 3) + z.b;
      if (std::abs(a) > grids.y_half || std::abs(b) > grids.y_half) overflow("the target edge (y range)");
      const double v = site_value(site.h, 2.0 * l * site.b_step, a * grids.y_step, b * grids.y_step) + value;
      out[t] = std::max(out[t], v);
    }
  }
  return out;
}

}  // namespace qcavity
