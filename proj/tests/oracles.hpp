#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the solver code paths it is used to check; the only
// library pieces used are plain data types.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "qcavity/classical_bp.hpp"
#include "qcavity/general.hpp"
#include "qcavity/instance.hpp"
#include "qcavity/site_max.hpp"

namespace oracle {

using qcavity::ClassicalGraph;
using qcavity::ParameterSet;
using qcavity::QuantumInstance;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline int spin(std::uint64_t s, int i) { return ((s >> i) & 1U) ? -1 : 1; }

// ---------------------------------------------------------------------------
// Ansatz expectations by summing over all 2^n configurations.

struct Enumerated {
  double energy = 0.0;
  std::vector<double> sigma_z;
  std::vector<double> sigma_x;
  std::vector<double> bond_corr;  // <s_i s_j> per classical edge
};

inline Enumerated enumerate_ansatz(const QuantumInstance& inst, const ClassicalGraph& g, const ParameterSet& P) {
  const int n = inst.n;
  const std::uint64_t N = std::uint64_t{1} << n;
  std::vector<double> log_a(N);
  for (std::uint64_t s = 0; s < N; ++s) {
    double l = 0.0;
    for (int i = 0; i < n; ++i) l += P.B[i] * spin(s, i);
    for (int e = 0; e < g.num_edges(); ++e) l += P.K[e] * spin(s, g.edge(e).first) * spin(s, g.edge(e).second);
    log_a[s] = l;
  }
  const double top = *std::max_element(log_a.begin(), log_a.end());
  std::vector<double> a(N);
  double Z = 0.0;
  for (std::uint64_t s = 0; s < N; ++s) {
    a[s] = std::exp(log_a[s] - top);
    Z += a[s] * a[s];
  }
  Enumerated out;
  out.sigma_z.assign(n, 0.0);
  out.sigma_x.assign(n, 0.0);
  out.bond_corr.assign(g.num_edges(), 0.0);
  for (std::uint64_t s = 0; s < N; ++s) {
    const double w = a[s] * a[s] / Z;
    double diag = 0.0;
    for (const auto& c : inst.edges) diag -= c.J * spin(s, c.i) * spin(s, c.j);
    out.energy += w * diag;
    for (int i = 0; i < n; ++i) {
      out.sigma_z[i] += w * spin(s, i);
      out.sigma_x[i] += a[s] * a[s ^ (std::uint64_t{1} << i)] / Z;
    }
    for (int e = 0; e < g.num_edges(); ++e)
      out.bond_corr[e] += w * spin(s, g.edge(e).first) * spin(s, g.edge(e).second);
  }
  for (int i = 0; i < n; ++i) out.energy -= inst.fields[i] * out.sigma_x[i];
  return out;
}

// ---------------------------------------------------------------------------
// Dense Hamiltonian from Kronecker products of Pauli matrices.

inline Eigen::MatrixXd kron_hamiltonian(const QuantumInstance& inst) {
  const int n = inst.n;
  Eigen::Matrix2d X, Z, I;
  X << 0, 1, 1, 0;
  Z << 1, 0, 0, -1;
  I.setIdentity();
  auto chain = [&](const std::map<int, Eigen::Matrix2d>& ops) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(1, 1);
    for (int q = 0; q < n; ++q) {
      auto it = ops.find(q);
      const Eigen::Matrix2d& A = it == ops.end() ? I : it->second;
      Eigen::MatrixXd R(M.rows() * 2, M.cols() * 2);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) R.block(r * M.rows(), c * M.cols(), M.rows(), M.cols()) = A(r, c) * M;
      M = R;
    }
    return M;
  };
  const int N = 1 << n;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (const auto& c : inst.edges) H -= c.J * chain({{c.i, Z}, {c.j, Z}});
  for (int i = 0; i < n; ++i)
    if (inst.fields[i] != 0.0) H -= inst.fields[i] * chain({{i, X}});
  return H;
}

inline double kron_ground_energy(const QuantumInstance& inst) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kron_hamiltonian(inst), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

// ---------------------------------------------------------------------------
// Chain dynamic programs over the solver grids. Chains have bonds (k, k+1).

inline double chain_bond(const QuantumInstance& inst, int k) {
  for (const auto& c : inst.edges)
    if ((c.i == k && c.j == k + 1) || (c.j == k && c.i == k + 1)) return c.J;
  return 0.0;
}

/// min over B in {l*step : |l| <= half}^n of the product-state energy.
inline double chain_mf_optimum(const QuantumInstance& inst, double step, int half) {
  const int n = inst.n, G = 2 * half + 1;
  std::vector<double> t(G), c(G);
  for (int l = 0; l < G; ++l) {
    const double B = (l - half) * step;
    t[l] = std::tanh(2.0 * B);
    c[l] = 1.0 / std::cosh(2.0 * B);
  }
  std::vector<double> best(G);
  for (int l = 0; l < G; ++l) best[l] = -inst.fields[0] * c[l];
  for (int i = 1; i < n; ++i) {
    const double J = chain_bond(inst, i - 1);
    std::vector<double> next(G, kInf);
    for (int l = 0; l < G; ++l)
      for (int p = 0; p < G; ++p) next[l] = std::min(next[l], best[p] - J * t[p] * t[l]);
    for (int l = 0; l < G; ++l) next[l] -= inst.fields[i] * c[l];
    best.swap(next);
  }
  return *std::min_element(best.begin(), best.end());
}

/// min over per-bond K in {l*step : |l| <= half, |K| <= cap} of the
/// symmetric-point energy of an open chain.
inline double chain_ss_optimum(const QuantumInstance& inst, double step, int half, double cap = kInf) {
  const int n = inst.n;
  std::vector<double> K;
  for (int l = -half; l <= half; ++l)
    if (std::abs(l * step) <= cap + 1e-12) K.push_back(l * step);
  const int G = static_cast<int>(K.size());
  if (n == 1) return -inst.fields[0];
  auto ch = [&](int l) { return std::cosh(2.0 * K[l]); };
  // best[l]: minimal energy of bonds 0..e and sites 0..e given K_e = K[l]
  std::vector<double> best(G);
  for (int l = 0; l < G; ++l) best[l] = -chain_bond(inst, 0) * std::tanh(2.0 * K[l]) - inst.fields[0] / ch(l);
  for (int e = 1; e < n - 1; ++e) {
    const double J = chain_bond(inst, e), h = inst.fields[e];
    std::vector<double> next(G, kInf);
    for (int l = 0; l < G; ++l)
      for (int p = 0; p < G; ++p) next[l] = std::min(next[l], best[p] - h / (ch(p) * ch(l)));
    for (int l = 0; l < G; ++l) next[l] -= J * std::tanh(2.0 * K[l]);
    best.swap(next);
  }
  double out = kInf;
  for (int l = 0; l < G; ++l) out = std::min(out, best[l] - inst.fields[n - 1] / ch(l));
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form local energies written out independently.

inline double pair_energy(double J, double K, double nu1, double nu2) {
  double num = 0.0, den = 0.0;
  for (int s1 : {-1, 1})
    for (int s2 : {-1, 1}) {
      const double w = std::exp(2.0 * K * s1 * s2 + nu1 * s1 + nu2 * s2);
      num += w * s1 * s2;
      den += w;
    }
  return -J * num / den;
}

struct Incoming {
  double K, nu;
};

inline double site_term(double h, double B, const std::vector<Incoming>& in) {
  double yp = 1.0, ym = 1.0;
  for (const auto& x : in) {
    yp *= std::cosh(x.nu + 2.0 * x.K) / std::cosh(x.nu);
    ym *= std::cosh(x.nu - 2.0 * x.K) / std::cosh(x.nu);
  }
  return -2.0 * h / (std::exp(2.0 * B) * yp + std::exp(-2.0 * B) * ym);
}

inline double shift(double nu, double K) { return 0.5 * std::log(std::cosh(nu + 2.0 * K) / std::cosh(nu - 2.0 * K)); }

// ---------------------------------------------------------------------------
// Full product search space of tiny grids.

inline qcavity::SearchSpace full_space(const qcavity::GSConfig& cfg, int edges) {
  qcavity::SearchSpace sp;
  std::vector<qcavity::EdgeState> all;
  for (int k = -cfg.k_grid.half_count; k <= cfg.k_grid.half_count; ++k)
    for (int f = -cfg.nu_grid.half_count; f <= cfg.nu_grid.half_count; ++f)
      for (int r = -cfg.nu_grid.half_count; r <= cfg.nu_grid.half_count; ++r) all.push_back({k, f, r});
  sp.edges.assign(edges, all);
  return sp;
}

/// BP residual check at site i of a full assignment, written out directly.
inline bool site_admissible(const qcavity::Problem& p, const qcavity::GSConfig& cfg, int i, int b,
                            const std::vector<qcavity::EdgeState>& states, double tol) {
  const auto& g = p.graph;
  auto inc = g.incident(i);
  for (const auto& out : inc) {
    const auto& so = states[out.edge];
    const bool fwd = g.edge(out.edge).first == i;
    const double nu_out = cfg.nu_grid.value(fwd ? so.nu_fwd : so.nu_rev);
    double expect = 2.0 * cfg.b_grid.value(b);
    for (const auto& other : inc) {
      if (other.edge == out.edge) continue;
      const auto& s = states[other.edge];
      const bool ofwd = g.edge(other.edge).first == i;
      expect += shift(cfg.nu_grid.value(ofwd ? s.nu_rev : s.nu_fwd), cfg.k_grid.value(s.k));
    }
    if (std::abs(nu_out - expect) > tol) return false;
  }
  return true;
}

inline double site_part(const qcavity::Problem& p, const qcavity::GSConfig& cfg, int i, int b,
                        const std::vector<qcavity::EdgeState>& states) {
  const auto& g = p.graph;
  std::vector<Incoming> in;
  for (const auto& x : g.incident(i)) {
    const auto& s = states[x.edge];
    const bool fwd = g.edge(x.edge).first == i;
    in.push_back({cfg.k_grid.value(s.k), cfg.nu_grid.value(fwd ? s.nu_rev : s.nu_fwd)});
  }
  return site_term(p.instance.fields[i], cfg.b_grid.value(b), in);
}

inline double edge_part(const qcavity::Problem& p, const qcavity::GSConfig& cfg, int e, const qcavity::EdgeState& s) {
  return pair_energy(p.bond_j[e], cfg.k_grid.value(s.k), cfg.nu_grid.value(s.nu_fwd), cfg.nu_grid.value(s.nu_rev));
}

/// Minimum of the discrete MaxSum-BP objective over every assignment of the
/// per-edge state lists and site fields of an open chain, by backtracking
/// with the BP residual checks applied as soon as a site is complete.
inline double chain_discrete_optimum(const qcavity::Problem& p, const qcavity::GSConfig& cfg,
                                     const qcavity::SearchSpace& sp, double tol) {
  const int n = p.instance.n;
  std::vector<qcavity::EdgeState> states(n - 1);
  double best = kInf;
  std::function<void(int, double)> visit = [&](int i, double acc) {
    if (i == n) {
      best = std::min(best, acc);
      return;
    }
    auto close = [&](double with_edge) {
      for (int b = -cfg.b_grid.half_count; b <= cfg.b_grid.half_count; ++b)
        if (site_admissible(p, cfg, i, b, states, tol)) visit(i + 1, with_edge + site_part(p, cfg, i, b, states));
    };
    if (i == n - 1) {
      close(acc);
      return;
    }
    const int e = p.graph.find_edge(i, i + 1);
    for (const auto& s : sp.edges[e]) {
      states[e] = s;
      close(acc + edge_part(p, cfg, e, s));
    }
  };
  visit(0, 0.0);
  return best;
}

// ---------------------------------------------------------------------------
// Site inner maxima by brute force.

struct Increment {
  double u, ly_plus, ly_minus;
};

inline Increment increment(const qcavity::OrientedState& s) {
  return {shift(s.nu_in, s.K), std::log(std::cosh(s.nu_in + 2.0 * s.K) / std::cosh(s.nu_in)),
          std::log(std::cosh(s.nu_in - 2.0 * s.K) / std::cosh(s.nu_in))};
}

/// Joint maximum over B and every combination of the other edges' states,
/// optionally with increments rounded to the x / y bins of a convolution
/// table (x_step = 0 disables rounding).
inline std::vector<double> site_inner_max(const qcavity::SiteProblem& site,
                                          const std::vector<qcavity::OrientedState>& targets, double x_step = 0.0,
                                          double y_step = 0.0) {
  auto round_to = [](double v, double step) { return step > 0.0 ? std::round(v / step) * step : v; };
  auto rounded = [&](const qcavity::OrientedState& s) {
    Increment x = increment(s);
    return Increment{round_to(x.u, x_step), round_to(x.ly_plus, y_step), round_to(x.ly_minus, y_step)};
  };
  const std::size_t d = site.others.size();
  std::vector<double> out(targets.size(), -kInf);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Increment zt = rounded(targets[t]);
    std::vector<std::size_t> pick(d, 0);
    bool done = false;
    for (const auto& e : site.others)
      if (e.states.empty()) done = true;
    while (!done) {
      double msg = 0.0, U = 0.0, lp = zt.ly_plus, lm = zt.ly_minus;
      std::vector<Increment> z(d);
      for (std::size_t k = 0; k < d; ++k) {
        msg += site.others[k].messages[pick[k]];
        z[k] = rounded(site.others[k].states[pick[k]]);
        U += z[k].u;
        lp += z[k].ly_plus;
        lm += z[k].ly_minus;
      }
      if (std::isfinite(msg)) {
        for (int l = -site.b_half; l <= site.b_half; ++l) {
          const double two_b = 2.0 * l * site.b_step;
          bool ok = std::abs(targets[t].nu_out - (two_b + U)) <= site.tolerance;
          for (std::size_t k = 0; k < d && ok; ++k)
            ok = std::abs(site.others[k].states[pick[k]].nu_out - (two_b + U - z[k].u + zt.u)) <= site.tolerance;
          if (!ok) continue;
          const double value = site.h == 0.0 ? 0.0 : 2.0 * site.h / (std::exp(two_b + lp) + std::exp(-two_b + lm));
          out[t] = std::max(out[t], value + msg);
        }
      }
      std::size_t k = 0;
      while (k < d && ++pick[k] == site.others[k].states.size()) pick[k++] = 0;
      if (k == d) break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random test inputs.

/// Random labelled tree (each vertex attaches to an earlier one) with
/// gaussian couplings and fields in [0, 2).
inline QuantumInstance random_tree(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QuantumInstance inst;
  inst.n = n;
  for (int v = 1; v < n; ++v) {
    const int parent = static_cast<int>(unit(rng) * v);
    inst.edges.push_back({parent, v, gauss(rng)});
  }
  for (int i = 0; i < n; ++i) inst.fields.push_back(2.0 * unit(rng));
  return inst;
}

inline ParameterSet random_params(const ClassicalGraph& g, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> sym(-scale, scale);
  ParameterSet P;
  for (int i = 0; i < g.num_vertices(); ++i) P.B.push_back(sym(rng));
  for (int e = 0; e < g.num_edges(); ++e) P.K.push_back(sym(rng));
  return P;
}

/// Random degree-(others + 1) site with a planted consistent combination so
/// that many combinations pass the BP residual test. States sit on a 0.1
/// grid for K, nu_in and nu_out; messages are in [-1, 0] with a few -inf.
inline std::pair<qcavity::SiteProblem, std::vector<qcavity::OrientedState>> random_site(
    std::mt19937_64& rng, int others, int states, double b_step = 0.1, int b_half = 10, double tol = 0.13) {
  std::uniform_int_distribution<int> kpick(-5, 5), npick(-10, 10), bpick(-b_half / 2, b_half / 2), coin(0, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0), noise(-0.05, 0.05);
  auto on_grid = [](double x) { return std::round(x * 10.0) / 10.0; };
  qcavity::SiteProblem site;
  site.h = 0.2 + 2.0 * unit(rng);
  site.b_step = b_step;
  site.b_half = b_half;
  site.tolerance = tol;
  site.others.resize(others);
  std::vector<qcavity::OrientedState> targets(states);
  for (auto& e : site.others) e.states.resize(states);
  auto fill_in = [&](qcavity::OrientedState& s) {
    s.K = 0.1 * kpick(rng);
    s.nu_in = 0.1 * npick(rng);
  };
  for (auto& e : site.others)
    for (auto& s : e.states) fill_in(s);
  for (auto& s : targets) fill_in(s);
  // Every state gets an outgoing field consistent with a random choice of
  // B and of the other edges' states, up to noise.
  auto plant = [&](qcavity::OrientedState& s, int skip) {
    double sum = 2.0 * b_step * bpick(rng);
    for (int k = 0; k <= others; ++k) {
      if (k == skip) continue;
      const auto& o = k < others ? site.others[k].states[rng() % states] : targets[rng() % states];
      sum += shift(o.nu_in, o.K);
    }
    s.nu_out = on_grid(sum + noise(rng));
  };
  for (int k = 0; k < others; ++k)
    for (auto& s : site.others[k].states) plant(s, k);
  for (auto& s : targets) plant(s, others);
  for (auto& e : site.others)
    for (int s = 0; s < states; ++s) e.messages.push_back(coin(rng) == 0 ? -kInf : -unit(rng));
  return {site, targets};
}

}  // namespace oracle
