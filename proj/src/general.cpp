#include "qcavity/general.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>

#include "maxsum_util.hpp"
#include "qcavity/site_max.hpp"

namespace qcavity {

int GridAxis::nearest(double x) const {
  double l = std::round(x / step);
  return static_cast<int>(std::clamp(l, static_cast<double>(-half_count), static_cast<double>(half_count)));
}

void GSConfig::validate() const {
  for (const GridAxis* g : {&b_grid, &k_grid, &nu_grid})
    if (!(g->step > 0.0) || g->half_count < 0) throw std::invalid_argument("grid steps must be positive");
  if (states_per_edge < 1) throw std::invalid_argument("states_per_edge must be at least 1");
  if (!(tolerance_initial > 0.0) || !(tolerance_decay > 0.0) || tolerance_decay > 1.0)
    throw std::invalid_argument("tolerance schedule needs initial > 0 and decay in (0, 1]");
  if (tolerance_floor && !(*tolerance_floor > 0.0)) throw std::invalid_argument("tolerance floor must be positive");
  if (!(delta_m >= 0.0 && delta_m < 1.0)) throw std::invalid_argument("delta_m must lie in [0, 1)");
  if (k_max && !(*k_max >= 0.0)) throw std::invalid_argument("k_max must be non-negative");
  if (!(resample_fraction >= 0.0 && resample_fraction <= 1.0))
    throw std::invalid_argument("resample_fraction must lie in [0, 1]");
  if (!(proposal_radius > 0.0)) throw std::invalid_argument("proposal_radius must be positive");
  if (outer_rounds < 1 || max_sweeps < 1) throw std::invalid_argument("outer_rounds and max_sweeps must be >= 1");
  if (refit_restarts < 0) throw std::invalid_argument("refit_restarts must be >= 0");
  if (convolution_refine < 1 || y_bins < 2) throw std::invalid_argument("invalid convolution settings");
  seed_field_grid.validate();
  seed_coupling_grid.validate();
}

double GSConfig::floor() const { return tolerance_floor ? *tolerance_floor : 2.0 * nu_grid.step; }

double GSConfig::tolerance_at(int round) const {
  return std::max(floor(), tolerance_initial * std::pow(tolerance_decay, round));
}

GSConfig GSConfig::defaults_for(const ClassicalGraph& graph) {
  GSConfig cfg;
  if (!graph.is_forest()) cfg.k_max = 1.0;
  return cfg;
}

double state_bond_energy(const GSConfig& cfg, double J, const EdgeState& s) {
  return bond_energy(J, cfg.k_grid.value(s.k), cfg.nu_grid.value(s.nu_fwd), cfg.nu_grid.value(s.nu_rev));
}

GSMessages zero_messages(const Problem& problem, const SearchSpace& spaces) {
  GSMessages m(problem.graph.num_directed());
  for (int d = 0; d < problem.graph.num_directed(); ++d) m[d].assign(spaces.edges[d / 2].size(), 0.0);
  return m;
}

namespace {

struct View {
  double K, nu_in, nu_out, u, ly_plus, ly_minus;
};

struct NodeEval {
  bool feasible = false;
  int b = 0;
  double site = 0.0;
  double violation = 0.0;
};

struct JointMax {
  bool feasible = false;
  double value = kNegInf;
  int b = 0;
  std::vector<int> pick;
};

constexpr double kMaxEnumeration = 4e6;

// Per-sweep data for the states of one search space, oriented per directed edge.
class Engine {
 public:
  Engine(const Problem& problem, const SearchSpace& spaces, const GSConfig& cfg, double tolerance)
      : p_(problem), g_(problem.graph), sp_(spaces), cfg_(cfg), tol_(tolerance) {
    if (static_cast<int>(spaces.edges.size()) != g_.num_edges())
      throw std::invalid_argument("search space does not match the classical graph");
    views_.resize(g_.num_directed());
    bond_.resize(g_.num_edges());
    for (int e = 0; e < g_.num_edges(); ++e) {
      if (spaces.edges[e].empty()) throw std::invalid_argument("empty search space on an edge");
      for (const auto& s : spaces.edges[e]) {
        const double K = cfg.k_grid.value(s.k);
        const double f = cfg.nu_grid.value(s.nu_fwd), r = cfg.nu_grid.value(s.nu_rev);
        views_[2 * e].push_back(make_view(K, r, f));
        views_[2 * e + 1].push_back(make_view(K, f, r));
        bond_[e].push_back(bond_energy(p_.bond_j[e], K, f, r));
      }
    }
  }

  const std::vector<double>& bond(int e) const { return bond_[e]; }
  std::size_t size(int e) const { return sp_.edges[e].size(); }

  NodeEval evaluate(int i, std::span<const int> pick) const {
    auto inc = g_.incident(i);
    const std::size_t d = inc.size();
    offsets_.resize(d);
    double U = 0.0, lyp = 0.0, lym = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const View& v = views_[inc[a].out][pick[a]];
      U += v.u;
      lyp += v.ly_plus;
      lym += v.ly_minus;
    }
    for (std::size_t a = 0; a < d; ++a) {
      const View& v = views_[inc[a].out][pick[a]];
      offsets_[a] = v.nu_out - (U - v.u);
    }
    auto c = best_site_field(offsets_, tol_, lyp, lym, p_.instance.fields[i], cfg_.b_grid.step,
                             cfg_.b_grid.half_count);
    NodeEval ev;
    ev.feasible = c.feasible;
    ev.b = c.index;
    ev.site = c.value;
    if (!c.feasible) {
      double lo = kNegInf, hi = -kNegInf;
      for (double o : offsets_) {
        lo = std::max(lo, o - tol_);
        hi = std::min(hi, o + tol_);
      }
      const double reach = 2.0 * cfg_.b_grid.step * cfg_.b_grid.half_count;
      lo = std::max(lo, -reach);
      hi = std::min(hi, reach);
      ev.violation = std::max(lo - hi, 0.0) + 1e-9;
    }
    return ev;
  }

  // Outgoing inner maxima of site i for every incident edge, before adding
  // the bond term: out[a][s] = max over the rest of (-<e_i> + sum M_in).
  std::vector<std::vector<double>> inner(int i, const GSMessages& m) const {
    auto inc = g_.incident(i);
    const std::size_t d = inc.size();
    std::vector<std::vector<double>> out(d);
    for (std::size_t a = 0; a < d; ++a) out[a].assign(size(inc[a].edge), kNegInf);
    if (d == 0) return out;
    if (cfg_.inner == InnerMax::Convolution) return convolution(i, m);
    if (cfg_.inner == InnerMax::Coordinate && d > 1) return coordinate(i, m);

    std::vector<int> pick(d, 0);
    while (true) {
      int n_inf = 0;
      std::size_t inf_at = 0;
      double finite = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        double x = m[inc[a].in][pick[a]];
        if (std::isfinite(x)) {
          finite += x;
        } else {
          ++n_inf;
          inf_at = a;
        }
      }
      if (n_inf <= 1) {
        NodeEval ev = evaluate(i, pick);
        if (ev.feasible) {
          for (std::size_t a = 0; a < d; ++a) {
            if (n_inf == 1 && a != inf_at) continue;
            double x = m[inc[a].in][pick[a]];
            double v = ev.site + finite - (std::isfinite(x) ? x : 0.0);
            double& slot = out[a][pick[a]];
            slot = std::max(slot, v);
          }
        }
      }
      std::size_t a = 0;
      while (a < d && ++pick[a] == static_cast<int>(size(inc[a].edge))) pick[a++] = 0;
      if (a == d) break;
    }
    return out;
  }

  // Joint arg-max of -<e_i> + sum M_in over the given per-edge domains.
  JointMax joint(int i, const GSMessages& m, const std::vector<std::vector<int>>& domains) const {
    auto inc = g_.incident(i);
    const std::size_t d = inc.size();
    double combos = 1.0;
    for (const auto& dom : domains) combos *= static_cast<double>(dom.size());
    JointMax best;
    best.pick.assign(d, 0);
    if (combos == 0.0) return best;
    std::vector<int> pick(d);
    auto total = [&](const NodeEval& ev) {
      double v = ev.site;
      for (std::size_t a = 0; a < d; ++a) v += m[inc[a].in][pick[a]];
      return v;
    };
    if (combos <= kMaxEnumeration) {
      std::vector<std::size_t> pos(d, 0);
      while (true) {
        for (std::size_t a = 0; a < d; ++a) pick[a] = domains[a][pos[a]];
        NodeEval ev = evaluate(i, pick);
        if (ev.feasible) {
          double v = total(ev);
          if (!best.feasible || v > best.value + kTieTolerance) {
            best.feasible = std::isfinite(v);
            best.value = v;
            best.b = ev.b;
            best.pick = pick;
          }
        }
        std::size_t a = 0;
        while (a < d && ++pos[a] == domains[a].size()) pos[a++] = 0;
        if (a == d) break;
      }
      if (!best.feasible) best.value = kNegInf;
      return best;
    }
    // Too many combinations: single-edge ascent from the best incoming states.
    for (std::size_t a = 0; a < d; ++a) {
      const auto& msg = m[inc[a].in];
      pick[a] = *std::max_element(domains[a].begin(), domains[a].end(),
                                  [&](int x, int y) { return msg[x] < msg[y]; });
    }
    auto score = [&](NodeEval& ev) {
      ev = evaluate(i, pick);
      return ev.feasible ? total(ev) : -1e6 * ev.violation - 1e12;
    };
    NodeEval ev;
    double current = score(ev);
    for (int round = 0; round < 10; ++round) {
      bool moved = false;
      for (std::size_t a = 0; a < d; ++a) {
        int keep = pick[a];
        for (int s : domains[a]) {
          pick[a] = s;
          NodeEval trial;
          double v = score(trial);
          if (v > current + kTieTolerance) {
            current = v;
            keep = s;
            moved = true;
          }
        }
        pick[a] = keep;
      }
      if (!moved) break;
    }
    ev = evaluate(i, pick);
    if (ev.feasible && std::isfinite(total(ev))) {
      best.feasible = true;
      best.value = total(ev);
      best.b = ev.b;
    }
    best.pick = pick;
    return best;
  }

 private:
  static View make_view(double K, double nu_in, double nu_out) {
    double base = log_cosh(nu_in);
    return {K, nu_in, nu_out, cavity_shift(nu_in, K), log_cosh(nu_in + 2.0 * K) - base,
            log_cosh(nu_in - 2.0 * K) - base};
  }

  std::vector<std::vector<double>> coordinate(int i, const GSMessages& m) const {
    auto inc = g_.incident(i);
    const std::size_t d = inc.size();
    std::vector<std::vector<double>> out(d);
    std::vector<std::vector<int>> all(d);
    for (std::size_t a = 0; a < d; ++a) {
      out[a].assign(size(inc[a].edge), kNegInf);
      for (std::size_t s = 0; s < size(inc[a].edge); ++s) all[a].push_back(static_cast<int>(s));
    }
    for (std::size_t t = 0; t < d; ++t) {
      for (std::size_t s = 0; s < size(inc[t].edge); ++s) {
        auto domains = all;
        domains[t] = {static_cast<int>(s)};
        JointMax jm = joint_excluding(i, m, domains, t);
        out[t][s] = jm.feasible ? jm.value : kNegInf;
      }
    }
    return out;
  }

  JointMax joint_excluding(int i, const GSMessages& m, std::vector<std::vector<int>> domains,
                           std::size_t target) const {
    auto inc = g_.incident(i);
    const std::size_t d = inc.size();
    std::vector<int> pick(d);
    for (std::size_t a = 0; a < d; ++a) {
      const auto& msg = m[inc[a].in];
      pick[a] = *std::max_element(domains[a].begin(), domains[a].end(),
                                  [&](int x, int y) { return msg[x] < msg[y]; });
    }
    auto score = [&]() {
      NodeEval ev = evaluate(i, pick);
      if (!ev.feasible) return std::pair{false, -ev.violation};
      double v = ev.site;
      for (std::size_t a = 0; a < d; ++a)
        if (a != target) v += m[inc[a].in][pick[a]];
      return std::pair{true, v};
    };
    auto better = [](std::pair<bool, double> x, std::pair<bool, double> y) {
      if (x.first != y.first) return x.first;
      return x.second > y.second + kTieTolerance;
    };
    auto current = score();
    for (int round = 0; round < 10; ++round) {
      bool moved = false;
      for (std::size_t a = 0; a < d; ++a) {
        if (a == target) continue;
        int keep = pick[a];
        for (int s : domains[a]) {
          pick[a] = s;
          auto v = score();
          if (better(v, current)) {
            current = v;
            keep = s;
            moved = true;
          }
        }
        pick[a] = keep;
      }
      if (!moved) break;
    }
    JointMax jm;
    jm.feasible = current.first && std::isfinite(current.second);
    jm.value = jm.feasible ? current.second : kNegInf;
    jm.pick = pick;
    return jm;
  }

  std::vector<std::vector<double>> convolution(int i, const GSMessages& m) const {
    auto inc = g_.incident(i);
    const int d = static_cast<int>(inc.size());
    const double k_reach = cfg_.k_max ? std::min(*cfg_.k_max, cfg_.k_grid.value(cfg_.k_grid.half_count))
                                      : cfg_.k_grid.value(cfg_.k_grid.half_count);
    auto grids = default_convolution_grids(cfg_.b_grid.step, cfg_.b_grid.half_count, cfg_.convolution_refine,
                                           k_reach, d, cfg_.y_bins);
    std::vector<std::vector<double>> out(d);
    for (int t = 0; t < d; ++t) {
      SiteProblem site;
      site.h = p_.instance.fields[i];
      site.b_step = cfg_.b_grid.step;
      site.b_half = cfg_.b_grid.half_count;
      site.tolerance = tol_;
      for (int a = 0; a < d; ++a) {
        if (a == t) continue;
        SiteEdge edge;
        for (const auto& v : views_[inc[a].out]) edge.states.push_back({v.K, v.nu_in, v.nu_out});
        edge.messages = m[inc[a].in];
        site.others.push_back(std::move(edge));
      }
      std::vector<OrientedState> targets;
      for (const auto& v : views_[inc[t].out]) targets.push_back({v.K, v.nu_in, v.nu_out});
      out[t] = convolution_inner_max(site, targets, grids);
    }
    return out;
  }

  const Problem& p_;
  const ClassicalGraph& g_;
  const SearchSpace& sp_;
  const GSConfig& cfg_;
  double tol_;
  std::vector<std::vector<View>> views_;
  std::vector<std::vector<double>> bond_;
  mutable std::vector<double> offsets_;
};

double table_change(const std::vector<double>& a, const std::vector<double>& b) {
  double change = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a[s] == b[s]) continue;
    change = std::max(change, std::isfinite(a[s] - b[s]) ? std::abs(a[s] - b[s]) : 1.0);
  }
  return change;
}

}  // namespace

SweepStats gs_maxsum_sweep(const Problem& problem, const SearchSpace& spaces, GSMessages& messages,
                           const GSConfig& cfg, double tolerance) {
  Engine engine(problem, spaces, cfg, tolerance);
  const auto& g = problem.graph;
  if (static_cast<int>(messages.size()) != g.num_directed())
    throw std::invalid_argument("message tables do not match the classical graph");
  GSMessages next(messages.size());
  SweepStats stats;
  for (int i = 0; i < g.num_vertices(); ++i) {
    auto inc = g.incident(i);
    auto out = engine.inner(i, messages);
    for (std::size_t a = 0; a < inc.size(); ++a) {
      const auto& bond = engine.bond(inc[a].edge);
      for (std::size_t s = 0; s < out[a].size(); ++s) out[a][s] -= bond[s];
      if (!normalize_max(out[a])) ++stats.flagged_edges;
      next[inc[a].out] = std::move(out[a]);
    }
  }
  for (std::size_t d = 0; d < next.size(); ++d) stats.change = std::max(stats.change, table_change(next[d], messages[d]));
  messages.swap(next);
  return stats;
}

GSWeights gs_weights(const Problem& problem, const SearchSpace& spaces, const GSMessages& messages,
                     const GSConfig& cfg) {
  GSWeights w(problem.graph.num_edges());
  for (int e = 0; e < problem.graph.num_edges(); ++e) {
    const auto& st = spaces.edges[e];
    w[e].resize(st.size());
    for (std::size_t s = 0; s < st.size(); ++s)
      w[e][s] = state_bond_energy(cfg, problem.bond_j[e], st[s]) + messages[2 * e][s] + messages[2 * e + 1][s];
  }
  return w;
}

namespace {

int k_limit(const GSConfig& cfg) {
  int lim = cfg.k_grid.half_count;
  if (cfg.k_max) lim = std::min(lim, static_cast<int>(std::floor(*cfg.k_max / cfg.k_grid.step + 1e-9)));
  return lim;
}

EdgeState clip_state(const GSConfig& cfg, EdgeState s) {
  const int kl = k_limit(cfg), nl = cfg.nu_grid.half_count;
  s.k = std::clamp(s.k, -kl, kl);
  s.nu_fwd = std::clamp(s.nu_fwd, -nl, nl);
  s.nu_rev = std::clamp(s.nu_rev, -nl, nl);
  return s;
}

EdgeState uniform_state(const GSConfig& cfg, std::mt19937_64& rng) {
  const int kl = k_limit(cfg), nl = cfg.nu_grid.half_count;
  std::uniform_int_distribution<int> dk(-kl, kl), dn(-nl, nl);
  EdgeState s;
  s.k = dk(rng);
  s.nu_fwd = dn(rng);
  s.nu_rev = dn(rng);
  return s;
}

bool add_distinct(std::vector<EdgeState>& list, const EdgeState& s) {
  if (std::find(list.begin(), list.end(), s) != list.end()) return false;
  list.push_back(s);
  return true;
}

void fill_uniform(std::vector<EdgeState>& list, std::size_t target, const GSConfig& cfg, std::mt19937_64& rng) {
  for (std::size_t attempts = 0; list.size() < target && attempts < 100 * target; ++attempts)
    add_distinct(list, uniform_state(cfg, rng));
}

}  // namespace

SearchSpace gs_resample(const SearchSpace& spaces, const GSWeights& weights, const GSConfig& cfg,
                        std::mt19937_64& rng, double radius_scale,
                        const std::vector<std::vector<EdgeState>>* anchors) {
  if (cfg.resample_fraction <= 0.0) return spaces;
  SearchSpace out;
  out.edges.resize(spaces.edges.size());
  const double radius = std::max(1.0, cfg.proposal_radius * radius_scale);
  std::normal_distribution<double> jump(0.0, radius);
  for (std::size_t e = 0; e < spaces.edges.size(); ++e) {
    const auto& st = spaces.edges[e];
    const auto& w = weights[e];
    const std::size_t S = st.size();
    auto& list = out.edges[e];
    const bool any_finite = std::any_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); });
    if (!any_finite) {
      fill_uniform(list, S, cfg, rng);
      continue;
    }
    std::vector<std::size_t> order(S);
    for (std::size_t s = 0; s < S; ++s) order[s] = s;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    const auto keep = static_cast<std::size_t>(std::lround((1.0 - cfg.resample_fraction) * static_cast<double>(S)));
    for (std::size_t r = 0; r < keep; ++r) list.push_back(st[order[r]]);
    if (anchors && e < anchors->size())
      for (const auto& a : (*anchors)[e])
        if (list.size() < S) add_distinct(list, clip_state(cfg, a));
    const EdgeState best = st[order[0]];
    for (std::size_t attempts = 0; list.size() < S && attempts < 100 * S; ++attempts) {
      EdgeState s{best.k + static_cast<int>(std::lround(jump(rng))),
                  best.nu_fwd + static_cast<int>(std::lround(jump(rng))),
                  best.nu_rev + static_cast<int>(std::lround(jump(rng)))};
      add_distinct(list, clip_state(cfg, s));
    }
    fill_uniform(list, S, cfg, rng);
  }
  return out;
}

std::optional<double> gs_discrete_energy(const Problem& problem, const GSConfig& cfg,
                                         const GSAssignment& assignment, double tolerance) {
  const auto& g = problem.graph;
  if (static_cast<int>(assignment.b.size()) != g.num_vertices() ||
      static_cast<int>(assignment.edges.size()) != g.num_edges())
    throw std::invalid_argument("assignment does not match the classical graph");
  auto params = assignment_parameters(cfg, assignment);
  auto fields = assignment_fields(cfg, assignment);
  double e = 0.0;
  for (int k = 0; k < g.num_edges(); ++k)
    e += bond_energy(problem.bond_j[k], params.K[k], fields.nu[2 * k], fields.nu[2 * k + 1]);
  for (int i = 0; i < g.num_vertices(); ++i) {
    if (std::abs(assignment.b[i]) > cfg.b_grid.half_count) return std::nullopt;
    auto inc = g.incident(i);
    double U = 0.0;
    for (const auto& a : inc) U += cavity_shift(fields.nu[a.in], params.K[a.edge]);
    for (const auto& a : inc) {
      double offset = fields.nu[a.out] - (U - cavity_shift(fields.nu[a.in], params.K[a.edge]));
      if (std::abs(offset - 2.0 * assignment.b[i] * cfg.b_grid.step) > tolerance) return std::nullopt;
    }
    auto nbrs = neighbor_fields(g, params, fields, i);
    e += site_energy(problem.instance.fields[i], params.B[i], nbrs);
  }
  return e;
}

ParameterSet assignment_parameters(const GSConfig& cfg, const GSAssignment& assignment) {
  ParameterSet p;
  for (int b : assignment.b) p.B.push_back(cfg.b_grid.value(b));
  for (const auto& s : assignment.edges) p.K.push_back(cfg.k_grid.value(s.k));
  return p;
}

CavityFieldSet assignment_fields(const GSConfig& cfg, const GSAssignment& assignment) {
  CavityFieldSet f;
  for (const auto& s : assignment.edges) {
    f.nu.push_back(cfg.nu_grid.value(s.nu_fwd));
    f.nu.push_back(cfg.nu_grid.value(s.nu_rev));
  }
  return f;
}

namespace {

struct Extraction {
  GSAssignment assignment;
  bool consistent = true;
  int disagreements = 0;
};

std::vector<std::vector<int>> full_domains(const ClassicalGraph& g, const SearchSpace& sp, int i) {
  std::vector<std::vector<int>> dom;
  for (const auto& a : g.incident(i)) {
    std::vector<int> all(sp.edges[a.edge].size());
    for (std::size_t s = 0; s < all.size(); ++s) all[s] = static_cast<int>(s);
    dom.push_back(std::move(all));
  }
  return dom;
}

int best_weight(const std::vector<double>& w) {
  int best = 0;
  for (std::size_t s = 1; s < w.size(); ++s)
    if (w[s] > w[best] + kTieTolerance) best = static_cast<int>(s);
  return best;
}

// Per-edge arg-max of the weights, B_i from the Delta e_i maximizer.
Extraction extract_local(const Problem& p, const SearchSpace& sp, const GSMessages& m, const GSWeights& w,
                         const Engine& engine) {
  const auto& g = p.graph;
  Extraction ex;
  ex.assignment.edges.resize(g.num_edges());
  ex.assignment.b.assign(g.num_vertices(), 0);
  for (int e = 0; e < g.num_edges(); ++e) ex.assignment.edges[e] = sp.edges[e][best_weight(w[e])];
  for (int i = 0; i < g.num_vertices(); ++i) {
    JointMax jm = engine.joint(i, m, full_domains(g, sp, i));
    ex.assignment.b[i] = jm.b;
    if (!jm.feasible) ex.consistent = false;
    auto inc = g.incident(i);
    for (std::size_t a = 0; a < inc.size(); ++a)
      if (jm.feasible && sp.edges[inc[a].edge][jm.pick[a]] != ex.assignment.edges[inc[a].edge]) ++ex.disagreements;
  }
  return ex;
}

// Conditioned arg-max along a BFS order: each site fixes its free edges.
Extraction extract_decimation(const Problem& p, const SearchSpace& sp, const GSMessages& m, const GSWeights& w,
                              const Engine& engine) {
  const auto& g = p.graph;
  const int n = g.num_vertices();
  Extraction ex;
  ex.assignment.edges.resize(g.num_edges());
  ex.assignment.b.assign(n, 0);
  std::vector<int> fixed(g.num_edges(), -1);
  std::vector<char> done(n, 0), queued(n, 0);
  for (int root = 0; root < n; ++root) {
    if (done[root]) continue;
    std::deque<int> queue{root};
    queued[root] = 1;
    while (!queue.empty()) {
      int i = queue.front();
      queue.pop_front();
      auto inc = g.incident(i);
      auto domains = full_domains(g, sp, i);
      for (std::size_t a = 0; a < inc.size(); ++a)
        if (fixed[inc[a].edge] >= 0) domains[a] = {fixed[inc[a].edge]};
      JointMax jm = engine.joint(i, m, domains);
      if (!jm.feasible) {
        ex.consistent = false;
        for (std::size_t a = 0; a < inc.size(); ++a)
          jm.pick[a] = fixed[inc[a].edge] >= 0 ? fixed[inc[a].edge] : best_weight(w[inc[a].edge]);
      }
      ex.assignment.b[i] = jm.b;
      for (std::size_t a = 0; a < inc.size(); ++a) fixed[inc[a].edge] = jm.pick[a];
      done[i] = 1;
      for (const auto& a : inc)
        if (!queued[a.neighbor]) {
          queued[a.neighbor] = 1;
          queue.push_back(a.neighbor);
        }
    }
  }
  for (int e = 0; e < g.num_edges(); ++e) ex.assignment.edges[e] = sp.edges[e][fixed[e]];
  return ex;
}

std::optional<double> maxsum_estimate(const Problem& p, const SearchSpace& sp, const GSMessages& m,
                                      const GSWeights& w, const Engine& engine) {
  const auto& g = p.graph;
  double sites = 0.0, edges = 0.0;
  for (int i = 0; i < g.num_vertices(); ++i) {
    JointMax jm = engine.joint(i, m, full_domains(g, sp, i));
    if (!jm.feasible) return std::nullopt;
    sites += jm.value;
  }
  for (int e = 0; e < g.num_edges(); ++e) {
    double top = *std::max_element(w[e].begin(), w[e].end());
    if (!std::isfinite(top)) return std::nullopt;
    edges += top;
  }
  return -(sites - edges);
}

EdgeState state_of(const GSConfig& cfg, const ParameterSet& params, const CavityFieldSet& fields, int e) {
  EdgeState s{cfg.k_grid.nearest(params.K[e]), cfg.nu_grid.nearest(fields.nu[2 * e]),
              cfg.nu_grid.nearest(fields.nu[2 * e + 1])};
  return clip_state(cfg, s);
}

CavityFieldSet quick_bp(const Problem& p, const ParameterSet& params) {
  BPOptions opt;
  opt.damping = default_damping(p.graph);
  opt.max_iters = 300;
  opt.tolerance = 1e-6;
  return bp_fixed_point(p.graph, params, opt).fields;
}

ParameterSet perturb(const GSConfig& cfg, const ParameterSet& base, double sigma_b, double sigma_k,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> nb(0.0, sigma_b), nk(0.0, sigma_k);
  const double kcap = k_limit(cfg) * cfg.k_grid.step;
  ParameterSet p = base;
  for (auto& B : p.B) B += nb(rng);
  for (auto& K : p.K) K = std::clamp(K + nk(rng), -kcap, kcap);
  return p;
}

class SolveLoop {
 public:
  SolveLoop(const Problem& problem, const GSConfig& cfg)
      : p_(problem), cfg_(cfg), rng_(cfg.seed) {
    ropt_.delta_m = cfg.delta_m;
    ropt_.restarts = cfg.refit_restarts;
    ropt_.seed = cfg.seed;
    best_.energy = std::numeric_limits<double>::infinity();
  }

  void consider(const ParameterSet& params, const std::optional<CavityFieldSet>& init, const std::string& source) {
    std::vector<double> key = params.B;
    key.insert(key.end(), params.K.begin(), params.K.end());
    if (!seen_.insert(key).second) return;
    Refit r = refit(p_, params, init, ropt_);
    if (!std::isfinite(r.obs.energy)) return;
    if (r.obs.energy < best_.energy - kTieTolerance) {
      best_.energy = r.obs.energy;
      best_.params = params;
      best_.fields = r.fields;
      best_.obs = r.obs;
      best_.below_delta_m = r.below_delta_m;
      best_.source = source;
    }
  }

  void seed_candidates() {
    const auto& g = p_.graph;
    const int E = g.num_edges();
    seed_states_.assign(E, {});
    if (cfg_.seed_mean_field) {
      MFResult mf = mf_maxsum_solve(p_.instance, cfg_.seed_field_grid, 1000, cfg_.seed);
      ParameterSet P{mf.B, std::vector<double>(E, 0.0)};
      consider(P, std::nullopt, "mean_field_seed");
      seed_params_.push_back(P);
      for (int e = 0; e < E; ++e) {
        auto [a, b] = g.edge(e);
        seed_states_[e].push_back(
            clip_state(cfg_, {0, cfg_.nu_grid.nearest(2.0 * mf.B[a]), cfg_.nu_grid.nearest(2.0 * mf.B[b])}));
      }
    }
    if (cfg_.seed_symmetric) {
      CouplingGrid grid = cfg_.seed_coupling_grid;
      if (cfg_.k_max) grid.cap = grid.cap ? std::min(*grid.cap, *cfg_.k_max) : *cfg_.k_max;
      InnerMax inner = cfg_.inner == InnerMax::Coordinate ? InnerMax::Coordinate : InnerMax::Exhaustive;
      SSResult ss = ss_maxsum_solve(p_.instance, grid, 1000, cfg_.seed, inner);
      ParameterSet P{std::vector<double>(g.num_vertices(), 0.0), std::vector<double>(E, 0.0)};
      for (std::size_t q = 0; q < p_.instance.edges.size(); ++q) {
        const auto& c = p_.instance.edges[q];
        P.K[g.find_edge(c.i, c.j)] = ss.K[q];
      }
      consider(P, std::nullopt, "symmetric_seed");
      seed_params_.push_back(P);
      for (int e = 0; e < E; ++e) seed_states_[e].push_back(clip_state(cfg_, {cfg_.k_grid.nearest(P.K[e]), 0, 0}));
    }
  }

  SearchSpace initial_spaces() {
    const auto& g = p_.graph;
    const int E = g.num_edges();
    const std::size_t S = static_cast<std::size_t>(cfg_.states_per_edge);
    SearchSpace sp;
    sp.edges.resize(E);
    for (int e = 0; e < E; ++e)
      for (const auto& s : seed_states_[e])
        if (sp.edges[e].size() < S) add_distinct(sp.edges[e], s);
    const double kcap = k_limit(cfg_) * cfg_.k_grid.step;
    const double k_range = std::min(kcap, 1.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);
    auto short_of = [&] {
      return std::any_of(sp.edges.begin(), sp.edges.end(), [&](const auto& l) { return l.size() < S; });
    };
    for (std::size_t draw = 0; draw < 3 * S && short_of(); ++draw) {
      ParameterSet P;
      if (!seed_params_.empty() && draw % 2 == 1) {
        P = perturb(cfg_, seed_params_[(draw / 2) % seed_params_.size()], 0.3 * unit(rng_), 0.3 * unit(rng_), rng_);
      } else {
        const double sb = 1.5 * unit(rng_), sk = k_range * unit(rng_);
        P.B.resize(g.num_vertices());
        P.K.resize(E);
        for (auto& B : P.B) B = sb * sym(rng_);
        for (auto& K : P.K) K = sk * sym(rng_);
      }
      auto fields = quick_bp(p_, P);
      for (int e = 0; e < E; ++e)
        if (sp.edges[e].size() < S) add_distinct(sp.edges[e], state_of(cfg_, P, fields, e));
    }
    for (auto& list : sp.edges) fill_uniform(list, S, cfg_, rng_);
    return sp;
  }

  std::vector<std::vector<EdgeState>> anchors(double scale) {
    const int E = p_.graph.num_edges();
    std::vector<std::vector<EdgeState>> out(E);
    if (!std::isfinite(best_.energy)) return out;
    for (int e = 0; e < E; ++e) out[e].push_back(state_of(cfg_, best_.params, best_.fields, e));
    const double sb = cfg_.proposal_radius * cfg_.b_grid.step * scale;
    const double sk = cfg_.proposal_radius * cfg_.k_grid.step * scale;
    ParameterSet P = perturb(cfg_, best_.params, sb, sk, rng_);
    auto fields = quick_bp(p_, P);
    for (int e = 0; e < E; ++e) out[e].push_back(state_of(cfg_, P, fields, e));
    return out;
  }

  GSResult run(const std::optional<SearchSpace>& initial) {
    GSResult res;
    seed_candidates();
    SearchSpace spaces = initial ? *initial : initial_spaces();
    const double tol0 = cfg_.tolerance_at(0);
    for (int round = 0; round < cfg_.outer_rounds; ++round) {
      const double tol = cfg_.tolerance_at(round);
      Engine engine(p_, spaces, cfg_, tol);
      GSMessages messages = zero_messages(p_, spaces);
      bool converged = false;
      SweepStats stats;
      for (int sweep = 0; sweep < cfg_.max_sweeps; ++sweep) {
        stats = gs_maxsum_sweep(p_, spaces, messages, cfg_, tol);
        ++res.sweeps;
        if (stats.change <= cfg_.sweep_tolerance) {
          converged = true;
          break;
        }
      }
      GSWeights weights = gs_weights(p_, spaces, messages, cfg_);
      Extraction local = extract_local(p_, spaces, messages, weights, engine);
      Extraction decim = extract_decimation(p_, spaces, messages, weights, engine);
      consider(assignment_parameters(cfg_, decim.assignment), assignment_fields(cfg_, decim.assignment),
               "decimation");
      consider(assignment_parameters(cfg_, local.assignment), assignment_fields(cfg_, local.assignment), "local");

      res.rounds = round + 1;
      res.converged = converged;
      res.flagged_edges = stats.flagged_edges;
      res.site_disagreements = local.disagreements;
      res.maxsum_estimate = maxsum_estimate(p_, spaces, messages, weights, engine);
      res.discrete_energy = gs_discrete_energy(p_, cfg_, decim.assignment, tol);
      if (round + 1 == cfg_.outer_rounds) {
        res.spaces = spaces;
        res.messages = std::move(messages);
        break;
      }
      auto anchor = anchors(tol / tol0);
      spaces = gs_resample(spaces, weights, cfg_, rng_, tol / tol0, &anchor);
    }

    if (!std::isfinite(best_.energy)) {
      res.warnings.push_back("no admissible extraction; falling back to the mean-field seed");
      res.fallback = true;
      MFResult mf = mf_maxsum_solve(p_.instance, cfg_.seed_field_grid, 1000, cfg_.seed);
      seen_.clear();
      consider(ParameterSet{mf.B, std::vector<double>(p_.graph.num_edges(), 0.0)}, std::nullopt, "mean_field_seed");
    }
    if (res.flagged_edges > 0)
      res.warnings.push_back(std::to_string(res.flagged_edges) + " message tables had no admissible state");
    res.params = best_.params;
    res.fields = best_.fields;
    res.obs = best_.obs;
    res.energy = best_.energy;
    res.below_delta_m = best_.below_delta_m;
    res.source = best_.source;
    if (res.below_delta_m) res.warnings.push_back("no BP fixed point reached the delta_m magnetization");
    return res;
  }

 private:
  struct Best {
    double energy;
    ParameterSet params;
    CavityFieldSet fields;
    Observables obs;
    bool below_delta_m = false;
    std::string source;
  };

  const Problem& p_;
  const GSConfig& cfg_;
  std::mt19937_64 rng_;
  RefitOptions ropt_;
  Best best_;
  std::set<std::vector<double>> seen_;
  std::vector<std::vector<EdgeState>> seed_states_;
  std::vector<ParameterSet> seed_params_;
};

}  // namespace

GSResult gs_solve(const Problem& problem, const GSConfig& cfg, const std::optional<SearchSpace>& initial) {
  validate(problem.instance);
  cfg.validate();
  SolveLoop loop(problem, cfg);
  return loop.run(initial);
}

}  // namespace qcavity
