#include "qcavity/classical_bp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace qcavity {

Problem Problem::build(QuantumInstance inst) {
  validate(inst);
  auto graph = ClassicalGraph::from_instance(inst);
  return build(std::move(inst), std::move(graph));
}

Problem Problem::build(QuantumInstance inst, ClassicalGraph graph) {
  validate(inst);
  Problem p;
  p.bond_j = bond_couplings(inst, graph);
  p.instance = std::move(inst);
  p.graph = std::move(graph);
  return p;
}

double log_cosh(double x) {
  x = std::abs(x);
  return x + std::log1p(std::exp(-2.0 * x)) - std::numbers::ln2;
}

double cavity_shift(double nu, double K) {
  return 0.5 * (log_cosh(nu + 2.0 * K) - log_cosh(nu - 2.0 * K));
}

double clamp_field(double nu) { return std::clamp(nu, -kFieldCap, kFieldCap); }

namespace {

double log_add_exp(double a, double b) {
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

void check_shapes(const ClassicalGraph& graph, const ParameterSet& params) {
  if (static_cast<int>(params.B.size()) != graph.num_vertices() ||
      static_cast<int>(params.K.size()) != graph.num_edges())
    throw std::invalid_argument("parameter set does not match the classical graph");
}

}  // namespace

CavityFieldSet bp_update(const ClassicalGraph& graph, const ParameterSet& params,
                         const CavityFieldSet& fields) {
  check_shapes(graph, params);
  CavityFieldSet next;
  next.nu.assign(graph.num_directed(), 0.0);
  std::vector<double> shift;
  for (int i = 0; i < graph.num_vertices(); ++i) {
    auto inc = graph.incident(i);
    shift.resize(inc.size());
    double total = 2.0 * params.B[i];
    for (std::size_t a = 0; a < inc.size(); ++a) {
      shift[a] = cavity_shift(fields.nu[inc[a].in], params.K[inc[a].edge]);
      total += shift[a];
    }
    for (std::size_t a = 0; a < inc.size(); ++a) next.nu[inc[a].out] = clamp_field(total - shift[a]);
  }
  return next;
}

double local_field(const ClassicalGraph& graph, const ParameterSet& params,
                   const CavityFieldSet& fields, int i) {
  double total = 2.0 * params.B[i];
  for (const auto& inc : graph.incident(i)) total += cavity_shift(fields.nu[inc.in], params.K[inc.edge]);
  return total;
}

double default_damping(const ClassicalGraph& graph) { return graph.is_forest() ? 0.0 : 0.5; }

BPResult bp_fixed_point(const ClassicalGraph& graph, const ParameterSet& params,
                        const BPOptions& options) {
  check_shapes(graph, params);
  if (options.damping < 0.0 || options.damping >= 1.0)
    throw std::invalid_argument("damping must lie in [0, 1)");

  BPResult result;
  auto& nu = result.fields.nu;
  switch (options.init) {
    case BPInit::Zero:
      nu.assign(graph.num_directed(), 0.0);
      break;
    case BPInit::Random: {
      std::mt19937_64 rng(options.seed);
      std::uniform_real_distribution<double> dist(-3.0, 3.0);
      nu.resize(graph.num_directed());
      for (auto& x : nu) x = dist(rng);
      break;
    }
    case BPInit::Given:
      if (static_cast<int>(options.initial.nu.size()) != graph.num_directed())
        throw std::invalid_argument("initial cavity fields have the wrong size");
      nu = options.initial.nu;
      for (auto& x : nu) x = clamp_field(x);
      break;
  }

  auto& report = result.report;
  for (int it = 1; it <= options.max_iters; ++it) {
    auto next = bp_update(graph, params, result.fields);
    double residual = 0.0;
    for (std::size_t d = 0; d < nu.size(); ++d) {
      double v = (1.0 - options.damping) * next.nu[d] + options.damping * nu[d];
      residual = std::max(residual, std::abs(v - nu[d]));
      nu[d] = v;
    }
    report.iterations = it;
    report.residual = residual;
    if (residual <= options.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.magnetization_z.resize(graph.num_vertices());
  for (int i = 0; i < graph.num_vertices(); ++i)
    report.magnetization_z[i] = std::tanh(local_field(graph, params, result.fields, i));
  return result;
}

double bond_energy(double J, double K, double nu_ij, double nu_ji) {
  double corr = std::tanh(2.0 * K + 0.5 * (log_cosh(nu_ij + nu_ji) - log_cosh(nu_ij - nu_ji)));
  return -J * corr;
}

namespace {

// ln(e^{2B} y_+ + e^{-2B} y_-)
double log_site_norm(double B, std::span<const NeighborField> neighbors) {
  double ly_plus = 0.0, ly_minus = 0.0;
  for (const auto& nb : neighbors) {
    double base = log_cosh(nb.nu);
    ly_plus += log_cosh(nb.nu + 2.0 * nb.K) - base;
    ly_minus += log_cosh(nb.nu - 2.0 * nb.K) - base;
  }
  return log_add_exp(2.0 * B + ly_plus, -2.0 * B + ly_minus);
}

}  // namespace

double site_energy(double h, double B, std::span<const NeighborField> neighbors) {
  return -h * transverse_magnetization(B, neighbors);
}

double transverse_magnetization(double B, std::span<const NeighborField> neighbors) {
  return 2.0 * std::exp(-log_site_norm(B, neighbors));
}

std::vector<NeighborField> neighbor_fields(const ClassicalGraph& graph, const ParameterSet& params,
                                           const CavityFieldSet& fields, int i) {
  std::vector<NeighborField> out;
  out.reserve(graph.degree(i));
  for (const auto& inc : graph.incident(i)) out.push_back({params.K[inc.edge], fields.nu[inc.in]});
  return out;
}

Observables observables(const Problem& problem, const ParameterSet& params,
                        const CavityFieldSet& fields) {
  const auto& graph = problem.graph;
  const auto& inst = problem.instance;
  check_shapes(graph, params);
  Observables obs;
  for (int e = 0; e < graph.num_edges(); ++e) {
    if (problem.bond_j[e] == 0.0) continue;
    obs.energy += bond_energy(problem.bond_j[e], params.K[e], fields.nu[2 * e], fields.nu[2 * e + 1]);
  }
  const int n = graph.num_vertices();
  obs.sigma_z.resize(n);
  obs.sigma_x.resize(n);
  bool any_field = false;
  double sum_x = 0.0;
  for (int i = 0; i < n; ++i) {
    auto nbrs = neighbor_fields(graph, params, fields, i);
    obs.sigma_x[i] = transverse_magnetization(params.B[i], nbrs);
    obs.energy += -inst.fields[i] * obs.sigma_x[i];
    obs.sigma_z[i] = std::tanh(local_field(graph, params, fields, i));
    obs.q_z += obs.sigma_z[i] * obs.sigma_z[i];
    obs.mean_abs_sigma_z += std::abs(obs.sigma_z[i]);
    sum_x += obs.sigma_x[i];
    any_field = any_field || inst.fields[i] > 0.0;
  }
  obs.q_z /= n;
  obs.mean_abs_sigma_z /= n;
  if (any_field) obs.m_x = sum_x / n;
  return obs;
}

Refit refit(const Problem& problem, const ParameterSet& params,
            const std::optional<CavityFieldSet>& init, const RefitOptions& options) {
  const auto& graph = problem.graph;
  const bool forest = graph.is_forest();
  BPOptions bp;
  bp.damping = forest ? 0.0 : 0.5;
  bp.tolerance = options.tolerance;
  bp.max_iters = options.max_iters;
  if (init) {
    bp.init = BPInit::Given;
    bp.initial = *init;
  }

  auto evaluate = [&](const BPOptions& o) {
    auto r = bp_fixed_point(graph, params, o);
    Refit out;
    out.obs = observables(problem, params, r.fields);
    out.fields = std::move(r.fields);
    out.report = std::move(r.report);
    return out;
  };

  Refit first = evaluate(bp);
  const bool filter = options.delta_m > 0.0 && !forest;
  auto passes = [&](const Refit& r) { return !filter || r.obs.mean_abs_sigma_z >= options.delta_m; };
  if (first.report.converged && passes(first)) return first;

  std::vector<Refit> pool;
  pool.push_back(std::move(first));
  for (int r = 1; r <= options.restarts; ++r) {
    BPOptions o = bp;
    o.init = BPInit::Random;
    o.seed = options.seed * 7919ULL + static_cast<std::uint64_t>(r);
    pool.push_back(evaluate(o));
  }

  const Refit* best = nullptr;
  for (const auto& r : pool) {
    if (!r.report.converged || !passes(r)) continue;
    if (!best || r.obs.energy < best->obs.energy) best = &r;
  }
  if (best) return *best;

  // Nothing passes the magnetization threshold: keep the start from `init`
  // if it converged, otherwise the lowest-energy converged point.
  if (!pool.front().report.converged) {
    for (const auto& r : pool)
      if (r.report.converged && (!best || r.obs.energy < best->obs.energy)) best = &r;
  }
  Refit out = best ? *best : pool.front();
  out.below_delta_m = filter && !passes(out);
  return out;
}

}  // namespace qcavity
