#include "qcavity/symmetric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "maxsum_util.hpp"
#include "qcavity/classical_bp.hpp"

namespace qcavity {

InnerMax parse_inner_max(std::string_view name) {
  if (name == "exhaustive") return InnerMax::Exhaustive;
  if (name == "coordinate") return InnerMax::Coordinate;
  if (name == "convolution") return InnerMax::Convolution;
  throw std::invalid_argument("unknown inner-max strategy '" + std::string(name) + "'");
}

std::string to_string(InnerMax inner) {
  switch (inner) {
    case InnerMax::Exhaustive: return "exhaustive";
    case InnerMax::Coordinate: return "coordinate";
    case InnerMax::Convolution: return "convolution";
  }
  return "?";
}

std::vector<double> CouplingGrid::values() const {
  std::vector<double> out;
  for (int l = -half_count; l <= half_count; ++l) {
    double K = l * step;
    if (cap && std::abs(K) > *cap + 1e-12) continue;
    out.push_back(K);
  }
  return out;
}

std::vector<int> CouplingGrid::tie_break_order() const {
  auto v = values();
  std::vector<int> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(v[a]) != std::abs(v[b])) return std::abs(v[a]) < std::abs(v[b]);
    return v[a] < v[b];
  });
  return order;
}

void CouplingGrid::validate() const {
  if (!(step > 0.0) || half_count < 0) throw std::invalid_argument("coupling grid needs step > 0 and half_count >= 0");
  if (cap && !(*cap >= 0.0)) throw std::invalid_argument("coupling cap must be non-negative");
}

double ss_energy(const QuantumInstance& inst, std::span<const double> K) {
  if (K.size() != inst.edges.size()) throw std::invalid_argument("ss_energy: wrong number of couplings");
  std::vector<double> log_cosh_sum(inst.n, 0.0);
  double e = 0.0;
  for (std::size_t b = 0; b < inst.edges.size(); ++b) {
    const auto& c = inst.edges[b];
    e -= c.J * std::tanh(2.0 * K[b]);
    double lc = log_cosh(2.0 * K[b]);
    log_cosh_sum[c.i] += lc;
    log_cosh_sum[c.j] += lc;
  }
  for (int i = 0; i < inst.n; ++i) e -= inst.fields[i] * std::exp(-log_cosh_sum[i]);
  return e;
}

namespace {

// A partial combination of the other edges: the site term is
// h * weight * exp(-ln cosh 2K_target) with weight = prod 1/cosh(2K_k), and
// value = sum of their messages.
struct Point {
  double weight;
  double value;
};

// The objective is linear in (weight, value) with a non-negative slope on
// weight for every fixed rest of the combination, so only the upper hull over
// slopes in [0, inf) can ever attain the maximum.
std::vector<Point> prune(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return a.value > b.value;
  });
  std::size_t top = 0;
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (pts[k].value > pts[top].value || (pts[k].value == pts[top].value && pts[k].weight >= pts[top].weight)) top = k;
  std::vector<Point> hull;
  for (std::size_t k = top; k < pts.size(); ++k) {
    const Point& c = pts[k];
    if (!hull.empty() && c.weight == hull.back().weight) continue;
    if (!hull.empty() && c.value >= hull.back().value) hull.pop_back();
    while (hull.size() >= 2) {
      const Point& a = hull[hull.size() - 2];
      const Point& b = hull.back();
      if ((b.value - a.value) * (c.weight - a.weight) <= (c.value - a.value) * (b.weight - a.weight))
        hull.pop_back();
      else
        break;
    }
    hull.push_back(c);
  }
  return hull;
}

std::vector<Point> combine(const std::vector<Point>& a, const std::vector<Point>& b) {
  std::vector<Point> sums;
  sums.reserve(a.size() * b.size());
  for (const auto& x : a)
    for (const auto& y : b) sums.push_back({x.weight * y.weight, x.value + y.value});
  return prune(std::move(sums));
}

class SymmetricMaxSum {
 public:
  SymmetricMaxSum(const QuantumInstance& inst, const CouplingGrid& grid, InnerMax inner)
      : inst_(inst), graph_(ClassicalGraph::from_instance(inst)), bond_j_(bond_couplings(inst, graph_)),
        values_(grid.values()), order_(grid.tie_break_order()), inner_(inner) {
    if (values_.empty()) throw std::invalid_argument("coupling grid is empty");
    penalty_.resize(values_.size());
    for (std::size_t l = 0; l < values_.size(); ++l) penalty_[l] = log_cosh(2.0 * values_[l]);
    messages_.assign(graph_.num_directed(), std::vector<double>(values_.size(), 0.0));
  }

  void randomize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& m : messages_) {
      for (auto& x : m) x = dist(rng);
      normalize_max(m);
    }
  }

  double sweep() {
    const int G = static_cast<int>(values_.size());
    auto next = messages_;
    for (int i = 0; i < graph_.num_vertices(); ++i) {
      auto inc = graph_.incident(i);
      for (std::size_t t = 0; t < inc.size(); ++t) {
        auto& out = next[inc[t].out];
        inner_max(i, t, out);
        const double J = bond_j_[inc[t].edge];
        for (int l = 0; l < G; ++l) out[l] += J * std::tanh(2.0 * values_[l]);
        normalize_max(out);
      }
    }
    double change = 0.0;
    for (std::size_t d = 0; d < next.size(); ++d)
      for (int l = 0; l < G; ++l) {
        double a = next[d][l], b = messages_[d][l];
        if (a == b) continue;
        change = std::max(change, std::isfinite(a - b) ? std::abs(a - b) : 1.0);
      }
    messages_.swap(next);
    return change;
  }

  // Per-edge arg-max of w(K) = <e_ij> + M_{i->j}(K) + M_{j->i}(K).
  std::vector<double> extract() const {
    const int G = static_cast<int>(values_.size());
    std::vector<double> w(G);
    std::vector<double> K(graph_.num_edges());
    for (int e = 0; e < graph_.num_edges(); ++e) {
      for (int l = 0; l < G; ++l)
        w[l] = -bond_j_[e] * std::tanh(2.0 * values_[l]) + messages_[2 * e][l] + messages_[2 * e + 1][l];
      K[e] = values_[argmax_with_ties(w, order_)];
    }
    return K;
  }

  // Single-edge moves that strictly lower ss_energy.
  void polish(std::vector<double>& K) const {
    for (int pass = 0; pass < 100; ++pass) {
      bool moved = false;
      for (int e = 0; e < graph_.num_edges(); ++e) {
        double keep = K[e];
        double best_e = ss_energy(inst_, K);
        double best_k = keep;
        for (int l : order_) {
          K[e] = values_[l];
          double v = ss_energy(inst_, K);
          if (v < best_e - 1e-12) {
            best_e = v;
            best_k = values_[l];
          }
        }
        K[e] = best_k;
        moved = moved || best_k != keep;
      }
      if (!moved) break;
    }
  }

 private:
  // out(K_t) = max over the other edges' couplings of
  //   h exp(-lc(2K_t) - sum lc(2K_k)) + sum M_{k->i}(K_k)
  void inner_max(int i, std::size_t t, std::vector<double>& out) const {
    const int G = static_cast<int>(values_.size());
    const double h = inst_.fields[i];
    auto inc = graph_.incident(i);
    if (inner_ == InnerMax::Coordinate && inc.size() > 1) {
      coordinate_max(i, t, out);
      return;
    }
    std::vector<Point> front{{1.0, 0.0}};
    for (std::size_t k = 0; k < inc.size(); ++k) {
      if (k == t) continue;
      const auto& m = messages_[inc[k].in];
      std::vector<Point> pts;
      for (int l = 0; l < G; ++l)
        if (std::isfinite(m[l])) pts.push_back({std::exp(-penalty_[l]), m[l]});
      front = combine(front, prune(std::move(pts)));
    }
    for (int l = 0; l < G; ++l) {
      double best = kNegInf;
      const double scale = h * std::exp(-penalty_[l]);
      for (const auto& p : front) best = std::max(best, scale * p.weight + p.value);
      out[l] = best;
    }
  }

  void coordinate_max(int i, std::size_t t, std::vector<double>& out) const {
    const int G = static_cast<int>(values_.size());
    const double h = inst_.fields[i];
    auto inc = graph_.incident(i);
    std::vector<std::size_t> others;
    for (std::size_t k = 0; k < inc.size(); ++k)
      if (k != t) others.push_back(k);
    for (int lt = 0; lt < G; ++lt) {
      std::vector<int> pick(others.size());
      for (std::size_t a = 0; a < others.size(); ++a) {
        const auto& m = messages_[inc[others[a]].in];
        pick[a] = static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
      }
      auto objective = [&] {
        double pen = penalty_[lt], val = 0.0;
        for (std::size_t a = 0; a < others.size(); ++a) {
          pen += penalty_[pick[a]];
          val += messages_[inc[others[a]].in][pick[a]];
        }
        return h * std::exp(-pen) + val;
      };
      double current = objective();
      for (int round = 0; round < 10; ++round) {
        bool moved = false;
        for (std::size_t a = 0; a < others.size(); ++a) {
          int keep = pick[a];
          for (int l = 0; l < G; ++l) {
            pick[a] = l;
            double v = objective();
            if (v > current + kTieTolerance) {
              current = v;
              keep = l;
              moved = true;
            }
          }
          pick[a] = keep;
        }
        if (!moved) break;
      }
      out[lt] = current;
    }
  }

  const QuantumInstance& inst_;
  ClassicalGraph graph_;
  std::vector<double> bond_j_;
  std::vector<double> values_;
  std::vector<int> order_;
  std::vector<double> penalty_;
  InnerMax inner_;
  std::vector<std::vector<double>> messages_;
};

}  // namespace

SSResult ss_maxsum_solve(const QuantumInstance& inst, const CouplingGrid& grid, int max_iters,
                         std::uint64_t seed, InnerMax inner) {
  validate(inst);
  grid.validate();
  if (inner == InnerMax::Convolution)
    throw std::invalid_argument("the convolution inner maximum applies to the general solver only");
  SymmetricMaxSum solver(inst, grid, inner);
  solver.randomize(seed);

  SSResult best;
  best.energy = std::numeric_limits<double>::infinity();
  const bool forest = ClassicalGraph::from_instance(inst).is_forest();
  const int iters = std::max(1, max_iters);
  for (int it = 1; it <= iters; ++it) {
    double change = solver.sweep();
    best.iterations = it;
    bool done = change <= 1e-10;
    if (!forest || done || it == iters) {
      auto K = solver.extract();
      double e = ss_energy(inst, K);
      if (e < best.energy) {
        best.energy = e;
        best.K = std::move(K);
      }
    }
    if (done) {
      best.converged = true;
      break;
    }
  }
  solver.polish(best.K);
  best.energy = ss_energy(inst, best.K);
  return best;
}

}  // namespace qcavity
