#include "qcavity/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>

#include "qcavity/classical_bp.hpp"
#include "maxsum_util.hpp"

namespace qcavity {

std::vector<int> FieldGrid::tie_break_order() const {
  std::vector<int> order;
  order.reserve(size());
  order.push_back(half_count);
  for (int l = 1; l <= half_count; ++l) {
    order.push_back(half_count - l);
    order.push_back(half_count + l);
  }
  return order;
}

void FieldGrid::validate() const {
  if (!(step > 0.0) || half_count < 0) throw std::invalid_argument("field grid needs step > 0 and half_count >= 0");
}

double mf_energy(const QuantumInstance& inst, std::span<const double> B) {
  if (static_cast<int>(B.size()) != inst.n) throw std::invalid_argument("mf_energy: wrong number of fields");
  double e = 0.0;
  for (const auto& c : inst.edges) e -= c.J * std::tanh(2.0 * B[c.i]) * std::tanh(2.0 * B[c.j]);
  for (int i = 0; i < inst.n; ++i) e -= inst.fields[i] / std::cosh(2.0 * B[i]);
  return e;
}

namespace {

class MeanFieldMaxSum {
 public:
  MeanFieldMaxSum(const QuantumInstance& inst, const FieldGrid& grid)
      : graph_(ClassicalGraph::from_instance(inst)), grid_(grid),
        bond_j_(bond_couplings(inst, graph_)), order_(grid.tie_break_order()) {
    const int G = grid.size();
    t_.resize(G);
    site_.resize(static_cast<std::size_t>(inst.n) * G);
    for (int l = 0; l < G; ++l) t_[l] = std::tanh(2.0 * grid.value(l));
    for (int i = 0; i < inst.n; ++i)
      for (int l = 0; l < G; ++l) site_[idx(i, l)] = inst.fields[i] / std::cosh(2.0 * grid.value(l));
    messages_.assign(graph_.num_directed(), std::vector<double>(G, 0.0));
    projected_ = messages_;
  }

  void randomize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& m : messages_) {
      for (auto& x : m) x = dist(rng);
      normalize_max(m);
    }
  }

  // One synchronous sweep; returns the largest change of any message entry.
  double sweep() {
    const int G = grid_.size();
    for (int d = 0; d < graph_.num_directed(); ++d) project(d);
    double change = 0.0;
    std::vector<double> next(G);
    for (int i = 0; i < graph_.num_vertices(); ++i) {
      auto inc = graph_.incident(i);
      for (const auto& target : inc) {
        for (int l = 0; l < G; ++l) next[l] = site_[idx(i, l)];
        for (const auto& other : inc) {
          if (other.edge == target.edge) continue;
          const auto& p = projected_[other.in];
          for (int l = 0; l < G; ++l) next[l] += p[l];
        }
        normalize_max(next);
        auto& m = messages_[target.out];
        for (int l = 0; l < G; ++l) change = std::max(change, std::abs(next[l] - m[l]));
        m.swap(next);
      }
    }
    return change;
  }

  // Conditioned arg-max along a BFS order of each component.
  std::vector<double> extract() {
    const int n = graph_.num_vertices();
    const int G = grid_.size();
    for (int d = 0; d < graph_.num_directed(); ++d) project(d);
    std::vector<int> choice(n, -1);
    std::vector<double> belief(G);
    for (int root = 0; root < n; ++root) {
      if (choice[root] >= 0) continue;
      std::deque<int> queue{root};
      std::vector<char> queued(n, 0);
      queued[root] = 1;
      while (!queue.empty()) {
        int i = queue.front();
        queue.pop_front();
        for (int l = 0; l < G; ++l) belief[l] = site_[idx(i, l)];
        for (const auto& inc : graph_.incident(i)) {
          int k = inc.neighbor;
          if (choice[k] >= 0) {
            double a = bond_j_[inc.edge] * t_[choice[k]];
            for (int l = 0; l < G; ++l) belief[l] += a * t_[l];
          } else {
            const auto& p = projected_[inc.in];
            for (int l = 0; l < G; ++l) belief[l] += p[l];
          }
        }
        choice[i] = argmax_with_ties(belief, order_);
        for (const auto& inc : graph_.incident(i)) {
          if (choice[inc.neighbor] < 0 && !queued[inc.neighbor]) {
            queued[inc.neighbor] = 1;
            queue.push_back(inc.neighbor);
          }
        }
      }
    }
    std::vector<double> B(n);
    for (int i = 0; i < n; ++i) B[i] = grid_.value(choice[i]);
    return B;
  }

  // Single-spin grid moves that strictly lower the energy, until none is left.
  void polish(std::vector<double>& B) const {
    const int G = grid_.size();
    std::vector<int> choice(B.size());
    for (std::size_t i = 0; i < B.size(); ++i)
      choice[i] = static_cast<int>(std::lround(B[i] / grid_.step)) + grid_.half_count;
    std::vector<double> gain(G);
    for (int pass = 0; pass < 100; ++pass) {
      bool moved = false;
      for (int i = 0; i < graph_.num_vertices(); ++i) {
        for (int l = 0; l < G; ++l) gain[l] = site_[idx(i, l)];
        for (const auto& inc : graph_.incident(i)) {
          double a = bond_j_[inc.edge] * t_[choice[inc.neighbor]];
          for (int l = 0; l < G; ++l) gain[l] += a * t_[l];
        }
        int best = choice[i];
        for (int l : order_)
          if (gain[l] > gain[best] + 1e-12) best = l;
        if (best != choice[i]) {
          choice[i] = best;
          moved = true;
        }
      }
      if (!moved) break;
    }
    for (std::size_t i = 0; i < B.size(); ++i) B[i] = grid_.value(choice[i]);
  }

 private:
  std::size_t idx(int i, int l) const { return static_cast<std::size_t>(i) * grid_.size() + l; }

  // projected_[k->i](l_i) = max_{l_k} { J t(l_i) t(l_k) + M_{k->i}(l_k) }, read
  // off the upper convex hull of the points (t(l_k), M(l_k)); t is increasing
  // in l, so the optimal hull vertex moves monotonically with the slope J t(l_i).
  void project(int d) {
    const int G = grid_.size();
    const double J = bond_j_[d / 2];
    const auto& m = messages_[d];
    auto& p = projected_[d];
    hull_.clear();
    for (int l = 0; l < G; ++l) {
      if (!std::isfinite(m[l])) continue;
      while (hull_.size() >= 2) {
        int a = hull_[hull_.size() - 2], b = hull_.back();
        // b lies on or below the chord a-l
        if ((m[b] - m[a]) * (t_[l] - t_[a]) <= (m[l] - m[a]) * (t_[b] - t_[a]))
          hull_.pop_back();
        else
          break;
      }
      hull_.push_back(l);
    }
    if (hull_.empty()) {
      std::fill(p.begin(), p.end(), -std::numeric_limits<double>::infinity());
      return;
    }
    auto value = [&](std::size_t h, double slope) { return slope * t_[hull_[h]] + m[hull_[h]]; };
    std::size_t h = 0;
    for (int step = 0; step < G; ++step) {
      const int li = J >= 0.0 ? step : G - 1 - step;  // increasing slope J t(l_i)
      const double slope = J * t_[li];
      while (h + 1 < hull_.size() && value(h + 1, slope) >= value(h, slope)) ++h;
      p[li] = value(h, slope);
    }
  }

  ClassicalGraph graph_;
  FieldGrid grid_;
  std::vector<double> bond_j_;
  std::vector<int> order_;
  std::vector<double> t_;
  std::vector<double> site_;
  std::vector<std::vector<double>> messages_;
  std::vector<std::vector<double>> projected_;
  std::vector<int> hull_;
};

}  // namespace

MFResult mf_maxsum_solve(const QuantumInstance& inst, const FieldGrid& grid, int max_iters,
                         std::uint64_t seed) {
  validate(inst);
  grid.validate();
  MeanFieldMaxSum solver(inst, grid);
  solver.randomize(seed);

  MFResult best;
  best.energy = std::numeric_limits<double>::infinity();
  const bool forest = ClassicalGraph::from_instance(inst).is_forest();
  const int iters = std::max(1, max_iters);
  for (int it = 1; it <= iters; ++it) {
    double change = solver.sweep();
    best.iterations = it;
    bool done = change <= 1e-10;
    // Trees: the converged messages are exact, read once at the end.
    if (!forest || done || it == iters) {
      auto B = solver.extract();
      double e = mf_energy(inst, B);
      if (e < best.energy) {
        best.energy = e;
        best.B = std::move(B);
      }
    }
    if (done) {
      best.converged = true;
      break;
    }
  }
  solver.polish(best.B);
  best.energy = mf_energy(inst, best.B);
  return best;
}

}  // namespace qcavity
