#include "qcavity/exact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace qcavity {

namespace {

void check_size(const QuantumInstance& inst, int limit) {
  if (inst.n > limit)
    throw SizeError("exact solver supports at most " + std::to_string(limit) + " spins, got " +
                    std::to_string(inst.n));
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void scale(std::vector<double>& v, double s) {
  for (auto& x : v) x *= s;
}

}  // namespace

double diagonal_energy(const QuantumInstance& inst, std::uint64_t sigma) {
  double e = 0.0;
  for (const auto& c : inst.edges) e -= c.J * spin_of(sigma, c.i) * spin_of(sigma, c.j);
  return e;
}

namespace {

std::vector<double> diagonal(const QuantumInstance& inst) {
  const std::size_t N = std::size_t{1} << inst.n;
  std::vector<double> diag(N, 0.0);
  for (const auto& c : inst.edges) {
    const std::size_t i = c.i, j = c.j;
    for (std::size_t s = 0; s < N; ++s) diag[s] -= (((s >> i) ^ (s >> j)) & 1U) ? -c.J : c.J;
  }
  return diag;
}

void apply_with(const QuantumInstance& inst, const std::vector<double>& diag, std::span<const double> v,
                std::span<double> w) {
  const std::size_t N = diag.size();
  for (std::size_t s = 0; s < N; ++s) w[s] = diag[s] * v[s];
  for (int i = 0; i < inst.n; ++i) {
    const double h = inst.fields[i];
    if (h == 0.0) continue;
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t base = 0; base < N; base += 2 * bit) {
      double* lo = &w[base];
      double* hi = &w[base + bit];
      const double* vlo = &v[base];
      const double* vhi = &v[base + bit];
      for (std::size_t k = 0; k < bit; ++k) {
        lo[k] -= h * vhi[k];
        hi[k] -= h * vlo[k];
      }
    }
  }
}

}  // namespace

void apply_h(const QuantumInstance& inst, std::span<const double> v, std::span<double> w) {
  check_size(inst, kMaxExactSpins);
  const std::size_t N = std::size_t{1} << inst.n;
  if (v.size() != N || w.size() != N) throw std::invalid_argument("apply_h: vector size must be 2^n");
  if (v.data() == w.data()) throw std::invalid_argument("apply_h: input and output must not alias");
  apply_with(inst, diagonal(inst), v, w);
}

std::vector<double> apply_h(const QuantumInstance& inst, std::span<const double> v) {
  std::vector<double> w(v.size());
  apply_h(inst, v, w);
  return w;
}

double expectation(const QuantumInstance& inst, std::span<const double> v) {
  auto w = apply_h(inst, v);
  return dot(v, w) / dot(v, v);
}

ExactResult ground_state(const QuantumInstance& inst, const ExactOptions& options) {
  validate(inst);
  check_size(inst, kMaxExactSpins);
  if (options.krylov_dim < 2) throw std::invalid_argument("krylov_dim must be at least 2");
  const std::size_t N = std::size_t{1} << inst.n;
  const std::size_t mask = N - 1;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.5, 1.5);

  ExactResult res;
  // Positive start, symmetric under the global flip so it stays in the even sector.
  auto fresh_start = [&] {
    std::vector<double> r(N), v(N);
    for (auto& x : r) x = unit(rng);
    for (std::size_t s = 0; s < N; ++s) v[s] = r[s] + r[~s & mask];
    scale(v, 1.0 / std::sqrt(dot(v, v)));
    return v;
  };
  std::vector<double> x = fresh_start();
  std::vector<double> q(N), q_prev(N), w(N);
  const std::vector<double> diag = diagonal(inst);
  double theta_old = std::numeric_limits<double>::infinity();
  int reseeds = 0;

  for (int restart = 0; restart < options.max_iters; ++restart) {
    res.iterations = restart + 1;
    // First pass: recurrence coefficients only.
    std::vector<double> alpha, beta;
    q = x;
    std::fill(q_prev.begin(), q_prev.end(), 0.0);
    double b_prev = 0.0, b_last = 0.0;
    for (int j = 0; j < options.krylov_dim; ++j) {
      apply_with(inst, diag, q, w);
      ++res.matvecs;
      double a = dot(w, q);
      for (std::size_t s = 0; s < N; ++s) w[s] -= a * q[s] + b_prev * q_prev[s];
      alpha.push_back(a);
      b_last = std::sqrt(dot(w, w));
      if (j + 1 == options.krylov_dim || b_last <= 1e-13 * std::max(1.0, std::abs(a))) break;
      beta.push_back(b_last);
      q_prev.swap(q);
      for (std::size_t s = 0; s < N; ++s) q[s] = w[s] / b_last;
      b_prev = b_last;
    }
    const int k = static_cast<int>(alpha.size());
    if (k == 1 && restart == 0 && reseeds < options.max_reseeds && inst.n > 0) {
      // The start vector is already an eigenvector; it may not be the lowest.
      ++reseeds;
      --restart;
      x = fresh_start();
      continue;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) T(j, j) = alpha[j];
    for (int j = 0; j + 1 < k; ++j) T(j, j + 1) = T(j + 1, j) = beta[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(T);
    const double theta = eig.eigenvalues()(0);
    Eigen::VectorXd y = eig.eigenvectors().col(0);

    // Second pass: rebuild the Ritz vector from the same recurrence.
    std::vector<double> next(N, 0.0);
    q = x;
    std::fill(q_prev.begin(), q_prev.end(), 0.0);
    for (int j = 0; j < k; ++j) {
      for (std::size_t s = 0; s < N; ++s) next[s] += y(j) * q[s];
      if (j + 1 == k) break;
      apply_with(inst, diag, q, w);
      ++res.matvecs;
      const double bp = j > 0 ? beta[j - 1] : 0.0;
      for (std::size_t s = 0; s < N; ++s) w[s] = (w[s] - alpha[j] * q[s] - bp * q_prev[s]) / beta[j];
      q_prev.swap(q);
      q.swap(w);
    }
    scale(next, 1.0 / std::sqrt(dot(next, next)));
    x.swap(next);

    const bool exact_subspace = k < options.krylov_dim;
    if (exact_subspace || std::abs(theta - theta_old) < options.tolerance * std::max(1.0, std::abs(theta))) {
      res.converged = true;
      break;
    }
    theta_old = theta;
  }

  res.energy = expectation(inst, x);
  res.sigma_x.assign(inst.n, 0.0);
  res.sigma_z.assign(inst.n, 0.0);
  bool any_field = false;
  for (int i = 0; i < inst.n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double sx = 0.0, sz = 0.0;
    for (std::size_t s = 0; s < N; ++s) {
      sx += x[s] * x[s ^ bit];
      sz += x[s] * x[s] * spin_of(s, i);
    }
    res.sigma_x[i] = sx;
    res.sigma_z[i] = sz;
    any_field = any_field || inst.fields[i] > 0.0;
  }
  if (any_field && inst.n > 0)
    res.m_x = std::accumulate(res.sigma_x.begin(), res.sigma_x.end(), 0.0) / inst.n;
  res.vector = std::move(x);
  return res;
}

Eigen::MatrixXd dense_hamiltonian(const QuantumInstance& inst) {
  validate(inst);
  check_size(inst, kMaxDenseSpins);
  const std::size_t N = std::size_t{1} << inst.n;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t s = 0; s < N; ++s) {
    H(s, s) = diagonal_energy(inst, s);
    for (int i = 0; i < inst.n; ++i) H(s ^ (std::size_t{1} << i), s) -= inst.fields[i];
  }
  return H;
}

double dense_ground_energy(const QuantumInstance& inst) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense_hamiltonian(inst), Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

std::vector<double> ansatz_state(const ClassicalGraph& graph, const ParameterSet& params) {
  const int n = graph.num_vertices();
  if (n > kMaxExactSpins) throw SizeError("ansatz enumeration supports at most 24 spins");
  if (static_cast<int>(params.B.size()) != n || static_cast<int>(params.K.size()) != graph.num_edges())
    throw std::invalid_argument("parameter set does not match the graph");
  const std::size_t N = std::size_t{1} << n;
  std::vector<double> logs(N);
  for (std::size_t s = 0; s < N; ++s) {
    double l = 0.0;
    for (int i = 0; i < n; ++i) l += params.B[i] * spin_of(s, i);
    for (int e = 0; e < graph.num_edges(); ++e) {
      auto [a, b] = graph.edge(e);
      l += params.K[e] * spin_of(s, a) * spin_of(s, b);
    }
    logs[s] = l;
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> a(N);
  for (std::size_t s = 0; s < N; ++s) a[s] = std::exp(logs[s] - top);
  scale(a, 1.0 / std::sqrt(dot(a, a)));
  return a;
}

}  // namespace qcavity
