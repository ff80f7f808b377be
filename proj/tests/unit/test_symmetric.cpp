#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "qcavity/symmetric.hpp"

using namespace qcavity;

namespace {
QuantumInstance bond(double J, double h) { return QuantumInstance{2, {{0, 1, J}}, {h, h}, 0, {}}; }
}  // namespace

TEST_CASE("ss_energy closed forms") {
  auto b = bond(1.0, 0.5);
  const double K = 0.5 * std::asinh(1.0);  // sinh(2K) = J / (2h)
  CHECK(ss_energy(b, std::vector<double>{K}) == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-14));
  double grid_min = 0.0;
  for (int l = -4000; l <= 4000; ++l) grid_min = std::min(grid_min, ss_energy(b, std::vector<double>{l * 5e-4}));
  CHECK(grid_min == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-6));

  auto chain = generate_chain(5, CouplingLaw::Gaussian, 0.3, 2);
  CHECK(ss_energy(chain, std::vector<double>(4, 0.0)) == doctest::Approx(-1.5));
  auto zero = with_uniform_field(chain, 0.0);
  std::vector<double> big;
  for (const auto& c : zero.edges) big.push_back(c.J > 0 ? 30.0 : -30.0);
  CHECK(ss_energy(zero, big) == doctest::Approx(-total_abs_coupling(zero)).epsilon(1e-12));
}

TEST_CASE("single bond reaches the two-spin ground energy") {
  auto r = ss_maxsum_solve(bond(1.0, 0.5), CouplingGrid{0.005, 400, std::nullopt});
  CHECK(std::abs(r.K[0] - 0.5 * std::asinh(1.0)) <= 0.005);
  CHECK(std::abs(r.energy + std::sqrt(2.0)) < 1e-4);
  CHECK(r.converged);
}

TEST_CASE("four-spin ferromagnetic chain equals the grid dynamic program") {
  auto inst = generate_chain(4, CouplingLaw::Ferro, 0.2, 0);
  auto r = ss_maxsum_solve(inst);
  CHECK(std::abs(r.energy - oracle::chain_ss_optimum(inst, 0.01, 200)) < 1e-12);
}

TEST_CASE("zero field saturates every coupling with the sign of J") {
  auto inst = generate_chain(7, CouplingLaw::Gaussian, 0.0, 5);
  auto r = ss_maxsum_solve(inst);
  for (std::size_t e = 0; e < inst.edges.size(); ++e) CHECK(r.K[e] == doctest::Approx(inst.edges[e].J > 0 ? 2.0 : -2.0));
  CHECK(std::abs(r.energy + total_abs_coupling(inst)) <= 1e-3 * total_abs_coupling(inst));
}

TEST_CASE("property: chains up to eight spins equal the dynamic program") {
  for (std::uint64_t seed = 0; seed < 14; ++seed) {
    const int n = 2 + static_cast<int>(seed % 7);
    auto inst = generate_chain(n, CouplingLaw::Gaussian, 0.15 + 0.2 * static_cast<double>(seed), seed);
    auto r = ss_maxsum_solve(inst, CouplingGrid{0.02, 100, std::nullopt}, 1000, seed);
    CHECK(std::abs(r.energy - oracle::chain_ss_optimum(inst, 0.02, 100)) < 1e-12);
  }
}

TEST_CASE("property: the coupling cap is respected and matches the capped optimum") {
  auto inst = generate_chain(6, CouplingLaw::Gaussian, 0.1, 3);
  auto r = ss_maxsum_solve(inst, CouplingGrid{0.01, 200, 1.0});
  for (double K : r.K) CHECK(std::abs(K) <= 1.0 + 1e-12);
  CHECK(std::abs(r.energy - oracle::chain_ss_optimum(inst, 0.01, 200, 1.0)) < 1e-12);
}

TEST_CASE("property: never worse than the trivial point") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto inst = generate_rrg(12, 3, CouplingLaw::Gaussian, 0.4 + 0.3 * static_cast<double>(seed), seed);
    auto r = ss_maxsum_solve(inst, CouplingGrid{0.01, 200, 1.0}, 1000, seed);
    CHECK(r.energy <= -total_field(inst) + 1e-12);
    CHECK(r.energy == doctest::Approx(ss_energy(inst, r.K)).epsilon(1e-14));
  }
}

TEST_CASE("exhaustive and coordinate inner maxima agree on a chain") {
  auto inst = generate_chain(6, CouplingLaw::Gaussian, 0.5, 8);
  auto a = ss_maxsum_solve(inst, {}, 1000, 0, InnerMax::Exhaustive);
  auto b = ss_maxsum_solve(inst, {}, 1000, 0, InnerMax::Coordinate);
  CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-12));
}

TEST_CASE("grid values and tie order") {
  CouplingGrid g{0.5, 2, 0.6};
  CHECK(g.values() == std::vector<double>{-0.5, 0.0, 0.5});
  CHECK(g.tie_break_order() == std::vector<int>{1, 0, 2});
  CHECK(parse_inner_max("coordinate") == InnerMax::Coordinate);
  CHECK_THROWS(parse_inner_max("bogus"));
}
