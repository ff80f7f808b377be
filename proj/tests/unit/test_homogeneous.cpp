#include <doctest.h>

#include <cmath>

#include "qcavity/classical_bp.hpp"
#include "qcavity/homogeneous.hpp"

using namespace qcavity;

TEST_CASE("uniform fixed points") {
  CHECK(homog_fixed_point(0.0, 0.1, 3) == doctest::Approx(0.0));
  CHECK(homog_fixed_point(0.3, 0.0, 3) == doctest::Approx(0.6).epsilon(1e-12));
  // Bethe instability of the symmetric point: (d - 1) tanh(2K) > 1.
  const double Kc = 0.25 * std::log(3.0);
  CHECK(homog_fixed_point(0.0, Kc - 0.02, 3) == doctest::Approx(0.0));
  CHECK(homog_fixed_point(0.0, Kc + 0.02, 3) > 1e-3);
}

TEST_CASE("property: every branch solves the scalar equation") {
  for (double B : {0.0, 0.05, 0.4, -0.3})
    for (double K : {-0.4, 0.0, 0.2, 0.3, 0.8, 1.5})
      for (int d : {2, 3, 4})
        for (double nu : homog_branches(B, K, d))
          CHECK(std::abs(2.0 * B + (d - 1) * cavity_shift(nu, K) - nu) <= 1e-12);
}

TEST_CASE("energy closed forms at d = 3") {
  CHECK(homog_energy(0.0, 0.0, 3, 1.0).energy == doctest::Approx(-1.0));
  for (double K : {0.05, 0.15, 0.25}) {
    const double expected = -1.5 * std::tanh(2.0 * K) - 0.7 / std::pow(std::cosh(2.0 * K), 3);
    CHECK(homog_energy(0.0, K, 3, 0.7).energy == doctest::Approx(expected).epsilon(1e-12));
  }
  for (double B : {0.1, 0.6}) {
    const double t = std::tanh(2.0 * B);
    CHECK(homog_energy(B, 0.0, 3, 0.8).energy == doctest::Approx(-1.5 * t * t - 0.8 / std::cosh(2.0 * B)).epsilon(1e-12));
  }
  CHECK(homog_energy(12.0, 0.0, 3, 0.0).energy == doctest::Approx(-1.5).epsilon(1e-10));
}

TEST_CASE("critical fields of the scans") {
  auto scan = homog_scan(3, 0.0, 4.0, 0.05);
  REQUIRE(scan.ising.h_c);
  REQUIRE(scan.mean_field.h_c);
  CHECK(*scan.ising.h_c >= 2.24);
  CHECK(*scan.ising.h_c <= 2.34);
  CHECK(std::abs(*scan.mean_field.h_c - 3.0) <= 0.01);
}

TEST_CASE("property: magnetization is nonincreasing and vanishes above h_c") {
  auto scan = homog_scan(3, 0.0, 4.0, 0.01, HomogGrid{0.02, 3.0, 0.02, -0.5, 2.0});
  for (const auto* curve : {&scan.ising, &scan.mean_field}) {
    REQUIRE(curve->h_c);
    for (std::size_t r = 1; r < curve->rows.size(); ++r)
      CHECK(curve->rows[r].point.m_z <= curve->rows[r - 1].point.m_z + 1e-9);
    for (const auto& row : curve->rows)
      if (row.h > *curve->h_c + 0.01) CHECK(row.point.m_z == 0.0);
  }
}

TEST_CASE("property: energy is continuous except at most at one point") {
  auto scan = homog_scan(3, 0.0, 4.0, 0.01, HomogGrid{0.02, 3.0, 0.02, -0.5, 2.0});
  int jumps = 0;
  for (std::size_t r = 1; r < scan.ising.rows.size(); ++r)
    jumps += std::abs(scan.ising.rows[r].point.energy - scan.ising.rows[r - 1].point.energy) > 0.02;
  CHECK(jumps <= 1);
  // Energy decreases with h: the site term is -h m_x with m_x >= 0.
  for (std::size_t r = 1; r < scan.ising.rows.size(); ++r)
    CHECK(scan.ising.rows[r].point.energy <= scan.ising.rows[r - 1].point.energy + 1e-12);
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS(homog_branches(0.0, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(homog_scan(3, 1.0, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(homog_scan(3, 0.0, 1.0, 0.0), std::invalid_argument);
}
