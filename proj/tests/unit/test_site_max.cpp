#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "qcavity/site_max.hpp"

using namespace qcavity;

namespace {

double direct_site(double h, double B, double lyp, double lym) {
  return 2.0 * h / (std::exp(2.0 * B + lyp) + std::exp(-2.0 * B + lym));
}

bool same(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol;
}

}  // namespace

TEST_CASE("best site field scans the admissible window") {
  const double offsets[] = {0.41, 0.38, 0.45};
  auto c = best_site_field(offsets, 0.1, 0.0, 0.0, 1.0, 0.05, 60);
  REQUIRE(c.feasible);
  // 2B = 0.1 l must lie in [0.35, 0.48], leaving l = 4 only.
  CHECK(c.index == 4);
  CHECK(c.value == doctest::Approx(direct_site(1.0, 0.2, 0.0, 0.0)).epsilon(1e-14));
}

TEST_CASE("best site field matches a full scan") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> o(-3.0, 3.0), ly(-2.0, 2.0), hh(0.0, 2.0);
  for (int trial = 0; trial < 3000; ++trial) {
    const double base = o(rng);
    std::vector<double> offsets{base, base + 0.2 * ly(rng) / 2.0, base + 0.1 * ly(rng)};
    const double lyp = ly(rng), lym = ly(rng), h = trial % 7 == 0 ? 0.0 : hh(rng), tol = 0.15;
    auto c = best_site_field(offsets, tol, lyp, lym, h, 0.05, 30);
    double best = -oracle::kInf;
    int best_l = 0;
    // Preference order 0, -1, 1, -2, 2, ...; a later index must win by more than the tie tolerance.
    for (int r = 0; r <= 60; ++r) {
      const int l = r % 2 ? -(r + 1) / 2 : r / 2;
      bool ok = true;
      for (double x : offsets) ok = ok && std::abs(x - 0.1 * l) <= tol;
      if (!ok) continue;
      const double v = h == 0.0 ? 0.0 : direct_site(h, 0.05 * l, lyp, lym);
      if (v > best + 1e-12) {
        best = v;
        best_l = l;
      }
    }
    CHECK(c.feasible == std::isfinite(best));
    if (c.feasible && std::isfinite(best)) {
      CHECK(c.value == doctest::Approx(best).epsilon(1e-12));
      CHECK(c.index == best_l);
    }
  }
}

TEST_CASE("degree-one site evaluates the site term directly") {
  SiteProblem site;
  site.h = 0.7;
  site.b_step = 0.05;
  site.b_half = 40;
  site.tolerance = 0.06;
  std::vector<OrientedState> targets{{0.3, 0.4, 0.5}, {-0.2, 0.1, 4.5}, {0.0, 0.0, -0.3}};
  auto out = exhaustive_inner_max(site, targets);
  auto ref = oracle::site_inner_max(site, targets);
  for (std::size_t t = 0; t < targets.size(); ++t) CHECK(same(out[t], ref[t], 1e-12));
  CHECK(std::isinf(out[1]));  // 2B would need to exceed the grid
  const auto grids = default_convolution_grids(0.05, 40, 4, 1.0, 1);
  auto conv = convolution_inner_max(site, targets, grids);
  auto rounded = oracle::site_inner_max(site, targets, grids.x_step, grids.y_step);
  for (std::size_t t = 0; t < targets.size(); ++t) CHECK(same(conv[t], rounded[t], 1e-12));
}

TEST_CASE("property: exhaustive inner max equals brute force") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto [site, targets] = oracle::random_site(rng, 1 + trial % 3, 4);
    auto out = exhaustive_inner_max(site, targets);
    auto ref = oracle::site_inner_max(site, targets);
    for (std::size_t t = 0; t < targets.size(); ++t) CHECK(same(out[t], ref[t], 1e-12));
  }
}

TEST_CASE("property: convolution equals brute force on rounded increments") {
  std::mt19937_64 rng(123);
  int finite = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto [site, targets] = oracle::random_site(rng, 1 + trial % 3, 4);
    auto grids = default_convolution_grids(site.b_step, site.b_half, 4, 0.5, static_cast<int>(site.others.size()) + 1);
    auto out = convolution_inner_max(site, targets, grids);
    auto ref = oracle::site_inner_max(site, targets, grids.x_step, grids.y_step);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      CHECK(same(out[t], ref[t], 1e-12));
      finite += std::isfinite(ref[t]);
    }
  }
  CHECK(finite > 30);
}

TEST_CASE("all-zero couplings reduce to the product-state message") {
  SiteProblem site;
  site.h = 1.3;
  site.b_step = 0.1;
  site.b_half = 10;
  site.tolerance = 0.01;
  // K = 0: nothing propagates, so nu_out = 2B on every edge.
  for (int k = 0; k < 2; ++k) {
    SiteEdge e;
    for (int l = -3; l <= 3; ++l) {
      e.states.push_back({0.0, 0.1 * l, 0.4});
      e.messages.push_back(-0.05 * l * l);
    }
    site.others.push_back(e);
  }
  std::vector<OrientedState> targets{{0.0, 0.7, 0.4}, {0.0, -0.2, 0.6}};
  auto grids = default_convolution_grids(0.1, 10, 2, 0.5, 3);
  auto conv = convolution_inner_max(site, targets, grids);
  CHECK(conv[0] == doctest::Approx(1.3 / std::cosh(0.4)).epsilon(1e-12));
  CHECK(std::isinf(conv[1]));
  auto ex = exhaustive_inner_max(site, targets);
  CHECK(ex[0] == doctest::Approx(conv[0]).epsilon(1e-12));
}

TEST_CASE("grid overflow names the offending edge") {
  SiteProblem site;
  site.h = 1.0;
  site.b_step = 0.1;
  site.b_half = 5;
  site.tolerance = 0.1;
  SiteEdge e;
  e.states.push_back({2.0, 5.0, 0.0});
  e.messages.push_back(0.0);
  site.others.push_back(e);
  std::vector<OrientedState> targets{{0.0, 0.0, 0.0}};
  ConvolutionGrids tight{0.05, 10, 0.1, 40};
  try {
    convolution_inner_max(site, targets, tight);
    FAIL("expected GridOverflow");
  } catch (const GridOverflow& err) {
    CHECK(std::string(err.what()).find("incident edge 0") != std::string::npos);
  }
  CHECK_THROWS_AS(convolution_inner_max(site, targets, ConvolutionGrids{0.03, 100, 0.1, 40}), std::invalid_argument);
}
