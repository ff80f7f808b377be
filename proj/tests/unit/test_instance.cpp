#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "qcavity/instance.hpp"

using namespace qcavity;

TEST_CASE("ferromagnetic chain is deterministic") {
  auto inst = generate_chain(3, CouplingLaw::Ferro, 0.0, 1);
  REQUIRE(inst.n == 3);
  CHECK(inst.edges == std::vector<Coupling>{{0, 1, 1.0}, {1, 2, 1.0}});
  CHECK(inst.fields == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(inst.seed == 1);
}

TEST_CASE("gaussian chain couplings are centred") {
  auto inst = generate_chain(20, CouplingLaw::Gaussian, 1.0, 7);
  REQUIRE(inst.edges.size() == 19);
  double mean = 0.0;
  for (const auto& c : inst.edges) mean += c.J;
  mean /= 19.0;
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(19.0));
  for (double h : inst.fields) CHECK(h == 1.0);
}

TEST_CASE("pm_one couplings take both signs only") {
  auto inst = generate_chain(200, CouplingLaw::PlusMinusOne, 0.5, 3);
  std::set<double> values;
  for (const auto& c : inst.edges) values.insert(c.J);
  CHECK(values == std::set<double>{-1.0, 1.0});
}

TEST_CASE("chain rejects bad sizes and fields") {
  CHECK_THROWS_AS(generate_chain(1, CouplingLaw::Ferro, 1.0, 0), InstanceError);
  CHECK_THROWS_AS(generate_chain(4, CouplingLaw::Ferro, -1.0, 0), InstanceError);
}

TEST_CASE("random regular graphs are simple and regular") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto inst = generate_rrg(20, 3, CouplingLaw::Gaussian, 1.0, seed);
    CHECK_NOTHROW(validate(inst));
    auto g = ClassicalGraph::from_instance(inst);
    for (int v = 0; v < 20; ++v) CHECK(g.degree(v) == 3);
    CHECK(inst.edges.size() == 30);
  }
}

TEST_CASE("the only cubic graph on four vertices is K4") {
  auto inst = generate_rrg(4, 3, CouplingLaw::Ferro, 0.0, 0);
  std::set<std::pair<int, int>> pairs;
  for (const auto& c : inst.edges) pairs.insert({std::min(c.i, c.j), std::max(c.i, c.j)});
  CHECK(pairs == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
}

TEST_CASE("odd n*d is refused") {
  CHECK_THROWS_AS(generate_rrg(5, 3, CouplingLaw::Ferro, 0.0, 0), InstanceError);
  CHECK_THROWS_AS(generate_rrg(4, 4, CouplingLaw::Ferro, 0.0, 0), InstanceError);
}

TEST_CASE("generators are pure functions of their arguments") {
  CHECK(generate_chain(30, CouplingLaw::Gaussian, 0.7, 9) == generate_chain(30, CouplingLaw::Gaussian, 0.7, 9));
  CHECK(generate_rrg(40, 3, CouplingLaw::PlusMinusOne, 0.7, 9) ==
        generate_rrg(40, 3, CouplingLaw::PlusMinusOne, 0.7, 9));
  CHECK_FALSE(generate_chain(30, CouplingLaw::Gaussian, 0.7, 9) == generate_chain(30, CouplingLaw::Gaussian, 0.7, 10));
}

TEST_CASE("save and load round trip") {
  auto inst = generate_rrg(12, 3, CouplingLaw::Gaussian, 0.35, 4);
  CHECK(load_instance(save_instance(inst)) == inst);

  auto path = (std::filesystem::temp_directory_path() / "qcavity_roundtrip.json").string();
  write_instance_file(path, inst);
  CHECK(read_instance_file(path) == inst);
  std::filesystem::remove(path);
}

TEST_CASE("negative fields are folded on load") {
  auto inst = load_instance(R"({"n":3,"edges":[[0,1,1.0],[1,2,-0.5]],"h":[0.2,-0.5,0.0],"seed":0})");
  CHECK(inst.fields == std::vector<double>{0.2, 0.5, 0.0});
  CHECK(inst.flipped == std::vector<int>{1});
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(load_instance(R"({"n":2,"edges":[[0,0,1.0]],"h":[1,1],"seed":0})"), InstanceError);
  CHECK_THROWS_AS(load_instance(R"({"n":2,"edges":[[0,2,1.0]],"h":[1,1],"seed":0})"), InstanceError);
  CHECK_THROWS_AS(load_instance(R"({"n":2,"edges":[[0,1,1.0],[1,0,2.0]],"h":[1,1],"seed":0})"), InstanceError);
  CHECK_THROWS_AS(load_instance(R"({"n":2,"edges":[[0,1]],"h":[1,1],"seed":0})"), InstanceError);
  CHECK_THROWS_AS(load_instance(R"({"n":2,"edges":[],"h":[1],"seed":0})"), InstanceError);
  CHECK_THROWS_AS(load_instance("not json"), InstanceError);
}

TEST_CASE("classical graph indexing") {
  ClassicalGraph g(4, {{0, 1}, {1, 2}, {1, 3}});
  CHECK(g.num_directed() == 6);
  CHECK(g.source(0) == 0);
  CHECK(g.target(0) == 1);
  CHECK(g.source(1) == 1);
  CHECK(g.target(1) == 0);
  CHECK(g.find_edge(3, 1) == 2);
  CHECK(g.find_edge(0, 3) == -1);
  CHECK(g.is_forest());
  CHECK(g.max_degree() == 3);
  for (int v = 0; v < 4; ++v)
    for (const auto& inc : g.incident(v)) {
      CHECK(g.source(inc.out) == v);
      CHECK(g.target(inc.out) == inc.neighbor);
      CHECK(g.source(inc.in) == inc.neighbor);
      CHECK((inc.out ^ 1) == inc.in);
    }
  CHECK_FALSE(ClassicalGraph(3, {{0, 1}, {1, 2}, {2, 0}}).is_forest());
  CHECK_THROWS_AS(ClassicalGraph(3, {{0, 1}, {1, 0}}), InstanceError);
}

TEST_CASE("bond couplings follow the classical edge order") {
  QuantumInstance inst{3, {{0, 1, 0.5}, {2, 1, -2.0}}, {1.0, 1.0, 1.0}, 0, {}};
  ClassicalGraph g(3, {{1, 2}, {0, 1}, {0, 2}});
  CHECK(bond_couplings(inst, g) == std::vector<double>{-2.0, 0.5, 0.0});
  CHECK_THROWS_AS(bond_couplings(inst, ClassicalGraph(3, {{0, 1}})), InstanceError);
}

TEST_CASE("totals") {
  QuantumInstance inst{3, {{0, 1, 0.5}, {2, 1, -2.0}}, {1.0, 0.5, 0.25}, 0, {}};
  CHECK(total_field(inst) == doctest::Approx(1.75));
  CHECK(total_abs_coupling(inst) == doctest::Approx(2.5));
  CHECK(with_uniform_field(inst, 3.0).fields == std::vector<double>{3.0, 3.0, 3.0});
}
