#include "qcavity/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace qcavity {

namespace {

std::vector<double> draw_couplings(std::size_t count, CouplingLaw law, std::mt19937_64& rng) {
  std::vector<double> J(count);
  switch (law) {
    case CouplingLaw::Gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& x : J) x = normal(rng);
      break;
    }
    case CouplingLaw::PlusMinusOne: {
      std::bernoulli_distribution coin(0.5);
      for (auto& x : J) x = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case CouplingLaw::Ferro:
      std::fill(J.begin(), J.end(), 1.0);
      break;
  }
  return J;
}

std::pair<int, int> ordered(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

CouplingLaw parse_coupling_law(std::string_view name) {
  if (name == "gaussian") return CouplingLaw::Gaussian;
  if (name == "pm_one" || name == "pm") return CouplingLaw::PlusMinusOne;
  if (name == "ferro") return CouplingLaw::Ferro;
  throw InstanceError("unknown coupling law '" + std::string(name) + "'");
}

std::string to_string(CouplingLaw law) {
  switch (law) {
    case CouplingLaw::Gaussian: return "gaussian";
    case CouplingLaw::PlusMinusOne: return "pm_one";
    case CouplingLaw::Ferro: return "ferro";
  }
  return "?";
}

void validate(const QuantumInstance& inst) {
  if (inst.n < 1) throw InstanceError("instance must have at least one spin");
  if (static_cast<int>(inst.fields.size()) != inst.n)
    throw InstanceError("expected " + std::to_string(inst.n) + " fields, got " +
                        std::to_string(inst.fields.size()));
  std::set<std::pair<int, int>> seen;
  for (const auto& c : inst.edges) {
    if (c.i < 0 || c.i >= inst.n || c.j < 0 || c.j >= inst.n)
      throw InstanceError("edge (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                          ") out of range");
    if (c.i == c.j) throw InstanceError("self-loop at spin " + std::to_string(c.i));
    if (!std::isfinite(c.J)) throw InstanceError("non-finite coupling");
    if (!seen.insert(ordered(c.i, c.j)).second)
      throw InstanceError("duplicate edge (" + std::to_string(c.i) + "," + std::to_string(c.j) + ")");
  }
  for (double h : inst.fields) {
    if (!std::isfinite(h)) throw InstanceError("non-finite transverse field");
    if (h < 0.0) throw InstanceError("transverse fields must be non-negative");
  }
}

double total_field(const QuantumInstance& inst) {
  return std::accumulate(inst.fields.begin(), inst.fields.end(), 0.0);
}

double total_abs_coupling(const QuantumInstance& inst) {
  double s = 0.0;
  for (const auto& c : inst.edges) s += std::abs(c.J);
  return s;
}

QuantumInstance with_uniform_field(QuantumInstance inst, double h) {
  if (!(h >= 0.0)) throw InstanceError("transverse field must be non-negative");
  std::fill(inst.fields.begin(), inst.fields.end(), h);
  inst.flipped.clear();
  return inst;
}

QuantumInstance generate_chain(int n, CouplingLaw law, double h, std::uint64_t seed) {
  if (n < 2) throw InstanceError("chain needs n >= 2, got " + std::to_string(n));
  if (!(h >= 0.0)) throw InstanceError("transverse field must be non-negative");
  std::mt19937_64 rng(seed);
  auto J = draw_couplings(static_cast<std::size_t>(n - 1), law, rng);
  QuantumInstance inst;
  inst.n = n;
  inst.seed = seed;
  inst.fields.assign(n, h);
  for (int i = 0; i + 1 < n; ++i) inst.edges.push_back({i, i + 1, J[i]});
  return inst;
}

QuantumInstance generate_rrg(int n, int d, CouplingLaw law, double h, std::uint64_t seed) {
  if (d < 1 || n < 2) throw InstanceError("random regular graph needs n >= 2 and d >= 1");
  if ((static_cast<long long>(n) * d) % 2 != 0)
    throw InstanceError("n*d must be even (n=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
  if (d >= n) throw InstanceError("degree must be smaller than n");
  if (!(h >= 0.0)) throw InstanceError("transverse field must be non-negative");

  std::mt19937_64 rng(seed);
  std::vector<int> stubs;
  stubs.reserve(static_cast<std::size_t>(n) * d);
  for (int v = 0; v < n; ++v)
    for (int k = 0; k < d; ++k) stubs.push_back(v);

  for (int attempt = 0; attempt < kMaxPairingRestarts; ++attempt) {
    std::shuffle(stubs.begin(), stubs.end(), rng);
    std::set<std::pair<int, int>> pairs;
    std::vector<std::pair<int, int>> edges;
    bool ok = true;
    for (std::size_t s = 0; s < stubs.size(); s += 2) {
      int a = stubs[s], b = stubs[s + 1];
      if (a == b || !pairs.insert(ordered(a, b)).second) {
        ok = false;
        break;
      }
      edges.push_back(ordered(a, b));
    }
    if (!ok) continue;
    std::sort(edges.begin(), edges.end());
    auto J = draw_couplings(edges.size(), law, rng);
    QuantumInstance inst;
    inst.n = n;
    inst.seed = seed;
    inst.fields.assign(n, h);
    for (std::size_t e = 0; e < edges.size(); ++e)
      inst.edges.push_back({edges[e].first, edges[e].second, J[e]});
    return inst;
  }
  throw GenerationError("configuration model failed after " + std::to_string(kMaxPairingRestarts) +
                        " restarts (seed " + std::to_string(seed) + ")");
}

std::string save_instance(const QuantumInstance& inst) {
  nlohmann::ordered_json doc;
  doc["n"] = inst.n;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& c : inst.edges) edges.push_back({c.i, c.j, c.J});
  doc["edges"] = std::move(edges);
  doc["h"] = inst.fields;
  doc["seed"] = inst.seed;
  if (!inst.flipped.empty()) doc["flipped"] = inst.flipped;
  return doc.dump(1) + "\n";
}

QuantumInstance load_instance(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InstanceError(std::string("malformed instance document: ") + e.what());
  }
  QuantumInstance inst;
  try {
    inst.n = doc.at("n").get<int>();
    for (const auto& row : doc.at("edges")) {
      if (!row.is_array() || row.size() != 3) throw InstanceError("edge rows must be [i, j, J]");
      inst.edges.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<double>()});
    }
    inst.fields = doc.at("h").get<std::vector<double>>();
    inst.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("flipped")) inst.flipped = doc["flipped"].get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw InstanceError(std::string("malformed instance document: ") + e.what());
  }
  for (int i = 0; i < static_cast<int>(inst.fields.size()); ++i) {
    if (inst.fields[i] < 0.0) {
      inst.fields[i] = -inst.fields[i];
      inst.flipped.push_back(i);
    }
  }
  std::sort(inst.flipped.begin(), inst.flipped.end());
  inst.flipped.erase(std::unique(inst.flipped.begin(), inst.flipped.end()), inst.flipped.end());
  validate(inst);
  return inst;
}

QuantumInstance read_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError("cannot open instance file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_instance(buf.str());
}

void write_instance_file(const std::string& path, const QuantumInstance& inst) {
  std::ofstream out(path);
  if (!out) throw InstanceError("cannot write instance file '" + path + "'");
  out << save_instance(inst);
}

ClassicalGraph::ClassicalGraph(int n, std::vector<std::pair<int, int>> edges)
    : n_(n), edges_(std::move(edges)), adjacency_(static_cast<std::size_t>(std::max(n, 0))) {
  if (n < 1) throw InstanceError("graph must have at least one vertex");
  std::set<std::pair<int, int>> seen;
  for (int e = 0; e < num_edges(); ++e) {
    auto [a, b] = edges_[e];
    if (a < 0 || a >= n || b < 0 || b >= n) throw InstanceError("classical edge out of range");
    if (a == b) throw InstanceError("classical self-loop at " + std::to_string(a));
    if (!seen.insert(ordered(a, b)).second) throw InstanceError("duplicate classical edge");
    adjacency_[a].push_back({e, b, 2 * e, 2 * e + 1});
    adjacency_[b].push_back({e, a, 2 * e + 1, 2 * e});
  }
}

ClassicalGraph ClassicalGraph::from_instance(const QuantumInstance& inst) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(inst.edges.size());
  for (const auto& c : inst.edges) edges.emplace_back(c.i, c.j);
  return ClassicalGraph(inst.n, std::move(edges));
}

int ClassicalGraph::max_degree() const {
  int d = 0;
  for (const auto& adj : adjacency_) d = std::max(d, static_cast<int>(adj.size()));
  return d;
}

int ClassicalGraph::source(int directed) const {
  const auto& [a, b] = edges_[directed / 2];
  return directed % 2 == 0 ? a : b;
}

int ClassicalGraph::target(int directed) const {
  const auto& [a, b] = edges_[directed / 2];
  return directed % 2 == 0 ? b : a;
}

int ClassicalGraph::find_edge(int u, int v) const {
  if (u < 0 || u >= n_) return -1;
  for (const auto& inc : adjacency_[u])
    if (inc.neighbor == v) return inc.edge;
  return -1;
}

bool ClassicalGraph::is_forest() const {
  std::vector<int> parent(n_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges_) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

std::vector<double> bond_couplings(const QuantumInstance& inst, const ClassicalGraph& graph) {
  if (graph.num_vertices() != inst.n) throw InstanceError("graph and instance sizes differ");
  std::vector<double> J(graph.num_edges(), 0.0);
  for (const auto& c : inst.edges) {
    int e = graph.find_edge(c.i, c.j);
    if (e < 0)
      throw InstanceError("quantum bond (" + std::to_string(c.i) + "," + std::to_string(c.j) +
                          ") is not an edge of the classical graph");
    J[e] = c.J;
  }
  return J;
}

}  // namespace qcavity
