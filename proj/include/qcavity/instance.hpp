#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qcavity {

/// Raised for malformed or inconsistent problem instances.
class InstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a random generator cannot produce a valid graph.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Coupling {
  int i = 0;
  int j = 0;
  double J = 0.0;

  bool operator==(const Coupling&) const = default;
};

enum class CouplingLaw { Gaussian, PlusMinusOne, Ferro };

CouplingLaw parse_coupling_law(std::string_view name);
std::string to_string(CouplingLaw law);

/// Transverse-field Ising instance H = -sum J_ij s^z_i s^z_j - sum h_i s^x_i.
///
/// Fields are kept non-negative: a negative h_i is equivalent to a positive
/// one up to a local phase on the trial state, so the loader folds the sign
/// away and lists the affected spins in `flipped`.
struct QuantumInstance {
  int n = 0;
  std::vector<Coupling> edges;
  std::vector<double> fields;
  std::uint64_t seed = 0;
  std::vector<int> flipped;

  bool operator==(const QuantumInstance&) const = default;
};

/// Throws InstanceError when an invariant does not hold.
void validate(const QuantumInstance& inst);

double total_field(const QuantumInstance& inst);
double total_abs_coupling(const QuantumInstance& inst);

/// Copy of `inst` with every transverse field set to `h`.
QuantumInstance with_uniform_field(QuantumInstance inst, double h);

/// Open chain 0-1-...-(n-1).
QuantumInstance generate_chain(int n, CouplingLaw law, double h, std::uint64_t seed);

/// Simple d-regular graph drawn from the configuration model, restarting on
/// any self-loop or multi-edge.
QuantumInstance generate_rrg(int n, int d, CouplingLaw law, double h, std::uint64_t seed);

inline constexpr int kMaxPairingRestarts = 1000;

/// JSON document {"n":..,"edges":[[i,j,J],..],"h":[..],"seed":..}.
std::string save_instance(const QuantumInstance& inst);
QuantumInstance load_instance(std::string_view text);

QuantumInstance read_instance_file(const std::string& path);
void write_instance_file(const std::string& path, const QuantumInstance& inst);

/// Undirected interaction graph of the classical Gibbs measure.
///
/// Edge e joins first(e) and second(e). Directed edge 2e runs first->second
/// and 2e+1 runs second->first.
class ClassicalGraph {
 public:
  struct Incidence {
    int edge;      // undirected edge index
    int neighbor;  // the other endpoint
    int out;       // directed index of this vertex -> neighbor
    int in;        // directed index of neighbor -> this vertex
  };

  ClassicalGraph() = default;
  ClassicalGraph(int n, std::vector<std::pair<int, int>> edges);

  static ClassicalGraph from_instance(const QuantumInstance& inst);

  int num_vertices() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_directed() const { return 2 * num_edges(); }

  std::pair<int, int> edge(int e) const { return edges_[e]; }
  std::span<const Incidence> incident(int v) const { return adjacency_[v]; }
  int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }
  int max_degree() const;

  /// Source vertex of a directed edge.
  int source(int directed) const;
  int target(int directed) const;

  /// Edge index joining u and v, or -1.
  int find_edge(int u, int v) const;

  bool is_forest() const;

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<Incidence>> adjacency_;
};

/// Coupling J per classical edge (0 for classical edges without a quantum
/// bond). Throws InstanceError if a quantum bond is missing from the graph.
std::vector<double> bond_couplings(const QuantumInstance& inst, const ClassicalGraph& graph);

}  // namespace qcavity
