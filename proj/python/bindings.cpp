#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qcavity/classical_bp.hpp"
#include "qcavity/exact.hpp"
#include "qcavity/general.hpp"
#include "qcavity/homogeneous.hpp"
#include "qcavity/instance.hpp"
#include "qcavity/meanfield.hpp"
#include "qcavity/runner.hpp"
#include "qcavity/symmetric.hpp"

namespace py = pybind11;
using namespace qcavity;

namespace {

py::dict observables_dict(const Observables& obs) {
  py::dict d;
  d["energy"] = obs.energy;
  d["m_x"] = obs.m_x;
  d["q_z"] = obs.q_z;
  d["sigma_z"] = obs.sigma_z;
  d["sigma_x"] = obs.sigma_x;
  d["mean_abs_sigma_z"] = obs.mean_abs_sigma_z;
  return d;
}

py::dict record_dict(const ResultRecord& r) {
  py::dict d;
  d["instance"] = r.instance;
  d["seed"] = r.seed;
  d["method"] = r.method;
  d["h"] = r.h;
  d["E_per_spin"] = r.energy_per_spin;
  d["m_x"] = r.m_x;
  d["q_z"] = r.q_z;
  d["converged"] = r.converged;
  d["iters"] = r.iters;
  d["time_ms"] = r.time_ms;
  d["digest"] = r.digest;
  d["extra"] = r.extra;
  return d;
}

Problem problem_of(const QuantumInstance& inst) { return Problem::build(inst); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variational cavity solvers for the transverse-field Ising model";

  py::register_exception<InstanceError>(m, "InstanceError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SizeError>(m, "SizeError", PyExc_ValueError);

  py::class_<QuantumInstance>(m, "Instance")
      .def(py::init([](int n, const std::vector<std::tuple<int, int, double>>& edges, const std::vector<double>& h,
                       std::uint64_t seed) {
             QuantumInstance inst{n, {}, h, seed, {}};
             for (auto [i, j, J] : edges) inst.edges.push_back({i, j, J});
             validate(inst);
             return inst;
           }),
           py::arg("n"), py::arg("edges"), py::arg("h"), py::arg("seed") = 0)
      .def_readonly("n", &QuantumInstance::n)
      .def_readonly("h", &QuantumInstance::fields)
      .def_readonly("seed", &QuantumInstance::seed)
      .def_property_readonly("edges",
                             [](const QuantumInstance& inst) {
                               std::vector<std::tuple<int, int, double>> out;
                               for (const auto& c : inst.edges) out.emplace_back(c.i, c.j, c.J);
                               return out;
                             })
      .def("with_field", [](const QuantumInstance& inst, double h) { return with_uniform_field(inst, h); })
      .def("to_json", [](const QuantumInstance& inst) { return save_instance(inst); })
      .def_static("from_json", [](const std::string& text) { return load_instance(text); })
      .def("__repr__", [](const QuantumInstance& inst) {
        return "<Instance n=" + std::to_string(inst.n) + " edges=" + std::to_string(inst.edges.size()) + ">";
      });

  m.def(
      "chain",
      [](int n, const std::string& law, double h, std::uint64_t seed) {
        return generate_chain(n, parse_coupling_law(law), h, seed);
      },
      py::arg("n"), py::arg("couplings") = "gaussian", py::arg("h") = 1.0, py::arg("seed") = 0);
  m.def(
      "rrg",
      [](int n, int d, const std::string& law, double h, std::uint64_t seed) {
        return generate_rrg(n, d, parse_coupling_law(law), h, seed);
      },
      py::arg("n"), py::arg("d") = 3, py::arg("couplings") = "gaussian", py::arg("h") = 1.0, py::arg("seed") = 0);

  m.def(
      "mf_solve",
      [](const QuantumInstance& inst, double step, int half_count, int max_iters, std::uint64_t seed) {
        auto r = mf_maxsum_solve(inst, FieldGrid{step, half_count}, max_iters, seed);
        return py::dict(py::arg("B") = r.B, py::arg("energy") = r.energy, py::arg("converged") = r.converged,
                        py::arg("iterations") = r.iterations);
      },
      py::arg("instance"), py::arg("step") = 0.02, py::arg("half_count") = 150, py::arg("max_iters") = 1000,
      py::arg("seed") = 0, "Product-state (K = 0) MaxSum solver; energy is the total variational energy.");

  m.def(
      "ss_solve",
      [](const QuantumInstance& inst, double step, int half_count, std::optional<double> k_max, int max_iters,
         std::uint64_t seed, const std::string& inner) {
        auto r = ss_maxsum_solve(inst, CouplingGrid{step, half_count, k_max}, max_iters, seed, parse_inner_max(inner));
        return py::dict(py::arg("K") = r.K, py::arg("energy") = r.energy, py::arg("converged") = r.converged,
                        py::arg("iterations") = r.iterations);
      },
      py::arg("instance"), py::arg("step") = 0.01, py::arg("half_count") = 200, py::arg("k_max") = py::none(),
      py::arg("max_iters") = 1000, py::arg("seed") = 0, py::arg("inner") = "exhaustive",
      "Symmetric-point (B = 0, nu = 0) MaxSum solver over per-bond couplings.");

  m.def(
      "gs_solve",
      [](const QuantumInstance& inst, py::dict options) {
        Problem p = problem_of(inst);
        RunConfig cfg;
        for (auto item : options) cfg.set("gs." + py::str(item.first).cast<std::string>(), py::str(item.second));
        GSConfig g = config_gs(cfg, p.graph);
        auto r = gs_solve(p, g);
        py::dict d;
        d["energy"] = r.energy;
        d["B"] = r.params.B;
        d["K"] = r.params.K;
        d["observables"] = observables_dict(r.obs);
        d["maxsum_estimate"] = r.maxsum_estimate;
        d["source"] = r.source;
        d["converged"] = r.converged;
        d["rounds"] = r.rounds;
        d["sweeps"] = r.sweeps;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("instance"), py::arg("options") = py::dict(),
      "General MaxSum-BP solver. options maps gs.* config keys without the prefix, "
      "e.g. {'states': 10, 'rounds': 5}.");

  m.def(
      "ansatz_observables",
      [](const QuantumInstance& inst, const std::vector<double>& B, const std::vector<double>& K) {
        Problem p = problem_of(inst);
        ParameterSet P{B, K};
        BPOptions o;
        o.damping = default_damping(p.graph);
        auto bp = bp_fixed_point(p.graph, P, o);
        auto d = observables_dict(observables(p, P, bp.fields));
        d["bp_converged"] = bp.report.converged;
        return d;
      },
      py::arg("instance"), py::arg("B"), py::arg("K"),
      "BP estimate of the Ising-ansatz energy and magnetizations; K is per bond in instance order.");

  m.def(
      "exact_ground_state",
      [](const QuantumInstance& inst, int krylov_dim) {
        ExactOptions o;
        o.krylov_dim = krylov_dim;
        auto r = ground_state(inst, o);
        return py::dict(py::arg("energy") = r.energy, py::arg("m_x") = r.m_x, py::arg("sigma_x") = r.sigma_x,
                        py::arg("sigma_z") = r.sigma_z, py::arg("converged") = r.converged,
                        py::arg("matvecs") = r.matvecs);
      },
      py::arg("instance"), py::arg("krylov_dim") = 24, "Exact ground state by restarted Lanczos (n <= 24).");

  m.def(
      "homog_scan",
      [](int d, double h_min, double h_max, double h_step) {
        auto s = homog_scan(d, h_min, h_max, h_step);
        auto curve = [](const HomogCurve& c) {
          py::list rows;
          for (const auto& r : c.rows)
            rows.append(py::dict(py::arg("h") = r.h, py::arg("B") = r.point.B, py::arg("K") = r.point.K,
                                 py::arg("energy") = r.point.energy, py::arg("m_z") = r.point.m_z,
                                 py::arg("m_x") = r.point.m_x));
          return py::dict(py::arg("rows") = rows, py::arg("h_c") = c.h_c);
        };
        return py::dict(py::arg("ising") = curve(s.ising), py::arg("mean_field") = curve(s.mean_field));
      },
      py::arg("d") = 3, py::arg("h_min") = 0.0, py::arg("h_max") = 4.0, py::arg("h_step") = 0.05);

  m.def(
      "run",
      [](const std::string& config_text, int threads) {
        auto out = run_experiment(RunConfig::parse(config_text), threads);
        py::list records;
        for (const auto& r : out.records) records.append(record_dict(r));
        return records;
      },
      py::arg("config"), py::arg("threads") = 1, "Runs a key=value experiment config; returns one dict per record.");
}
