#include "qcavity/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "qcavity/exact.hpp"
#include "qcavity/homogeneous.hpp"
#include "qcavity/meanfield.hpp"
#include "qcavity/symmetric.hpp"

namespace qcavity {

using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string millis(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

std::string digest(const ParameterSet& p) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto feed = [&](double x) {
    for (char c : fmt(x)) {
      hash ^= static_cast<unsigned char>(c);
      hash *= 1099511628211ULL;
    }
    hash ^= ';';
    hash *= 1099511628211ULL;
  };
  for (double b : p.B) feed(b);
  hash ^= '|';
  for (double k : p.K) feed(k);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"instance", ""},
      {"instance_id", ""},
      {"graph", "chain"},
      {"n", "20"},
      {"d", "3"},
      {"couplings", "gaussian"},
      {"instance_seed", "0"},
      {"methods", "mf,ss,gs"},
      {"h", ""},
      {"h_min", "1"},
      {"h_max", "1"},
      {"h_step", "0.1"},
      {"seed", "0"},
      {"mf.step", "0.02"},
      {"mf.half_count", "150"},
      {"mf.max_iters", "1000"},
      {"ss.step", "0.01"},
      {"ss.half_count", "200"},
      {"ss.k_max", ""},
      {"ss.inner", "exhaustive"},
      {"ss.max_iters", "1000"},
      {"gs.db", "0.05"},
      {"gs.lb", "60"},
      {"gs.dk", "0.05"},
      {"gs.lk", "40"},
      {"gs.dnu", "0.05"},
      {"gs.lnu", "120"},
      {"gs.states", "20"},
      {"gs.tolerance_initial", "0.2"},
      {"gs.tolerance_decay", "0.7"},
      {"gs.tolerance_floor", ""},
      {"gs.delta_m", "0.05"},
      {"gs.k_max", ""},
      {"gs.resample_fraction", "0.5"},
      {"gs.proposal_radius", "5"},
      {"gs.rounds", "30"},
      {"gs.max_sweeps", "50"},
      {"gs.sweep_tolerance", "1e-9"},
      {"gs.refit_restarts", "8"},
      {"gs.seed_mf", "true"},
      {"gs.seed_ss", "true"},
      {"gs.inner", "exhaustive"},
      {"gs.convolution_refine", "4"},
      {"gs.y_bins", "64"},
      {"exact.krylov_dim", "24"},
      {"exact.tolerance", "1e-12"},
      {"homog.d", "3"},
      {"homog.b_step", "0.01"},
      {"homog.b_max", "3"},
      {"homog.k_step", "0.01"},
      {"homog.k_min", "-0.5"},
      {"homog.k_max", "2"},
  };
  return keys;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::none_of(keys.begin(), keys.end(), [&](const auto& kv) { return kv.first == key; }))
    throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

std::string RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  for (const auto& [k, v] : known_keys())
    if (k == key) return v;
  throw ConfigError("unknown config key '" + key + "'");
}

double RunConfig::get_double(const std::string& key) const {
  std::string v = get(key);
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

int RunConfig::get_int(const std::string& key) const {
  double x = get_double(key);
  if (x != std::floor(x) || std::abs(x) > 2e9) throw ConfigError("config key '" + key + "' expects an integer");
  return static_cast<int>(x);
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

std::optional<double> RunConfig::get_optional_double(const std::string& key) const {
  std::string v = get(key);
  if (v.empty() || v == "none") return std::nullopt;
  return get_double(key);
}

std::string RunConfig::text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

QuantumInstance config_instance(const RunConfig& cfg) {
  if (cfg.has("instance")) return read_instance_file(cfg.get("instance"));
  const std::string graph = cfg.get("graph");
  const int n = cfg.get_int("n");
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("instance_seed"));
  CouplingLaw law;
  try {
    law = parse_coupling_law(cfg.get("couplings"));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (graph == "chain") return generate_chain(n, law, 1.0, seed);
  if (graph == "rrg") return generate_rrg(n, cfg.get_int("d"), law, 1.0, seed);
  throw ConfigError("unknown graph '" + graph + "' (expected chain or rrg)");
}

std::vector<double> config_fields(const RunConfig& cfg) {
  std::vector<double> out;
  if (cfg.has("h")) {
    for (const auto& item : split(cfg.get("h"), ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad h value '" + item + "'");
      }
    }
    return out;
  }
  const double lo = cfg.get_double("h_min"), hi = cfg.get_double("h_max"), step = cfg.get_double("h_step");
  if (!(step > 0.0) || hi < lo) throw ConfigError("h range needs h_step > 0 and h_max >= h_min");
  const int steps = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int s = 0; s <= steps; ++s) out.push_back(lo + s * step);
  return out;
}

CouplingGrid config_ss_grid(const RunConfig& cfg, const ClassicalGraph& graph) {
  CouplingGrid grid{cfg.get_double("ss.step"), cfg.get_int("ss.half_count"), std::nullopt};
  if (cfg.has("ss.k_max"))
    grid.cap = cfg.get_optional_double("ss.k_max");
  else if (!graph.is_forest())
    grid.cap = 1.0;
  return grid;
}

GSConfig config_gs(const RunConfig& cfg, const ClassicalGraph& graph) {
  GSConfig g = GSConfig::defaults_for(graph);
  g.b_grid = {cfg.get_double("gs.db"), cfg.get_int("gs.lb")};
  g.k_grid = {cfg.get_double("gs.dk"), cfg.get_int("gs.lk")};
  g.nu_grid = {cfg.get_double("gs.dnu"), cfg.get_int("gs.lnu")};
  g.states_per_edge = cfg.get_int("gs.states");
  g.tolerance_initial = cfg.get_double("gs.tolerance_initial");
  g.tolerance_decay = cfg.get_double("gs.tolerance_decay");
  g.tolerance_floor = cfg.get_optional_double("gs.tolerance_floor");
  g.delta_m = cfg.get_double("gs.delta_m");
  if (cfg.has("gs.k_max")) g.k_max = cfg.get_optional_double("gs.k_max");
  g.resample_fraction = cfg.get_double("gs.resample_fraction");
  g.proposal_radius = cfg.get_double("gs.proposal_radius");
  g.outer_rounds = cfg.get_int("gs.rounds");
  g.max_sweeps = cfg.get_int("gs.max_sweeps");
  g.sweep_tolerance = cfg.get_double("gs.sweep_tolerance");
  g.refit_restarts = cfg.get_int("gs.refit_restarts");
  g.seed_mean_field = cfg.get_bool("gs.seed_mf");
  g.seed_symmetric = cfg.get_bool("gs.seed_ss");
  g.seed_field_grid = {cfg.get_double("mf.step"), cfg.get_int("mf.half_count")};
  g.seed_coupling_grid = config_ss_grid(cfg, graph);
  g.convolution_refine = cfg.get_int("gs.convolution_refine");
  g.y_bins = cfg.get_int("gs.y_bins");
  g.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  try {
    g.inner = parse_inner_max(cfg.get("gs.inner"));
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

int env_threads() {
  const char* v = std::getenv("QCAVITY_THREADS");
  if (!v) return 1;
  int t = std::atoi(v);
  return t > 0 ? t : 1;
}

namespace {

const std::set<std::string> kMethods = {"mf", "ss", "gs", "exact", "homog"};

ResultRecord from_observables(const Observables& obs, int n) {
  ResultRecord r;
  r.energy_per_spin = obs.energy / n;
  r.m_x = obs.m_x;
  r.q_z = obs.q_z;
  return r;
}

ResultRecord run_cell(const RunConfig& cfg, const QuantumInstance& base, const std::string& method, double h) {
  const QuantumInstance inst = with_uniform_field(base, h);
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const int n = std::max(inst.n, 1);
  ResultRecord r;
  if (method == "mf") {
    FieldGrid grid{cfg.get_double("mf.step"), cfg.get_int("mf.half_count")};
    auto mf = mf_maxsum_solve(inst, grid, cfg.get_int("mf.max_iters"), seed);
    Problem p = Problem::build(inst);
    ParameterSet params{mf.B, std::vector<double>(p.graph.num_edges(), 0.0)};
    auto fit = refit(p, params, std::nullopt, RefitOptions{0.0, 0, seed});
    r = from_observables(fit.obs, n);
    r.converged = mf.converged;
    r.iters = mf.iterations;
    r.digest = digest(params);
    r.extra["maxsum_energy"] = fmt(mf.energy / n);
  } else if (method == "ss") {
    const CouplingGrid grid = config_ss_grid(cfg, ClassicalGraph::from_instance(inst));
    InnerMax inner;
    try {
      inner = parse_inner_max(cfg.get("ss.inner"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    auto ss = ss_maxsum_solve(inst, grid, cfg.get_int("ss.max_iters"), seed, inner);
    Problem p = Problem::build(inst);
    ParameterSet params{std::vector<double>(inst.n, 0.0), std::vector<double>(p.graph.num_edges(), 0.0)};
    for (std::size_t q = 0; q < inst.edges.size(); ++q)
      params.K[p.graph.find_edge(inst.edges[q].i, inst.edges[q].j)] = ss.K[q];
    CavityFieldSet zero{std::vector<double>(p.graph.num_directed(), 0.0)};
    auto fit = refit(p, params, zero, RefitOptions{0.0, 0, seed});
    r = from_observables(fit.obs, n);
    r.converged = ss.converged;
    r.iters = ss.iterations;
    r.digest = digest(params);
  } else if (method == "gs") {
    Problem p = Problem::build(inst);
    GSConfig g = config_gs(cfg, p.graph);
    auto res = gs_solve(p, g);
    r = from_observables(res.obs, n);
    r.converged = res.converged;
    r.iters = res.sweeps;
    r.digest = digest(res.params);
    r.extra["maxsum_estimate"] = res.maxsum_estimate ? fmt(*res.maxsum_estimate / n) : "null";
    r.extra["source"] = json(res.source).dump();
    r.extra["below_delta_m"] = res.below_delta_m ? "true" : "false";
    r.extra["site_disagreements"] = std::to_string(res.site_disagreements);
    r.extra["mean_abs_sigma_z"] = fmt(res.obs.mean_abs_sigma_z);
    r.extra["fallback"] = res.fallback ? "true" : "false";
  } else if (method == "exact") {
    ExactOptions opt;
    opt.seed = seed;
    opt.krylov_dim = cfg.get_int("exact.krylov_dim");
    opt.tolerance = cfg.get_double("exact.tolerance");
    if (inst.n > kMaxExactSpins)
      throw ConfigError("exact oracle supports at most " + std::to_string(kMaxExactSpins) + " spins");
    auto ex = ground_state(inst, opt);
    r.energy_per_spin = ex.energy / n;
    r.m_x = ex.m_x;
    r.q_z = 0.0;
    r.converged = ex.converged;
    r.iters = ex.matvecs;
  }
  return r;
}

}  // namespace

RunOutput run_experiment(const RunConfig& cfg, int threads) {
  const auto methods = split(cfg.get("methods"), ',');
  if (methods.empty()) throw ConfigError("no methods given");
  for (const auto& m : methods)
    if (!kMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
  const auto fields = config_fields(cfg);
  const bool needs_instance =
      std::any_of(methods.begin(), methods.end(), [](const std::string& m) { return m != "homog"; });
  QuantumInstance inst;
  std::string id = cfg.get("instance_id");
  if (needs_instance) {
    inst = config_instance(cfg);
    validate(inst);
    if (id.empty())
      id = cfg.has("instance") ? cfg.get("instance")
                               : cfg.get("graph") + "-n" + std::to_string(inst.n) + "-s" + cfg.get("instance_seed");
  }
  if (id.empty()) id = "homog-d" + cfg.get("homog.d");
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

  RunOutput out;
  std::vector<std::pair<std::string, double>> cells;
  for (const auto& m : methods)
    if (m != "homog")
      for (double h : fields) cells.emplace_back(m, h);
  std::vector<ResultRecord> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      try {
        auto t0 = std::chrono::steady_clock::now();
        ResultRecord r = run_cell(cfg, inst, cells[c].first, cells[c].second);
        r.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        r.instance = id;
        r.seed = seed;
        r.method = cells[c].first;
        r.h = cells[c].second;
        results[c] = std::move(r);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Records for methods in the order given, homog rows where homog appears.
  std::size_t pos = 0;
  for (const auto& m : methods) {
    if (m != "homog") {
      for (std::size_t k = 0; k < fields.size(); ++k) out.records.push_back(std::move(results[pos++]));
      continue;
    }
    const int d = cfg.get_int("homog.d");
    HomogGrid grid{cfg.get_double("homog.b_step"), cfg.get_double("homog.b_max"), cfg.get_double("homog.k_step"),
                   cfg.get_double("homog.k_min"), cfg.get_double("homog.k_max")};
    auto t0 = std::chrono::steady_clock::now();
    HomogScan scan;
    try {
      if (fields.size() > 1)
        scan = homog_scan(d, fields.front(), fields.back(), fields[1] - fields[0], grid);
      else
        scan = homog_scan(d, fields.front(), fields.front(), 1.0, grid);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& row : scan.ising.rows) {
      ResultRecord r;
      r.instance = id;
      r.seed = seed;
      r.method = "homog";
      r.h = row.h;
      r.energy_per_spin = row.point.energy;
      r.m_x = row.point.m_x;
      r.q_z = row.point.m_z * row.point.m_z;
      r.converged = true;
      r.iters = 0;
      r.time_ms = ms / static_cast<double>(scan.ising.rows.size());
      r.digest = digest(ParameterSet{{row.point.B}, {row.point.K}});
      r.extra["B"] = fmt(row.point.B);
      r.extra["K"] = fmt(row.point.K);
      r.extra["m_z"] = fmt(row.point.m_z);
      out.records.push_back(std::move(r));
    }
    json summary;
    summary["instance"] = id;
    summary["method"] = "homog_summary";
    summary["d"] = d;
    summary["h_c"] = scan.ising.h_c ? json(*scan.ising.h_c) : json(nullptr);
    summary["h_c_mean_field"] = scan.mean_field.h_c ? json(*scan.mean_field.h_c) : json(nullptr);
    summary["reference_h_c"] = kReferenceCriticalField;
    summary["largest_energy_jump"] = scan.ising.largest_jump;
    summary["largest_energy_jump_h"] = scan.ising.largest_jump_h;
    out.summaries.push_back(summary.dump());
  }
  return out;
}

std::string csv_row(const ResultRecord& r) {
  std::string s = r.instance + "," + std::to_string(r.seed) + "," + r.method + "," + fmt(r.h) + "," +
                  fmt(r.energy_per_spin) + "," + (r.m_x ? fmt(*r.m_x) : "") + "," + fmt(r.q_z) + "," +
                  (r.converged ? "1" : "0") + "," + std::to_string(r.iters) + "," + millis(r.time_ms);
  return s;
}

std::string json_record(const ResultRecord& r, const std::string& config_text) {
  json j;
  j["instance"] = r.instance;
  j["seed"] = r.seed;
  j["method"] = r.method;
  j["h"] = r.h;
  j["E_per_spin"] = r.energy_per_spin;
  j["m_x"] = r.m_x ? json(*r.m_x) : json(nullptr);
  j["q_z"] = r.q_z;
  j["converged"] = r.converged;
  j["iters"] = r.iters;
  j["time_ms"] = r.time_ms;
  j["digest"] = r.digest;
  json extra = json::object();
  for (const auto& [k, v] : r.extra) extra[k] = json::parse(v);
  j["diagnostics"] = extra;
  j["config"] = config_text;
  return j.dump();
}

ResultRecord parse_json_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed result record: ") + e.what());
  }
  ResultRecord r;
  try {
    r.instance = j.at("instance").get<std::string>();
    r.method = j.at("method").get<std::string>();
    if (r.method == "homog_summary") return r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.h = j.at("h").get<double>();
    r.energy_per_spin = j.at("E_per_spin").get<double>();
    if (!j.at("m_x").is_null()) r.m_x = j.at("m_x").get<double>();
    r.q_z = j.at("q_z").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.iters = j.at("iters").get<int>();
    r.time_ms = j.at("time_ms").get<double>();
    r.digest = j.value("digest", "");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed result record: ") + e.what());
  }
  return r;
}

std::vector<ComparisonRow> compare_records(
    const std::vector<std::pair<std::string, std::vector<ResultRecord>>>& files) {
  auto key_h = [](double h) { return std::llround(h * 1e9); };
  // h grids per (instance, method) must agree between files.
  std::map<std::pair<std::string, std::string>, std::set<long long>> grids;
  for (const auto& [name, recs] : files) {
    std::map<std::pair<std::string, std::string>, std::set<long long>> local;
    for (const auto& r : recs)
      if (r.method != "homog_summary") local[{r.instance, r.method}].insert(key_h(r.h));
    for (const auto& [k, hs] : local) {
      auto [it, inserted] = grids.emplace(k, hs);
      if (!inserted && it->second != hs)
        throw ConfigError("mismatched h grids for instance '" + k.first + "', method '" + k.second + "' in " + name);
    }
  }
  std::map<std::tuple<std::string, long long>, double> exact;
  for (const auto& [name, recs] : files)
    for (const auto& r : recs)
      if (r.method == "exact") exact.emplace(std::tuple{r.instance, key_h(r.h)}, r.energy_per_spin);
  std::map<std::tuple<std::string, std::string, long long>, double> base;
  if (!files.empty())
    for (const auto& r : files.front().second)
      base.emplace(std::tuple{r.instance, r.method, key_h(r.h)}, r.energy_per_spin);

  std::vector<ComparisonRow> rows;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const auto& r : files[f].second) {
      if (r.method == "homog_summary") continue;
      ComparisonRow row;
      row.file = files[f].first;
      row.instance = r.instance;
      row.method = r.method;
      row.h = r.h;
      row.energy_per_spin = r.energy_per_spin;
      auto ex = exact.find({r.instance, key_h(r.h)});
      if (ex != exact.end() && r.method != "exact") {
        row.delta_exact = r.energy_per_spin - ex->second;
        row.violation = *row.delta_exact < -kBoundViolation;
      }
      if (f > 0) {
        auto b = base.find({r.instance, r.method, key_h(r.h)});
        if (b != base.end()) row.delta_base = r.energy_per_spin - b->second;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace qcavity
