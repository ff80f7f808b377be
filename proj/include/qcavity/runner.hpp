#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qcavity/general.hpp"
#include "qcavity/instance.hpp"
#include "qcavity/symmetric.hpp"

namespace qcavity {

/// Malformed configuration or unknown method.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key=value configuration. Lines starting with '#' and blank lines are
/// ignored; later assignments override earlier ones.
class RunConfig {
 public:
  static RunConfig parse(std::string_view text);
  static RunConfig read_file(const std::string& path);

  /// Every key the runner understands, with its default ("" = unset).
  static const std::vector<std::pair<std::string, std::string>>& known_keys();

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // default when unset
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::optional<double> get_optional_double(const std::string& key) const;

  /// Canonical text: one key=value line per explicitly set key, sorted.
  std::string text() const;

 private:
  std::map<std::string, std::string> values_;
};

struct ResultRecord {
  std::string instance;
  std::uint64_t seed = 0;
  std::string method;
  double h = 0.0;
  double energy_per_spin = 0.0;
  std::optional<double> m_x;
  double q_z = 0.0;
  bool converged = false;
  int iters = 0;
  double time_ms = 0.0;
  std::string digest;  // hash of the optimal parameters
  /// Method-specific diagnostics as "key": JSON-value text.
  std::map<std::string, std::string> extra;
};

struct RunOutput {
  std::vector<ResultRecord> records;
  /// Extra JSON lines (for example the critical-field summary of `homog`).
  std::vector<std::string> summaries;
};

/// Instance named by the config: `instance=<path>` or generator settings
/// (`graph`, `n`, `d`, `couplings`, `instance_seed`).
QuantumInstance config_instance(const RunConfig& cfg);

/// The h values of the scan: `h=a,b,c` or `h_min`, `h_max`, `h_step`.
std::vector<double> config_fields(const RunConfig& cfg);

/// ss grid; the coupling cap defaults to 1 on graphs with cycles
/// (`ss.k_max=none` removes it).
CouplingGrid config_ss_grid(const RunConfig& cfg, const ClassicalGraph& graph);

GSConfig config_gs(const RunConfig& cfg, const ClassicalGraph& graph);

/// Runs every (method, h) cell; cells run on `threads` workers and the
/// records come back in (method, h) order.
RunOutput run_experiment(const RunConfig& cfg, int threads = 1);

/// Thread count from QCAVITY_THREADS (default 1).
int env_threads();

inline constexpr const char* kCsvHeader = "instance,seed,method,h,E_per_spin,m_x,q_z,converged,iters,time_ms";

std::string csv_row(const ResultRecord& r);
std::string json_record(const ResultRecord& r, const std::string& config_text);
ResultRecord parse_json_record(std::string_view line);

struct ComparisonRow {
  std::string file;
  std::string instance;
  std::string method;
  double h = 0.0;
  double energy_per_spin = 0.0;
  std::optional<double> delta_exact;
  std::optional<double> delta_base;
  bool violation = false;
};

inline constexpr double kBoundViolation = 1e-6;

/// Per record: energy difference to the exact record of the same instance
/// and h (flagging E < E_exact - 1e-6) and, for files after the first, to the
/// matching record of the first file. Throws ConfigError when two files hold
/// the same (instance, method) on different h grids.
std::vector<ComparisonRow> compare_records(const std::vector<std::pair<std::string, std::vector<ResultRecord>>>& files);

}  // namespace qcavity
