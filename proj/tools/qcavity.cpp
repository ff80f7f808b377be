#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "qcavity/exact.hpp"
#include "qcavity/instance.hpp"
#include "qcavity/runner.hpp"

namespace {

enum Exit { kOk = 0, kBadInput = 1, kSolverFailure = 2 };

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& c : f)
    if (c == '.' || c == '_') c = '-';
  return "--" + f;
}

std::string number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::vector<qcavity::ResultRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qcavity::ConfigError("cannot open result file '" + path + "'");
  std::vector<qcavity::ResultRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(qcavity::parse_json_record(line));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational ground states of transverse-field Ising models via MaxSum-BP"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");

  auto* gen = app.add_subcommand("gen", "Generate a random instance as JSON");
  std::string graph = "chain", couplings = "gaussian", gen_out;
  int n = 20, d = 3;
  double h = 1.0;
  std::uint64_t seed = 0;
  gen->add_option("--graph,--topology", graph, "chain or rrg")->check(CLI::IsMember({"chain", "rrg"}));
  gen->add_option("--n", n, "Number of spins");
  gen->add_option("--d", d, "Degree of the random regular graph");
  gen->add_option("--couplings,--law", couplings, "gaussian, pm_one or ferro");
  gen->add_option("--h,--field", h, "Uniform transverse field");
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output path (stdout when omitted)");

  auto* run = app.add_subcommand("run", "Run solvers over an h grid");
  std::string config_path, out_prefix, inner;
  std::vector<std::string> overrides;
  int threads = qcavity::env_threads();
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--set", overrides, "Override: key=value (repeatable)");
  run->add_option("--inner", inner, "Inner maximum of gs: exhaustive, coordinate or convolution");
  run->add_option("--out", out_prefix, "Write <prefix>.csv and <prefix>.jsonl (CSV to stdout when omitted)");
  run->add_option("--threads", threads, "Worker threads (default: QCAVITY_THREADS or 1)");
  std::map<std::string, std::string> key_flags;
  for (const auto& [key, def] : qcavity::RunConfig::known_keys()) {
    const std::string names = key == "h" ? "--h,--h-values" : flag_name(key);
    run->add_option(names, key_flags[key], "Config key " + key + (def.empty() ? "" : " (default " + def + ")"));
  }

  auto* cmp = app.add_subcommand("compare", "Compare result files against exact records and each other");
  std::vector<std::string> files;
  std::string cmp_out;
  cmp->add_option("files", files, "JSONL result files")->required();
  cmp->add_option("--out", cmp_out, "Write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*gen) {
      auto law = qcavity::parse_coupling_law(couplings);
      auto inst = graph == "chain" ? qcavity::generate_chain(n, law, h, seed) : qcavity::generate_rrg(n, d, law, h, seed);
      if (gen_out.empty())
        std::cout << qcavity::save_instance(inst) << "\n";
      else
        qcavity::write_instance_file(gen_out, inst);
      return kOk;
    }

    if (*run) {
      qcavity::RunConfig cfg = config_path.empty() ? qcavity::RunConfig{} : qcavity::RunConfig::read_file(config_path);
      for (const auto& [key, value] : key_flags)
        if (run->count(flag_name(key))) cfg.set(key, value);
      for (const auto& o : overrides) {
        auto eq = o.find('=');
        if (eq == std::string::npos) throw qcavity::ConfigError("--set expects key=value, got '" + o + "'");
        cfg.set(o.substr(0, eq), o.substr(eq + 1));
      }
      if (!inner.empty()) cfg.set("gs.inner", inner);
      auto result = qcavity::run_experiment(cfg, threads);
      const std::string text = cfg.text();
      if (out_prefix.empty()) {
        std::cout << qcavity::kCsvHeader << "\n";
        for (const auto& r : result.records) std::cout << qcavity::csv_row(r) << "\n";
        for (const auto& s : result.summaries) std::cerr << s << "\n";
      } else {
        std::ofstream csv(out_prefix + ".csv"), jsonl(out_prefix + ".jsonl");
        if (!csv || !jsonl) throw qcavity::ConfigError("cannot write output files with prefix '" + out_prefix + "'");
        csv << qcavity::kCsvHeader << "\n";
        for (const auto& r : result.records) {
          csv << qcavity::csv_row(r) << "\n";
          jsonl << qcavity::json_record(r, text) << "\n";
        }
        for (const auto& s : result.summaries) jsonl << s << "\n";
      }
      return kOk;
    }

    if (*cmp) {
      std::vector<std::pair<std::string, std::vector<qcavity::ResultRecord>>> data;
      for (const auto& f : files) data.emplace_back(f, read_records(f));
      auto rows = qcavity::compare_records(data);
      std::ofstream file;
      if (!cmp_out.empty()) {
        file.open(cmp_out);
        if (!file) throw qcavity::ConfigError("cannot write '" + cmp_out + "'");
      }
      std::ostream& os = cmp_out.empty() ? std::cout : file;
      os << "file,instance,method,h,E_per_spin,dE_exact,dE_base,violation\n";
      int violations = 0;
      for (const auto& r : rows) {
        os << r.file << "," << r.instance << "," << r.method << "," << number(r.h) << "," << number(r.energy_per_spin)
           << "," << (r.delta_exact ? number(*r.delta_exact) : "") << "," << (r.delta_base ? number(*r.delta_base) : "")
           << "," << (r.violation ? "1" : "0") << "\n";
        violations += r.violation;
      }
      if (violations > 0) std::cerr << violations << " record(s) below the exact energy\n";
      return kOk;
    }
  } catch (const qcavity::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const qcavity::InstanceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const qcavity::SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kOk;
}
