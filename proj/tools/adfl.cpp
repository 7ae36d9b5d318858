// Command-line front end: single runs, parameter sweeps, oracle suites.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "adfl/adfl.hpp"
#include "adfl/verify.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kInfeasible = 3, kVerify = 4, kRuntime = 5 };

void emit_error(const std::string& kind, const std::string& message, nlohmann::json extra = {}) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  std::cerr << j.dump() << '\n';
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw adfl::Error("cannot write " + p.string());
  out << text;
}

/// Runs one configuration and writes the four artifacts into `dir`.
adfl::SimulationReport run_into(const adfl::SimulationConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  auto report = adfl::run_simulation(cfg);

  std::ostringstream rep, led, sch;
  report.write_csv(rep);
  report.ledger.write_csv(led);
  report.schedule.write_csv(sch);
  write_file(dir / "report.csv", rep.str());
  write_file(dir / "ledger.csv", led.str());
  write_file(dir / "schedule.csv", sch.str());

  adfl::RunManifest m;
  m.config = cfg;
  m.seed = cfg.run.seed;
  m.timestamp = utc_timestamp();
  m.artifacts = {{"report", "report.csv"}, {"ledger", "ledger.csv"}, {"schedule", "schedule.csv"}};
  m.results = {
      {"scheme", std::string(adfl::to_string(report.plan.scheme))},
      {"rounds", std::to_string(report.plan.rounds)},
      {"horizon", std::to_string(report.schedule.horizon)},
      {"iterations", std::to_string(report.iterations_run())},
      {"truncated", report.truncated ? "true" : "false"},
      {"final_loss", adfl::csv::num(report.final_loss())},
      {"optimum_loss", adfl::csv::num(report.optimum_loss)},
      {"optimum_exact", report.optimum_exact ? "true" : "false"},
      {"report_fnv1a", std::to_string(adfl::fnv1a64(rep.str()))},
      {"wall_clock_s", adfl::csv::num(report.wall_clock_s)},
  };
  std::ostringstream plan;
  adfl::write_manifest(plan, report.plan);
  write_file(dir / "manifest.txt", adfl::serialize_manifest(m));
  write_file(dir / "plan.txt", plan.str());
  return report;
}

std::vector<std::string> split_values(const std::string& csv) {
  std::vector<std::string> out;
  for (const auto& v : adfl::csv::split(csv)) {
    auto t = std::string(adfl::csv::trim(v));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  auto cfg = adfl::load_config(config_path);
  if (seed) cfg.run.seed = *seed;
  const auto rep = run_into(cfg, out_dir);
  std::cout << "iterations " << rep.iterations_run() << " scheme " << adfl::to_string(rep.plan.scheme)
            << " final_loss " << adfl::csv::num(rep.final_loss()) << (rep.truncated ? " (truncated)" : "")
            << '\n';
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& axis, const std::string& values,
              const std::string& out_dir) {
  const auto base = adfl::load_config(config_path);
  const auto list = split_values(values);
  if (list.empty()) throw adfl::ConfigError("empty values list", "--values");
  std::string key;
  if (axis == "N") key = "topology.nodes";
  else if (axis == "scheme") key = "aggregation.scheme";
  else if (axis == "epsilon") key = "aggregation.epsilon";
  else if (axis == "baseline") key = "run.baseline";
  else throw adfl::ConfigError("unknown axis '" + axis + "' (N, scheme, epsilon, baseline)", "--axis");

  fs::create_directories(out_dir);
  std::ostringstream table;
  table << "axis,value,metric,result,status\n";
  for (const auto& v : list) {
    auto cfg = base;
    adfl::set_config_value(cfg, key, v);
    cfg.validate();
    const auto dir = fs::path(out_dir) / (axis + "=" + v);
    try {
      const auto rep = run_into(cfg, dir);
      double energy = 0.0, comm = 0.0;
      for (int i = 0; i < rep.ledger.device_count(); ++i) energy += rep.ledger.total_energy(i);
      comm = rep.ledger.total_comm_energy();
      const auto& last = rep.metrics.back();
      const std::string status = rep.truncated ? "truncated" : "ok";
      auto row = [&](const char* metric, double x) {
        table << axis << ',' << v << ',' << metric << ',' << adfl::csv::num(x) << ',' << status << '\n';
      };
      row("iterations", rep.iterations_run());
      row("final_loss", last.loss);
      row("final_test_accuracy", last.test_accuracy);
      row("final_consensus_error", last.consensus_error);
      row("total_energy_J", energy);
      row("comm_energy_J", comm);
      row("rounds_per_phase", rep.plan.rounds);
    } catch (const adfl::InfeasibleError& e) {
      table << axis << ',' << v << ",iterations,nan,infeasible\n";
      emit_error("infeasible", e.what(), {{"point", axis + "=" + v}});
    }
  }
  write_file(fs::path(out_dir) / "sweep.csv", table.str());
  std::cout << table.str();
  return kOk;
}

int cmd_verify(const std::string& suite) {
  const auto results = adfl::verify::run_suite(suite);
  if (!results) throw adfl::ConfigError("unknown suite '" + suite + "'", "--suite");
  for (const auto& r : *results)
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : "  [" + r.detail + "]")
              << '\n';
  const bool ok = adfl::verify::all_pass(*results);
  std::cout << suite << ": " << (ok ? "all cases passed" : "FAILED") << '\n';
  return ok ? kOk : kVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive decentralized federated learning simulator"};
  app.set_version_flag("--version", std::string(adfl::kToolVersion));
  app.require_subcommand(1);

  std::string config, out, axis, values, suite;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run one simulation and write its artifacts");
  run->add_option("--config", config, "Configuration file (INI)")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--seed", seed, "Override the master seed");

  auto* sweep = app.add_subcommand("sweep", "Run one simulation per value of a sweep axis");
  sweep->add_option("--config", config, "Configuration file (INI)")->required();
  sweep->add_option("--axis", axis, "N, scheme, epsilon or baseline")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out, "Output directory")->required();

  auto* verify = app.add_subcommand("verify", "Check closed forms against exhaustive oracles");
  verify->add_option("--suite", suite, "allocation_oracle, mst_oracle, bound_validity or table1")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(config, out, seed);
    if (*sweep) return cmd_sweep(config, axis, values, out);
    if (*verify) return cmd_verify(suite);
  } catch (const adfl::ConfigError& e) {
    emit_error("config", e.what(), {{"field", e.field()}});
    return kConfig;
  } catch (const adfl::InfeasibleError& e) {
    nlohmann::json extra = nlohmann::json::object();
    if (e.device()) extra["device"] = *e.device() + 1;
    emit_error("infeasible", e.what(), extra);
    return kInfeasible;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kRuntime;
  }
  return kUsage;
}
