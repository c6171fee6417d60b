// cara_cli: region export, simulation sweeps and analysis-vs-simulation reports.
//
// Exit codes: 0 success, 1 invalid configuration or parameters, 2 internal failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cara/cli.hpp"

int main(int argc, char** argv) {
  using namespace cara;
  using namespace cara::cli;

  CLI::App app{"Stability regions of channel-aware random access: analysis and simulation"};
  std::string config_path;
  std::string task_name;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string out_path;
  std::string format_name;
  std::size_t boundary_samples = 0;
  double band = -1.0;
  bool decouple = false;
  std::string dump_path;

  app.add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--task", task_name,
                 "Override task: region, aloha_region, lcq_region, simulate, sweep, compare, dominance_check");
  auto* seed_opt = app.add_option("--seed", seed, "Run a single seed instead of the configured list");
  app.add_option("--workers", workers, "Worker threads for independent runs");
  app.add_option("--out", out_path, "Output file (default: standard output)");
  app.add_option("--format", format_name, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--boundary-samples", boundary_samples, "Points on each exported curve (default 512)");
  app.add_option("--band", band, "Boundary band width excluded from agreement (default 0.02)");
  app.add_flag("--decouple-seeds", decouple, "Dominance check with different seeds (negative control)");
  app.add_option("--dump-config", dump_path, "Write the effective config as JSON and exit");

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (!task_name.empty()) cfg.task = parse_task(task_name);
    if (seed_opt->count()) cfg.sim.seeds = {seed};
    if (workers) cfg.workers = workers;
    if (!out_path.empty()) cfg.output.path = out_path;
    if (!format_name.empty()) cfg.output.format = parse_format(format_name);
    if (boundary_samples) cfg.output.boundary_samples = boundary_samples;
    if (band >= 0.0) cfg.output.band = band;
    if (decouple) cfg.sim.decouple_seeds = true;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (!dump_path.empty()) {
    std::ofstream os(dump_path);
    os << to_json(cfg).dump(2) << "\n";
    return os ? 0 : 2;
  }

  TaskResult result;
  try {
    result = run_task(cfg);
  } catch (const InvalidParams& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }

  if (cfg.output.path.empty()) {
    write_table(std::cout, result.table, cfg.output.format);
  } else {
    std::ofstream os(cfg.output.path, std::ios::binary);
    if (!os) {
      std::cerr << "error: cannot write '" << cfg.output.path << "'\n";
      return 2;
    }
    write_table(os, result.table, cfg.output.format);
  }
  auto& log = cfg.output.path.empty() ? std::cerr : std::cout;
  log << "task: " << to_string(cfg.task) << "\n" << result.summary << "\n";
  return 0;
}
