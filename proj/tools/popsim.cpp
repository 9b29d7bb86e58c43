#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "popsim/experiment.hpp"

namespace {

// Precedence, weakest first: config file, --set overrides, environment
// (POPSIM_SEED, POPSIM_OUT_DIR).
popsim::ExperimentConfig load_config(const std::string& path,
                                     const std::vector<std::string>& sets) {
  popsim::ExperimentConfig cfg;
  if (!path.empty()) cfg = popsim::ExperimentConfig::from_file(path);
  cfg.apply_overrides(sets);
  cfg.apply_environment();
  return cfg;
}

void add_config_options(CLI::App* cmd, std::string& path,
                        std::vector<std::string>& sets) {
  cmd->add_option("--config", path, "experiment file with key = value lines");
  cmd->add_option("--set", sets, "override one experiment key (KEY=VALUE)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"population-protocol simulation workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand(
      "run", "simulate one seeded run and evaluate the configured checks");
  add_config_options(run, config_path, sets);

  std::string trace_path;
  std::vector<std::string> checks;
  auto* verify = app.add_subcommand(
      "verify", "check a saved trace (default: matching, derived, replay)");
  verify->add_option("trace", trace_path, "trace file")->required();
  verify->add_option("--check", checks,
                     "checks to run: pairing matching derived replay tokens naming");

  auto* replay = app.add_subcommand("replay", "re-execute a saved trace and compare");
  replay->add_option("trace", trace_path, "trace file")->required();

  auto* ftt = app.add_subcommand(
      "ftt", "search the fastest two-agent transition time of a simulator");
  add_config_options(ftt, config_path, sets);

  auto* attack = app.add_subcommand(
      "attack", "build and replay the omission-driven slow-simulation run");
  add_config_options(attack, config_path, sets);

  int seeds = 10;
  auto* batch = app.add_subcommand("batch", "aggregate run checks over many seeds");
  add_config_options(batch, config_path, sets);
  batch->add_option("--seeds", seeds, "number of consecutive seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return popsim::cmd_run(load_config(config_path, sets), std::cout);
    if (verify->parsed()) return popsim::cmd_verify(trace_path, checks, std::cout);
    if (replay->parsed()) return popsim::cmd_replay(trace_path, std::cout);
    if (ftt->parsed()) return popsim::cmd_ftt(load_config(config_path, sets), std::cout);
    if (attack->parsed())
      return popsim::cmd_attack(load_config(config_path, sets), std::cout);
    if (batch->parsed())
      return popsim::cmd_batch(load_config(config_path, sets), seeds, std::cout);
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
