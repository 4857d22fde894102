// SPDX-License-Identifier: Apache-2.0
//
// ohmlab run <config> [--out DIR] [--workers N] [--seed-override SEED]
// ohmlab validate <config>
// ohmlab version
//
// Exit codes: 0 success, 2 config error, 3 numerical-contract violation,
// 4 I/O error.

#include "ohmlab/ohmlab.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

ohmlab::ExperimentConfig load(const std::string& path) {
  return ohmlab::parse_config(ohmlab::read_text(path));
}

void print_config_errors(const ohmlab::ConfigError& e, const std::string& path) {
  std::cerr << path << ": invalid configuration\n";
  for (const auto& msg : e.errors()) std::cerr << "  " << msg << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passivity, work and conductivity measures of free lattice fermions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers = 1;
  std::optional<std::uint64_t> seed_override;

  auto* run = app.add_subcommand("run", "run an experiment and write its result files");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides output.directory)");
  run->add_option("--workers", workers, "worker threads, one realization each")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed_override, "replace disorder.seed_base");

  auto* validate = app.add_subcommand("validate", "check a config file and exit");
  validate->add_option("config", config_path, "config file")->required();

  app.add_subcommand("version", "print the code version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (app.got_subcommand("version")) {
    std::cout << "ohmlab " << ohmlab::kCodeVersion << "\n";
    return 0;
  }

  ohmlab::ExperimentConfig config;
  try {
    config = load(config_path);
  } catch (const ohmlab::ConfigError& e) {
    print_config_errors(e, config_path);
    return kExitConfig;
  } catch (const ohmlab::IoError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }

  if (app.got_subcommand("validate")) {
    std::cout << config_path << ": ok (config_hash " << config.hash() << ")\n";
    return 0;
  }

  ohmlab::RunRecord record;
  try {
    record = ohmlab::run_experiment(config, {workers, seed_override});
  } catch (const ohmlab::RealizationError& e) {
    std::cerr << e.what() << "\n";
    return e.numerical() ? kExitNumerical : 1;
  } catch (const ohmlab::NumericalContractError& e) {
    std::cerr << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration rejected: " << e.what() << "\n";
    return kExitConfig;
  }

  const std::string dir = out_dir.empty() ? record.config.output_directory : out_dir;
  try {
    const auto files = ohmlab::export_results(record, dir);
    std::cout << "experiment " << ohmlab::to_string(config.kind) << ", "
              << record.realizations.size() << " realizations, config_hash "
              << record.config_hash << "\n";
    for (const auto& [k, v] : record.metadata)
      if (k == "passive_count" || k.rfind("drude.", 0) == 0)
        std::cout << "  " << k << " = " << v << "\n";
    for (const auto& f : files) std::cout << "  wrote " << f.string() << "\n";
  } catch (const ohmlab::IoError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
