// Command-line driver: run, compare, check-bound.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flamma/commands.hpp"
#include "flamma/errors.hpp"

namespace {

using namespace flamma;

// Seed precedence: --seed flag, then FLAMMA_SEED, then the config file.
void apply_overrides(cli::RunManifest& m, const std::string& output, const std::string& seed_flag) {
  if (const char* env = std::getenv("FLAMMA_SEED"); env && *env) {
    try {
      m.config.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("FLAMMA_SEED is not an unsigned integer: ") + env);
    }
  }
  if (!seed_flag.empty()) {
    try {
      m.config.seed = std::stoull(seed_flag);
    } catch (const std::exception&) {
      throw ConfigError("--seed is not an unsigned integer: " + seed_flag);
    }
  }
  if (!output.empty()) m.output_path = output;
}

std::vector<fed::Algorithm> split_algorithms(const std::string& list) {
  std::vector<fed::Algorithm> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(fed::parse_algorithm(item));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with a gamma-decay leader/follower game"};
  app.require_subcommand(1);

  std::string config_path, output, seed_flag, algorithms, dump_path;

  auto* run = app.add_subcommand("run", "Run one experiment described by a config file");
  run->add_option("--config", config_path, "key=value config file")->required();
  run->add_option("--output", output, "Report path (overrides the config)");
  run->add_option("--seed", seed_flag, "Run seed (overrides FLAMMA_SEED and the config)");

  auto* compare = app.add_subcommand("compare", "Run several algorithms on one shared partition");
  compare->add_option("--config", config_path, "key=value config file")->required();
  compare->add_option("--algorithms", algorithms, "Comma-separated list, e.g. flamma,fedavg")->required();
  compare->add_option("--output", output, "Report path (overrides the config)");
  compare->add_option("--seed", seed_flag, "Run seed (overrides FLAMMA_SEED and the config)");

  auto* dump = app.add_subcommand("dump-config", "Print the fully resolved config");
  dump->add_option("--config", dump_path, "key=value config file (defaults only when omitted)");

  analysis::BoundCheckOptions bound;
  auto* check = app.add_subcommand("check-bound", "Check the convergence bound on a quadratic toy problem");
  check->add_option("--clients", bound.num_clients, "Number of clients")->capture_default_str();
  check->add_option("--k", bound.clients_per_round, "Clients selected per round")->capture_default_str();
  check->add_option("--rounds", bound.rounds, "Global rounds T")->capture_default_str();
  check->add_option("--seeds", bound.seeds, "Seeded repetitions")->capture_default_str();
  check->add_option("--seed", bound.seed, "Base seed")->capture_default_str();
  check->add_option("--threads", bound.threads, "Worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  try {
    if (*check) return cli::cmd_check_bound(bound, std::cout, std::cerr);
    if (*dump) {
      auto m = dump_path.empty() ? cli::RunManifest{} : cli::parse_config(dump_path);
      std::cout << cli::dump_manifest(m);
      return cli::kExitOk;
    }
    auto manifest = cli::parse_config(config_path);
    apply_overrides(manifest, output, seed_flag);
    manifest.validate();
    if (*run) return cli::cmd_run(manifest, std::cout, std::cerr);
    return cli::cmd_compare(manifest, split_algorithms(algorithms), std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  }
}
