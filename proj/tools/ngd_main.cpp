#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "ngd/errors.hpp"
#include "ngd/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  std::int64_t record_every = 0;
};

ngd::experiment::ExperimentConfig load(const CommonFlags& flags) {
  auto config = ngd::experiment::load_config(flags.config_path);
  if (flags.seed_set) config.base_seed = flags.seed;
  if (flags.record_every > 0) config.record_every = flags.record_every;
  return config;
}

int effective_workers(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized network gradient descent simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<int> degrees;
  std::vector<std::string> report_inputs;
  std::string diagnose_out;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", flags.config_path, "experiment config file")->required();
    if (needs_out) cmd->add_option("--out", flags.out_dir, "output directory")->required();
    cmd->add_option("--seed", flags.seed, "override base_seed")->each([&](const std::string&) {
      flags.seed_set = true;
    });
    cmd->add_option("--workers", flags.workers, "worker threads (results are identical for any count)");
    cmd->add_option("--record-every", flags.record_every, "snapshot stride override");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate and persist a dataset + partition");
  add_common(gen, true);

  CLI::App* run = app.add_subcommand("run", "run the configured experiment");
  add_common(run, true);

  CLI::App* sweep = app.add_subcommand("sweep-degree", "fixed-degree sweep at the per-model rate");
  add_common(sweep, true);
  sweep->add_option("--degrees", degrees, "in-degrees to sweep")->required()->delimiter(',');

  CLI::App* diagnose = app.add_subcommand("diagnose", "instance diagnostics without a full run");
  add_common(diagnose, false);
  diagnose->add_option("--out", diagnose_out, "write the JSON report here instead of stdout");

  CLI::App* report = app.add_subcommand("report", "merge run outputs into figure tables");
  report->add_option("--out", flags.out_dir, "output directory")->required();
  report->add_option("inputs", report_inputs, "run/sweep output directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) {
      auto config = load(flags);
      std::string digest = ngd::experiment::write_gen_data(config, flags.out_dir);
      std::cout << "dataset digest: " << digest << "\n";
    } else if (run->parsed()) {
      auto config = load(flags);
      auto result = ngd::experiment::run_experiment(config, effective_workers(flags.workers));
      ngd::experiment::write_experiment(result, flags.out_dir);
      std::cout << "wrote " << flags.out_dir << " (config " << config.digest() << ")\n";
    } else if (sweep->parsed()) {
      auto config = load(flags);
      auto result =
          ngd::experiment::run_sweep_degree(config, degrees, effective_workers(flags.workers));
      ngd::experiment::write_sweep(result, flags.out_dir);
      std::cout << "wrote " << flags.out_dir << " (config " << config.digest() << ")\n";
    } else if (diagnose->parsed()) {
      auto config = load(flags);
      std::string json = ngd::experiment::diagnose_json(config);
      if (diagnose_out.empty()) {
        std::cout << json;
      } else {
        std::ofstream out(diagnose_out, std::ios::binary);
        if (!out) throw ngd::IoError("cannot open for writing: " + diagnose_out);
        out << json;
      }
    } else if (report->parsed()) {
      std::vector<std::filesystem::path> inputs(report_inputs.begin(), report_inputs.end());
      ngd::experiment::write_report(inputs, flags.out_dir);
      std::cout << "wrote " << flags.out_dir << "\n";
    }
  } catch (const ngd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ngd::InvalidArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ngd::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ngd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
