#include "funcnet/data.hpp"
#include "funcnet/errors.hpp"
#include "funcnet/experiment.hpp"
#include "funcnet/network.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace funcnet;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailure = 2;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> max_epochs;
  std::optional<int> threads;
  std::string out = "results";
  bool parallel_trials = false;
  bool quiet = false;

  RunOptions options() const {
    RunOptions o;
    o.seed = seed;
    o.trials = trials;
    o.max_epochs = max_epochs;
    o.threads = threads;
    o.output_dir = out;
    o.parallel_trials = parallel_trials;
    if (!quiet) o.log = [](const std::string& line) { std::cerr << line << '\n'; };
    return o;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Base seed; trial k uses seed + k");
  cmd->add_option("--trials", c.trials, "Override the trial count")->check(CLI::PositiveNumber);
  cmd->add_option("--max-epochs", c.max_epochs, "Override the epoch cap")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", c.threads, "Worker threads for candidate evaluation")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_flag("--parallel-trials", c.parallel_trials, "Run trials concurrently");
  cmd->add_flag("-q,--quiet", c.quiet, "No per-trial log lines");
}

void print_report(const ExperimentReport& r) {
  std::cout << r.name << ": eta=" << r.eta;
  if (r.median_epochs) std::cout << " median_Tc=" << *r.median_epochs;
  if (r.median_accuracy) std::cout << " median_accuracy=" << *r.median_accuracy;
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trains sparse symbolic networks by sampling and fitness-weighted likelihood."};
  app.require_subcommand(1);

  Common common;
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every trial of one experiment config");
  run->add_option("config", config_path, "Experiment .ini file")->required()->check(CLI::ExistingFile);
  add_common(run, common);

  std::string weights_path;
  auto* extract = app.add_subcommand("extract", "Print the most likely expression of a saved network");
  extract->add_option("weights", weights_path, "Saved network file")->required()->check(CLI::ExistingFile);

  std::string config_dir;
  bool extended = false;
  auto* bench = app.add_subcommand("bench", "Run every config in a directory");
  bench->add_option("config-dir", config_dir, "Directory of .ini files")->required()->check(CLI::ExistingDirectory);
  bench->add_flag("--extended", extended, "Include long-running configs");
  add_common(bench, common);

  std::string data_config;
  std::int64_t rows = 1000;
  std::string data_out;
  std::uint64_t data_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Write a sample dataset of a config's target as CSV");
  gen->add_option("config", data_config, "Experiment .ini file")->required()->check(CLI::ExistingFile);
  gen->add_option("--rows", rows, "Number of rows")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--seed", data_seed, "Seed")->capture_default_str();
  gen->add_option("--out", data_out, "Output file (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) {
      const auto config = load_experiment_config(config_path);
      print_report(run_experiment(config, common.options()));
    } else if (*extract) {
      const Network net = load_network(weights_path);
      for (const auto& e : extract_expressions(net)) std::cout << e << '\n';
    } else if (*bench) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(config_dir)) {
        if (entry.path().extension() == ".ini") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<ExperimentConfig> configs;
      for (const auto& f : files) configs.push_back(load_experiment_config(f.string()));
      for (const auto& c : configs) {
        if (c.extended && !extended) {
          std::cout << c.name << ": skipped (extended)\n";
          continue;
        }
        print_report(run_experiment(c, common.options()));
      }
    } else if (*gen) {
      const auto config = load_experiment_config(data_config);
      if (config.target.kind == TargetKind::Classification) {
        throw ConfigError("gen-data does not apply to classification targets");
      }
      const Dataset d = generate(config.target, rows, data_seed);
      if (data_out.empty()) {
        write_csv(d, std::cout);
      } else {
        std::ofstream out(data_out);
        if (!out) throw std::runtime_error("cannot write " + data_out);
        write_csv(d, out);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kInvalid;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
