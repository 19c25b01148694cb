#pragma once

#include "funcnet/data.hpp"
#include "funcnet/network.hpp"
#include "funcnet/trainer.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace funcnet {

struct ExperimentConfig {
  std::string name;
  TargetSpec target;
  NetworkConfig network;  // input/output counts are taken from the target
  TrainConfig training;
  int trials = 10;
  bool fixed_dataset = false;  // false: fresh batch every epoch
  int dataset_size = 0;        // fixed mode; 0 means batch_size
  double tolerance = 1e-6;     // relative; all-discrete domains compare exactly
  bool extended = false;       // long-running, skipped by `bench` unless asked

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// Parses the sectioned key-value format ([experiment], [target], [network],
/// [training]). Relative IDX paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(std::istream& in, const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  Verdict verdict = Verdict::Running;
  int epochs = 0;  // T_c
  std::vector<std::string> expressions;
  bool equivalent = false;
  int recurrence_depth = 1;         // depth whose composition was checked
  bool constant_only = false;       // every extracted output is input-free
  std::optional<double> accuracy;   // classification targets
};

struct ExperimentReport {
  std::string name;
  std::vector<TrialResult> trials;
  double eta = 0.0;                        // converged-and-correct / trials
  std::optional<double> median_epochs;     // over converged trials
  std::optional<double> median_accuracy;   // classification targets
  std::string timestamp;                   // excluded from reproducibility
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> max_epochs;
  std::optional<int> threads;
  std::string output_dir;  // empty: no files written
  bool parallel_trials = false;
  std::function<void(const std::string&)> log;
};

/// Seed of trial k: base seed + k.
std::uint64_t trial_seed(std::uint64_t base, int trial);

/// Trains one trial and judges it against the target.
TrialResult run_trial(const ExperimentConfig& config, int trial, std::uint64_t seed,
                      const std::string& output_dir = {});

ExperimentReport run_experiment(ExperimentConfig config, const RunOptions& options = {});

/// Columns: trial,seed,verdict,T_c,expression,equivalent (+accuracy for
/// classification).
void write_report_csv(const ExperimentReport& report, std::ostream& out);
/// {"name","eta","median_Tc","median_accuracy","timestamp","trials":[...]}
void write_report_json(const ExperimentReport& report, std::ostream& out);

/// Expressions of the most likely DAG, simplified, one per output.
std::vector<std::string> extract_expressions(const Network& network);

}  // namespace funcnet
