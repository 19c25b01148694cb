#pragma once

#include "funcnet/data.hpp"
#include "funcnet/network.hpp"
#include "funcnet/sampler.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace funcnet {

enum class RankOrder {
  Decreasing,  // best candidate keeps full weight (default)
  Increasing,  // literal reading: worst candidate keeps full weight
};

struct TrainConfig {
  int samples = 100;             // R
  int truncation = 5;            // λ, absolute count per output
  double variance = 0.01;        // σ² of the fitness kernel
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 2000;
  int patience = 30;
  int recurrence_depth = 1;      // D
  bool rank_reweight = false;
  RankOrder rank_order = RankOrder::Decreasing;
  /// Depth-d candidates contribute d * log q(dag); off means log q for all depths.
  bool depth_scaled_log_prob = true;
  /// Candidates whose output never reads an input score zero for that output.
  bool reject_input_free = false;
  int batch_size = 1000;
  std::uint64_t seed = 0;
  int threads = 0;               // 0: OpenMP default

  /// Optional (hidden, last) temperature per epoch; unset keeps them constant.
  std::function<std::pair<double, double>(int epoch)> temperature_schedule;

  void validate(int output_count) const;
};

struct AdamState {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  long step = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index n)
      : first(Eigen::VectorXd::Zero(n)), second(Eigen::VectorXd::Zero(n)) {}
};

/// Normalized RBF fitness summed over the batch. Sentinel predictions add 0.
double fitness(const Eigen::Ref<const Eigen::ArrayXd>& predicted,
               const Eigen::Ref<const Eigen::ArrayXd>& target, double variance);

/// Adds scale * d(-log q_output(dag))/dW into `gradient`, where q_output only
/// covers rows reachable from `output`. `probabilities` is the cached softmax
/// of every row (Network::probabilities()).
void accumulate_loss_gradient(const Network& network, const Eigen::VectorXd& probabilities,
                              const SampledDag& dag, int output, double scale,
                              Eigen::VectorXd& gradient);

/// -K * grad log q_output(dag | W) over all weights.
Eigen::VectorXd loss_gradient(const Network& network, const SampledDag& dag, double fitness_value,
                              int output);

struct Selection {
  int candidate;
  double fitness;

  friend bool operator==(const Selection&, const Selection&) = default;
};

/// Per output column, the `lambda` highest-fitness rows in decreasing order;
/// ties go to the lower row index. Throws ConfigError if lambda exceeds the
/// number of candidates.
std::vector<std::vector<Selection>> select_top(const Eigen::MatrixXd& fitness, int lambda);

/// Divides the rank-i value by i. Results stay aligned with the input order.
std::vector<double> rank_reweight(std::span<const double> selected,
                                  RankOrder order = RankOrder::Decreasing);

/// Bias-corrected Adam descent step.
void adam_step(Eigen::VectorXd& weights, const Eigen::VectorXd& gradient, AdamState& state,
               double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

enum class Verdict { Running, Converged, MaxEpochsExhausted };

const char* to_string(Verdict verdict);

struct Candidate {
  int sample;
  int depth;  // 1-based recurrence depth
};

struct EpochStats {
  int epoch = 0;
  std::vector<double> best_fitness;                  // per output
  double mean_selected_fitness = 0.0;
  std::vector<std::vector<double>> selected_fitness; // per output, decreasing
  std::vector<std::vector<Candidate>> selected;      // per output, same order
  std::vector<SampledDag> samples;
  int stable_streak = 0;
};

struct TrainRun {
  Network network;
  AdamState adam;
  std::deque<std::vector<std::vector<double>>> fitness_history;  // at most `patience` epochs
  int epoch = 0;
  Verdict verdict = Verdict::Running;
  int converged_epoch = 0;  // T_c: epochs run when training stopped
  int stable_streak = 0;

  explicit TrainRun(Network net) : network(std::move(net)), adam(network.parameter_count()) {}
};

/// One evolutionary-strategy step on `batch`: sample R DAGs, score every
/// (sample, depth) candidate per output, keep the top λ per output, apply the
/// summed fitness-weighted likelihood gradient through one Adam step, and
/// update the stop-criterion window.
EpochStats train_epoch(TrainRun& run, const Dataset& batch, const TrainConfig& config);

using BatchProvider = std::function<Dataset(int epoch)>;
using EpochObserver = std::function<void(const TrainRun&, const EpochStats&)>;

/// Runs train_epoch until the top-λ fitness stays uniform and unchanged for
/// `patience` epochs, or `max_epochs` is reached.
TrainRun train(Network network, const BatchProvider& batches, const TrainConfig& config,
               const EpochObserver& observer = {});

}  // namespace funcnet
