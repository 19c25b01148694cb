#pragma once

#include "funcnet/network.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace funcnet {

using Rng = std::mt19937_64;

/// Independent stream for (seed, a, b), e.g. (trial seed, epoch, sample index).
/// Streams do not depend on thread scheduling.
Rng make_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

/// One committed source index per row. choices[layer][row]; the last layer
/// holds the output rows.
struct SampledDag {
  std::vector<std::vector<int>> choices;

  std::span<const int> output_choices() const { return choices.back(); }
  friend bool operator==(const SampledDag&, const SampledDag&) = default;
};

using RowMask = std::vector<std::vector<char>>;

bool is_valid(const Network& network, const SampledDag& dag);

/// Rows reached by backtracking from the given outputs (all outputs if empty).
RowMask reachable_rows(const Network& network, const SampledDag& dag,
                       std::span<const int> outputs = {});

/// True when some row reachable from `output` selects a raw input.
bool reads_inputs(const Network& network, const SampledDag& dag, int output);

/// Read-only snapshot of q(.|W): cached per-row probabilities so that many
/// draws and likelihood queries share one softmax pass. Keeps a reference to
/// the network; the network must outlive it and not change while in use.
class DagDistribution {
 public:
  explicit DagDistribution(const Network& network);

  const Network& network() const { return *network_; }
  const Eigen::VectorXd& probabilities() const { return probabilities_; }
  const Eigen::VectorXd& log_probabilities() const { return log_probabilities_; }

  SampledDag sample(Rng& rng) const;

  /// Sum of log p over rows reachable from `outputs`, each row once.
  double log_probability(const SampledDag& dag, std::span<const int> outputs = {}) const;

 private:
  const Network* network_;
  Eigen::VectorXd probabilities_;
  Eigen::VectorXd log_probabilities_;
  Eigen::VectorXd cumulative_;
};

SampledDag sample(const Network& network, Rng& rng);
double log_probability(const Network& network, const SampledDag& dag,
                       std::span<const int> outputs = {});

/// Sparse forward pass over the reachable subgraph. `inputs` is batch x
/// input_count; the result is batch x output_count with NaN sentinels.
Eigen::MatrixXd evaluate(const Network& network, const SampledDag& dag,
                         const Eigen::MatrixXd& inputs);

/// f, f∘f, ..., f^∘depth applied to `inputs`. Requires output_count == input_count.
std::vector<Eigen::MatrixXd> evaluate_recurrent(const Network& network, const SampledDag& dag,
                                                const Eigen::MatrixXd& inputs, int depth);

/// Per-row argmax; ties go to the lowest source index.
SampledDag most_likely_dag(const Network& network);

/// "dag <layers>" header followed by one "layer row index" line per row.
std::string to_text(const SampledDag& dag);
SampledDag dag_from_text(std::string_view text);

}  // namespace funcnet
