#include "funcnet/trainer.hpp"

#include "funcnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace funcnet {

void TrainConfig::validate(int output_count) const {
  if (samples < 1) throw ConfigError("sample count R must be >= 1");
  if (truncation < 1) throw ConfigError("truncation λ must be >= 1");
  if (recurrence_depth < 1) throw ConfigError("recurrence depth must be >= 1");
  if (truncation > samples * recurrence_depth) {
    throw ConfigError("truncation λ exceeds the R*D candidates per epoch");
  }
  if (!(variance > 0.0)) throw ConfigError("variance must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (recurrence_depth > 1 && output_count != 1) {
    throw ConfigError("recurrent training supports a single output only");
  }
}

double fitness(const Eigen::Ref<const Eigen::ArrayXd>& predicted,
               const Eigen::Ref<const Eigen::ArrayXd>& target, double variance) {
  if (predicted.size() != target.size()) throw std::invalid_argument("fitness: batch sizes differ");
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  const Eigen::ArrayXd diff = predicted - target;
  const Eigen::ArrayXd k = norm * (-diff.square() / (2.0 * variance)).exp();
  return predicted.isFinite().select(k, 0.0).sum();
}

void accumulate_loss_gradient(const Network& network, const Eigen::VectorXd& probabilities,
                              const SampledDag& dag, int output, double scale,
                              Eigen::VectorXd& gradient) {
  if (scale == 0.0) return;
  const int outputs[] = {output};
  const RowMask mask = reachable_rows(network, dag, outputs);
  for (int layer = 0; layer <= network.depth(); ++layer) {
    const double s = scale / network.temperature(layer);
    const int width = network.source_count(layer);
    for (int r = 0; r < network.row_count(layer); ++r) {
      if (!mask[layer][r]) continue;
      const Eigen::Index off = network.row_offset(layer, r);
      // d(-log p_j)/dw = (p - e_j) / T
      gradient.segment(off, width) += s * probabilities.segment(off, width);
      gradient(off + dag.choices[layer][r]) -= s;
    }
  }
}

Eigen::VectorXd loss_gradient(const Network& network, const SampledDag& dag, double fitness_value,
                              int output) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(network.parameter_count());
  accumulate_loss_gradient(network, network.probabilities(), dag, output, fitness_value, g);
  return g;
}

std::vector<std::vector<Selection>> select_top(const Eigen::MatrixXd& fitness, int lambda) {
  if (lambda < 1 || lambda > fitness.rows()) {
    throw ConfigError("cannot select " + std::to_string(lambda) + " of " +
                      std::to_string(fitness.rows()) + " candidates");
  }
  std::vector<std::vector<Selection>> out(fitness.cols());
  std::vector<int> order(fitness.rows());
  for (Eigen::Index o = 0; o < fitness.cols(); ++o) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + lambda, order.end(), [&](int a, int b) {
      const double fa = fitness(a, o);
      const double fb = fitness(b, o);
      return fa > fb || (fa == fb && a < b);
    });
    for (int i = 0; i < lambda; ++i) out[o].push_back({order[i], fitness(order[i], o)});
  }
  return out;
}

std::vector<double> rank_reweight(std::span<const double> selected, RankOrder order) {
  std::vector<std::size_t> idx(selected.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return order == RankOrder::Decreasing ? selected[a] > selected[b] : selected[a] < selected[b];
  });
  std::vector<double> out(selected.size());
  for (std::size_t rank = 0; rank < idx.size(); ++rank) {
    out[idx[rank]] = selected[idx[rank]] / static_cast<double>(rank + 1);
  }
  return out;
}

void adam_step(Eigen::VectorXd& weights, const Eigen::VectorXd& gradient, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon) {
  if (gradient.size() != weights.size() || state.first.size() != weights.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++state.step;
  state.first = beta1 * state.first + (1.0 - beta1) * gradient;
  state.second = beta2 * state.second + (1.0 - beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  weights.array() -= learning_rate * (state.first.array() / c1) /
                     ((state.second.array() / c2).sqrt() + epsilon);
}

const char* to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Running: return "running";
    case Verdict::Converged: return "converged";
    case Verdict::MaxEpochsExhausted: return "max-epochs-exhausted";
  }
  return "unknown";
}

namespace {

bool same_multiset(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t o = 0; o < a.size(); ++o) {
    if (a[o].size() != b[o].size()) return false;
    for (std::size_t i = 0; i < a[o].size(); ++i) {
      const double x = a[o][i];
      const double y = b[o][i];
      if (std::abs(x - y) > 1e-12 * std::max(std::abs(x), std::abs(y))) return false;
    }
  }
  return true;
}

// Every output's selected fitness values are identical and non-zero.
bool uniform_selection(const std::vector<std::vector<double>>& selected) {
  for (const auto& column : selected) {
    if (column.empty() || !(column.front() > 0.0)) return false;
    for (double k : column) {
      if (k != column.front()) return false;
    }
  }
  return true;
}

}  // namespace

EpochStats train_epoch(TrainRun& run, const Dataset& batch, const TrainConfig& config) {
  Network& net = run.network;
  const int v = net.config().output_count;
  const int depth = config.recurrence_depth;
  const int samples = config.samples;
  if (batch.size() == 0) throw std::invalid_argument("train_epoch: empty batch");
  if (batch.targets.cols() != v) throw std::invalid_argument("train_epoch: target width != outputs");

  ++run.epoch;
  if (config.temperature_schedule) {
    const auto [hidden, last] = config.temperature_schedule(run.epoch);
    net.set_temperatures(hidden, last);
  }

  const DagDistribution distribution(net);
  EpochStats stats;
  stats.epoch = run.epoch;
  stats.samples.resize(samples);
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(samples) * depth, v);

#ifdef _OPENMP
  const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (int r = 0; r < samples; ++r) {
    Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(run.epoch), static_cast<std::uint64_t>(r));
    stats.samples[r] = distribution.sample(rng);
    Eigen::MatrixXd current = batch.inputs;
    for (int d = 0; d < depth; ++d) {
      current = evaluate(net, stats.samples[r], current);
      for (int o = 0; o < v; ++o) {
        const bool dropped = config.reject_input_free && !reads_inputs(net, stats.samples[r], o);
        scores(static_cast<Eigen::Index>(r) * depth + d, o) =
            dropped ? 0.0 : fitness(current.col(o).array(), batch.targets.col(o).array(), config.variance);
      }
    }
  }

  const auto top = select_top(scores, config.truncation);
  Eigen::VectorXd gradient = Eigen::VectorXd::Zero(net.parameter_count());
  double selected_sum = 0.0;
  stats.best_fitness.resize(v);
  stats.selected_fitness.resize(v);
  stats.selected.resize(v);

  for (int o = 0; o < v; ++o) {
    std::vector<double> raw;
    for (const auto& s : top[o]) {
      raw.push_back(s.fitness);
      stats.selected[o].push_back({s.candidate / depth, s.candidate % depth + 1});
    }
    stats.best_fitness[o] = raw.front();
    stats.selected_fitness[o] = raw;
    selected_sum += std::accumulate(raw.begin(), raw.end(), 0.0);

    const std::vector<double> weights =
        config.rank_reweight ? rank_reweight(raw, config.rank_order) : raw;

    // Fixed accumulation order: ascending candidate index.
    std::vector<std::size_t> order(top[o].size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return top[o][a].candidate < top[o][b].candidate; });
    for (std::size_t i : order) {
      const Candidate c = stats.selected[o][i];
      const double multiplicity = config.depth_scaled_log_prob ? static_cast<double>(c.depth) : 1.0;
      accumulate_loss_gradient(net, distribution.probabilities(), stats.samples[c.sample], o,
                               weights[i] * multiplicity, gradient);
    }
  }
  stats.mean_selected_fitness = selected_sum / static_cast<double>(v * config.truncation);

  adam_step(net.weights(), gradient, run.adam, config.learning_rate, config.beta1, config.beta2,
            config.epsilon);

  // Stop criterion bookkeeping.
  if (!uniform_selection(stats.selected_fitness)) {
    run.stable_streak = 0;
  } else if (run.stable_streak > 0 && !run.fitness_history.empty() &&
             same_multiset(run.fitness_history.back(), stats.selected_fitness)) {
    ++run.stable_streak;
  } else {
    run.stable_streak = 1;
  }
  run.fitness_history.push_back(stats.selected_fitness);
  while (static_cast<int>(run.fitness_history.size()) > config.patience) run.fitness_history.pop_front();

  if (run.stable_streak >= config.patience) {
    run.verdict = Verdict::Converged;
    run.converged_epoch = run.epoch;
  } else if (run.epoch >= config.max_epochs) {
    run.verdict = Verdict::MaxEpochsExhausted;
    run.converged_epoch = run.epoch;
  }
  stats.stable_streak = run.stable_streak;
  return stats;
}

TrainRun train(Network network, const BatchProvider& batches, const TrainConfig& config,
               const EpochObserver& observer) {
  config.validate(network.config().output_count);
  TrainRun run(std::move(network));
  while (run.verdict == Verdict::Running) {
    const Dataset batch = batches(run.epoch + 1);
    const EpochStats stats = train_epoch(run, batch, config);
    if (observer) observer(run, stats);
  }
  return run;
}

}  // namespace funcnet
