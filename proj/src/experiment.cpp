#include "funcnet/experiment.hpp"

#include "funcnet/benchmarks.hpp"
#include "funcnet/errors.hpp"
#include "funcnet/expression.hpp"

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace funcnet {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double parse_real(const std::string& token, const std::string& key) {
  if (token == "pi") return std::numbers::pi;
  if (token == "e") return std::numbers::e;
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + token + "' is not a number");
  }
}

template <typename T>
std::optional<T> get(const pt::ptree& tree, const std::string& path) {
  auto node = tree.get_optional<std::string>(path);
  if (!node) return std::nullopt;
  try {
    return boost::lexical_cast<T>(*node);
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError("key '" + path + "': cannot parse '" + *node + "'");
  }
}

std::optional<bool> get_bool(const pt::ptree& tree, const std::string& path) {
  auto node = tree.get_optional<std::string>(path);
  if (!node) return std::nullopt;
  if (*node == "true" || *node == "1" || *node == "yes" || *node == "on") return true;
  if (*node == "false" || *node == "0" || *node == "no" || *node == "off") return false;
  throw ConfigError("key '" + path + "': expected a boolean, got '" + *node + "'");
}

TargetKind parse_kind(const std::string& s) {
  if (s == "explicit") return TargetKind::Explicit;
  if (s == "implicit") return TargetKind::Implicit;
  if (s == "recurrent") return TargetKind::Recurrent;
  if (s == "classification") return TargetKind::Classification;
  throw ConfigError("unknown target kind '" + s + "'");
}

Expression parse_config_expression(const std::string& text, const std::string& key) {
  try {
    return parse_expression(text);
  } catch (const ParseError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

void apply_target_section(const pt::ptree& tree, TargetSpec& t, const std::string& base_dir) {
  if (auto kind = get<std::string>(tree, "target.kind")) t.kind = parse_kind(*kind);
  if (auto expr = get<std::string>(tree, "target.expression")) {
    t.outputs.clear();
    for (const auto& part : split_on(*expr, ';')) {
      t.outputs.push_back(parse_config_expression(part, "target.expression"));
    }
  }
  const int inputs = get<int>(tree, "target.inputs").value_or(static_cast<int>(t.ranges.size()));
  if (auto range = get<std::string>(tree, "target.range")) {
    t.ranges.clear();
    for (const auto& part : split_on(*range, ',')) {
      const auto w = words(part);
      if (w.size() != 2) throw ConfigError("key 'target.range': expected 'lo hi' pairs separated by ','");
      t.ranges.push_back({parse_real(w[0], "target.range"), parse_real(w[1], "target.range"), {}});
    }
    const int want = t.kind == TargetKind::Implicit ? inputs : std::max(inputs, 1);
    if (t.ranges.size() == 1 && want > 1) t.ranges.assign(want, t.ranges.front());
  }
  if (auto values = get<std::string>(tree, "target.values")) {
    DomainAxis axis;
    for (const auto& w : words(*values)) axis.values.push_back(parse_real(w, "target.values"));
    if (axis.values.empty()) throw ConfigError("key 'target.values' is empty");
    axis.lo = *std::min_element(axis.values.begin(), axis.values.end());
    axis.hi = *std::max_element(axis.values.begin(), axis.values.end());
    t.ranges.assign(std::max(inputs, 1), axis);
  }
  if (auto d = get<int>(tree, "target.recurrence_depth")) t.recurrence_depth = *d;
  if (auto c = get<std::string>(tree, "target.constraint")) {
    t.constraint = parse_config_expression(*c, "target.constraint");
  }
  if (auto v = get<double>(tree, "target.implicit_value")) t.implicit_value = *v;
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
  };
  if (auto p = get<std::string>(tree, "target.images")) t.images_path = resolve(*p);
  if (auto p = get<std::string>(tree, "target.labels")) t.labels_path = resolve(*p);
  if (auto c = get<std::string>(tree, "target.classes")) {
    t.classes.clear();
    for (const auto& w : words(*c)) t.classes.push_back(static_cast<int>(parse_real(w, "target.classes")));
  }
  if (auto f = get<double>(tree, "target.test_fraction")) t.test_fraction = *f;
}

RankOrder parse_rank_order(const std::string& s) {
  if (s == "decreasing") return RankOrder::Decreasing;
  if (s == "increasing") return RankOrder::Increasing;
  throw ConfigError("rank_order must be 'decreasing' or 'increasing'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
  target.validate();
  network.validate();
  if (target.kind != TargetKind::Classification) {
    if (network.input_count != target.input_count()) throw ConfigError("network inputs differ from target inputs");
  }
  if (network.output_count != target.output_count()) throw ConfigError("network outputs differ from target outputs");
  training.validate(network.output_count);
  if (training.recurrence_depth > 1 && network.input_count != network.output_count) {
    throw ConfigError("recurrence needs as many outputs as inputs");
  }
}

ExperimentConfig parse_experiment_config(std::istream& in, const std::string& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  ExperimentConfig c;
  c.name = get<std::string>(tree, "experiment.name").value_or("experiment");
  c.trials = get<int>(tree, "experiment.trials").value_or(c.trials);
  c.fixed_dataset = get_bool(tree, "experiment.fixed_dataset").value_or(false);
  c.dataset_size = get<int>(tree, "experiment.dataset_size").value_or(0);
  c.tolerance = get<double>(tree, "experiment.tolerance").value_or(c.tolerance);
  c.extended = get_bool(tree, "experiment.extended").value_or(false);

  if (auto bench = get<std::string>(tree, "target.benchmark")) {
    c.target = benchmark_target(*bench);
  } else if (!tree.get_optional<std::string>("target.expression") &&
             !tree.get_optional<std::string>("target.constraint") &&
             !tree.get_optional<std::string>("target.classes")) {
    throw ConfigError("[target] needs 'benchmark' or an inline 'expression'");
  }
  apply_target_section(tree, c.target, base_dir);
  if (c.target.name.empty()) c.target.name = c.name;

  auto& n = c.network;
  const auto bases = get<std::string>(tree, "network.bases");
  if (!bases) throw ConfigError("[network] needs 'bases'");
  for (const auto& name : words(*bases)) n.bases.push_back(basis_by_name(name));
  if (auto cs = get<std::string>(tree, "network.constants")) {
    for (const auto& w : words(*cs)) n.constants.push_back(parse_real(w, "network.constants"));
  }
  n.depth = get<int>(tree, "network.depth").value_or(n.depth);
  n.temperature = get<double>(tree, "network.temperature").value_or(n.temperature);
  n.last_temperature = get<double>(tree, "network.last_temperature").value_or(n.last_temperature);
  n.skip_connections = get_bool(tree, "network.skip_connections").value_or(true);
  n.output_count = c.target.output_count();
  n.input_count = c.target.kind == TargetKind::Classification
                      ? get<int>(tree, "target.inputs").value_or(784)
                      : c.target.input_count();

  auto& t = c.training;
  t.samples = get<int>(tree, "training.samples").value_or(t.samples);
  t.truncation = get<int>(tree, "training.truncation").value_or(t.truncation);
  t.variance = get<double>(tree, "training.variance").value_or(t.variance);
  t.learning_rate = get<double>(tree, "training.learning_rate").value_or(t.learning_rate);
  t.beta1 = get<double>(tree, "training.beta1").value_or(t.beta1);
  t.beta2 = get<double>(tree, "training.beta2").value_or(t.beta2);
  t.epsilon = get<double>(tree, "training.epsilon").value_or(t.epsilon);
  t.max_epochs = get<int>(tree, "training.max_epochs").value_or(t.max_epochs);
  t.patience = get<int>(tree, "training.patience").value_or(t.patience);
  t.recurrence_depth = get<int>(tree, "training.recurrence_depth").value_or(t.recurrence_depth);
  t.rank_reweight = get_bool(tree, "training.rank_reweight").value_or(false);
  if (auto order = get<std::string>(tree, "training.rank_order")) t.rank_order = parse_rank_order(*order);
  t.depth_scaled_log_prob = get_bool(tree, "training.depth_scaled_log_prob").value_or(true);
  t.reject_input_free = get_bool(tree, "training.reject_input_free").value_or(false);
  t.batch_size = get<int>(tree, "training.batch_size").value_or(t.batch_size);
  t.seed = get<std::uint64_t>(tree, "training.seed").value_or(t.seed);
  t.threads = get<int>(tree, "training.threads").value_or(t.threads);

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  const auto dir = fs::path(path).parent_path();
  return parse_experiment_config(in, dir.empty() ? "." : dir.string());
}

// ---------------------------------------------------------------------------
// Trials

namespace {

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

bool all_discrete(const std::vector<DomainAxis>& domain) {
  return std::all_of(domain.begin(), domain.end(), [](const DomainAxis& a) { return a.discrete(); });
}

struct Judgement {
  bool equivalent = false;
  int depth = 1;
};

Judgement judge(const ExperimentConfig& config, const Network& net, const SampledDag& dag,
                const std::vector<Expression>& learned, std::uint64_t seed) {
  const TargetSpec& target = config.target;
  const auto domain = target.input_domain();
  const double tol = all_discrete(domain) ? 0.0 : config.tolerance;
  Judgement j;

  switch (target.kind) {
    case TargetKind::Explicit: {
      const auto reference = target.reference_expressions();
      j.equivalent = true;
      for (std::size_t o = 0; o < learned.size(); ++o) {
        j.equivalent = j.equivalent && numeric_equivalent(learned[o], reference[o], domain, tol);
      }
      return j;
    }
    case TargetKind::Recurrent: {
      // The recurrence depth is the one the trained function fits best on fresh data.
      const Dataset probe = generate(target, 1000, seed ^ 0xdeb7);
      const auto outs = evaluate_recurrent(net, dag, probe.inputs, config.training.recurrence_depth);
      double best = -1.0;
      for (int d = 0; d < static_cast<int>(outs.size()); ++d) {
        double k = 0.0;
        for (Eigen::Index o = 0; o < probe.targets.cols(); ++o) {
          k += fitness(outs[d].col(o).array(), probe.targets.col(o).array(), config.training.variance);
        }
        if (k > best) {
          best = k;
          j.depth = d + 1;
        }
      }
      std::vector<Expression> composed = learned;
      for (int d = 1; d < j.depth; ++d) {
        std::vector<Expression> next;
        for (const auto& f : learned) next.push_back(substitute(f, composed));
        composed = std::move(next);
      }
      const auto reference = target.reference_expressions();
      j.equivalent = true;
      for (std::size_t o = 0; o < composed.size(); ++o) {
        j.equivalent = j.equivalent && numeric_equivalent(composed[o], reference[o], domain, tol);
      }
      return j;
    }
    case TargetKind::Implicit: {
      // Must hold on the constraint surface without collapsing to a constant.
      if (!depends_on_inputs(learned.front())) return j;
      const Dataset probe = generate(target, 1000, seed ^ 0x1a91);
      const Eigen::ArrayXd values = evaluate(learned.front(), probe.inputs);
      const double want = target.implicit_value;
      j.equivalent = (values.isFinite() &&
                      (values - want).abs() <= config.tolerance * std::max(1.0, std::abs(want)))
                         .all();
      return j;
    }
    case TargetKind::Classification: return j;
  }
  return j;
}

TrialResult run_trial_with(const ExperimentConfig& config, int trial, std::uint64_t seed,
                           const std::string& output_dir, const std::pair<Dataset, Dataset>* labelled) {
  TrainConfig training = config.training;
  training.seed = seed;
  const TargetSpec& target = config.target;

  BatchProvider batches;
  std::optional<Dataset> fixed;
  if (labelled) {
    const Dataset& train_rows = labelled->first;
    batches = [&train_rows, seed, n = training.batch_size](int epoch) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(epoch), 0xba7c);
      std::uniform_int_distribution<Eigen::Index> pick(0, train_rows.size() - 1);
      std::vector<Eigen::Index> rows(n);
      for (auto& r : rows) r = pick(rng);
      return train_rows.subset(rows);
    };
  } else if (config.fixed_dataset) {
    fixed = generate(target, config.dataset_size > 0 ? config.dataset_size : training.batch_size, seed);
    batches = [&fixed](int) { return *fixed; };
  } else {
    batches = [&target, seed, n = training.batch_size](int epoch) {
      return generate(target, n, seed ^ (static_cast<std::uint64_t>(epoch) << 20));
    };
  }

  std::ofstream epoch_log;
  if (!output_dir.empty()) {
    epoch_log.open(fs::path(output_dir) / (config.name + "_trial" + std::to_string(trial) + "_epochs.csv"));
    epoch_log << "epoch";
    for (int o = 0; o < config.network.output_count; ++o) epoch_log << ",best_fitness_" << o;
    epoch_log << ",mean_selected_fitness,expression\n";
    epoch_log << std::setprecision(12);
  }
  EpochObserver observer;
  if (epoch_log.is_open()) {
    observer = [&epoch_log](const TrainRun& run, const EpochStats& stats) {
      epoch_log << stats.epoch;
      for (double k : stats.best_fitness) epoch_log << ',' << k;
      epoch_log << ',' << stats.mean_selected_fitness << ','
                << csv_quote(join(extract_expressions(run.network), "; ")) << '\n';
    };
  }

  const TrainRun run = train(Network(config.network), batches, training, observer);

  TrialResult result;
  result.trial = trial;
  result.seed = seed;
  result.verdict = run.verdict;
  result.epochs = run.converged_epoch;

  const SampledDag best = most_likely_dag(run.network);
  std::vector<Expression> learned;
  for (int o = 0; o < config.network.output_count; ++o) {
    learned.push_back(simplify(dag_to_expression(run.network, best, o)));
    result.expressions.push_back(to_string(learned.back()));
  }
  result.constant_only = std::none_of(learned.begin(), learned.end(),
                                      [](const Expression& e) { return depends_on_inputs(e); });

  if (labelled) {
    result.accuracy = classification_accuracy(run.network, best, labelled->second);
  } else {
    const Judgement j = judge(config, run.network, best, learned, seed);
    result.equivalent = j.equivalent;
    result.recurrence_depth = j.depth;
  }

  if (!output_dir.empty()) {
    save_network(run.network,
                 (fs::path(output_dir) / (config.name + "_trial" + std::to_string(trial) + ".weights")).string());
  }
  return result;
}

std::pair<Dataset, Dataset> load_labelled(const ExperimentConfig& config, std::uint64_t seed) {
  const auto& t = config.target;
  Dataset all = load_idx(t.images_path, t.labels_path, t.classes);
  return split(all, t.test_fraction, seed);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base, int trial) { return base + static_cast<std::uint64_t>(trial); }

TrialResult run_trial(const ExperimentConfig& config, int trial, std::uint64_t seed,
                      const std::string& output_dir) {
  config.validate();
  if (config.target.kind == TargetKind::Classification) {
    const auto labelled = load_labelled(config, seed);
    return run_trial_with(config, trial, seed, output_dir, &labelled);
  }
  return run_trial_with(config, trial, seed, output_dir, nullptr);
}

ExperimentReport run_experiment(ExperimentConfig config, const RunOptions& options) {
  if (options.trials) config.trials = *options.trials;
  if (options.max_epochs) config.training.max_epochs = *options.max_epochs;
  if (options.threads) config.training.threads = *options.threads;
  if (options.seed) config.training.seed = *options.seed;
  config.validate();
  if (!options.output_dir.empty()) fs::create_directories(options.output_dir);

  std::optional<std::pair<Dataset, Dataset>> labelled;
  if (config.target.kind == TargetKind::Classification) {
    labelled = load_labelled(config, config.training.seed);
  }

  ExperimentReport report;
  report.name = config.name;
  report.timestamp = utc_timestamp();
  report.trials.resize(config.trials);

  auto one = [&](int k, const ExperimentConfig& cfg) {
    report.trials[k] = run_trial_with(cfg, k, trial_seed(cfg.training.seed, k), options.output_dir,
                                      labelled ? &*labelled : nullptr);
  };
  if (options.parallel_trials) {
    ExperimentConfig serial = config;
    serial.training.threads = 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int k = 0; k < config.trials; ++k) one(k, serial);
  } else {
    for (int k = 0; k < config.trials; ++k) {
      one(k, config);
      if (options.log) {
        const auto& r = report.trials[k];
        options.log(config.name + " trial " + std::to_string(k) + ": " + to_string(r.verdict) + " after " +
                    std::to_string(r.epochs) + " epochs, " + join(r.expressions, "; ") +
                    (r.accuracy ? ", accuracy " + std::to_string(*r.accuracy)
                                : (r.equivalent ? ", correct" : ", incorrect")));
      }
    }
  }

  int good = 0;
  std::vector<double> epochs;
  std::vector<double> accuracies;
  for (const auto& r : report.trials) {
    if (r.verdict == Verdict::Converged) {
      epochs.push_back(r.epochs);
      if (r.equivalent) ++good;
    }
    if (r.accuracy) accuracies.push_back(*r.accuracy);
  }
  report.eta = static_cast<double>(good) / static_cast<double>(config.trials);
  report.median_epochs = median(epochs);
  report.median_accuracy = median(accuracies);

  if (!options.output_dir.empty()) {
    std::ofstream csv(fs::path(options.output_dir) / (config.name + "_report.csv"));
    write_report_csv(report, csv);
    std::ofstream json(fs::path(options.output_dir) / (config.name + "_summary.json"));
    write_report_json(report, json);
  }
  return report;
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  const bool with_accuracy = std::any_of(report.trials.begin(), report.trials.end(),
                                         [](const TrialResult& r) { return r.accuracy.has_value(); });
  out << "trial,seed,verdict,T_c,expression,equivalent" << (with_accuracy ? ",accuracy" : "") << '\n';
  for (const auto& r : report.trials) {
    out << r.trial << ',' << r.seed << ',' << to_string(r.verdict) << ',' << r.epochs << ','
        << csv_quote(join(r.expressions, "; ")) << ',' << (r.equivalent ? "true" : "false");
    if (with_accuracy) out << ',' << std::setprecision(6) << r.accuracy.value_or(0.0);
    out << '\n';
  }
}

void write_report_json(const ExperimentReport& report, std::ostream& out) {
  nlohmann::json j;
  j["name"] = report.name;
  j["eta"] = report.eta;
  j["median_Tc"] = report.median_epochs ? nlohmann::json(*report.median_epochs) : nlohmann::json(nullptr);
  j["median_accuracy"] =
      report.median_accuracy ? nlohmann::json(*report.median_accuracy) : nlohmann::json(nullptr);
  j["timestamp"] = report.timestamp;
  j["trials"] = nlohmann::json::array();
  for (const auto& r : report.trials) {
    nlohmann::json t{{"trial", r.trial},
                     {"seed", r.seed},
                     {"verdict", to_string(r.verdict)},
                     {"T_c", r.epochs},
                     {"expressions", r.expressions},
                     {"equivalent", r.equivalent},
                     {"recurrence_depth", r.recurrence_depth},
                     {"constant_only", r.constant_only}};
    if (r.accuracy) t["accuracy"] = *r.accuracy;
    j["trials"].push_back(std::move(t));
  }
  out << j.dump(2) << '\n';
}

std::vector<std::string> extract_expressions(const Network& network) {
  const SampledDag best = most_likely_dag(network);
  std::vector<std::string> out;
  for (int o = 0; o < network.config().output_count; ++o) {
    out.push_back(to_string(simplify(dag_to_expression(network, best, o))));
  }
  return out;
}

}  // namespace funcnet
