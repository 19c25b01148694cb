#include "funcnet/sampler.hpp"

#include "funcnet/errors.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace funcnet {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int> all_outputs(const Network& network) {
  std::vector<int> out(network.config().output_count);
  for (int i = 0; i < static_cast<int>(out.size()); ++i) out[i] = i;
  return out;
}

void mark_source(const Network& net, const SampledDag& dag, int layer, int index, RowMask& mask) {
  const SourceRef src = net.source(layer, index);
  if (src.kind != SourceRef::Kind::Image) return;
  const int begin = net.argument_begin(src.index);
  const int arity = net.config().bases[src.index].arity;
  for (int r = begin; r < begin + arity; ++r) {
    if (mask[src.layer][r]) continue;
    mask[src.layer][r] = 1;
    mark_source(net, dag, src.layer, dag.choices[src.layer][r], mask);
  }
}

class SparseForward {
 public:
  SparseForward(const Network& net, const SampledDag& dag, const Eigen::MatrixXd& inputs)
      : net_(net), dag_(dag), images_(net.depth()) {
    const auto& cfg = net.config();
    if (inputs.cols() != cfg.input_count) {
      throw std::invalid_argument("input batch has " + std::to_string(inputs.cols()) +
                                  " columns, network expects " + std::to_string(cfg.input_count));
    }
    leaves_.reserve(cfg.leaf_count());
    for (int i = 0; i < cfg.input_count; ++i) leaves_.push_back(inputs.col(i).array());
    for (double c : cfg.constants) leaves_.push_back(Eigen::ArrayXd::Constant(inputs.rows(), c));
    for (auto& layer : images_) layer.resize(cfg.image_count());
  }

  Eigen::MatrixXd run() {
    const int v = net_.config().output_count;
    Eigen::MatrixXd out(leaves_.empty() ? 0 : leaves_.front().size(), v);
    for (int o = 0; o < v; ++o) {
      out.col(o) = source_value(net_.output_layer(), dag_.choices[net_.output_layer()][o]).matrix();
    }
    return out;
  }

 private:
  const Eigen::ArrayXd& source_value(int layer, int index) {
    const SourceRef src = net_.source(layer, index);
    switch (src.kind) {
      case SourceRef::Kind::Input: return leaves_[src.index];
      case SourceRef::Kind::Constant: return leaves_[net_.config().input_count + src.index];
      case SourceRef::Kind::Image: break;
    }
    auto& slot = images_[src.layer][src.index];
    if (!slot) {
      const auto& basis = net_.config().bases[src.index];
      const int begin = net_.argument_begin(src.index);
      std::vector<const Eigen::ArrayXd*> args;
      args.reserve(basis.arity);
      for (int r = begin; r < begin + basis.arity; ++r) {
        args.push_back(&source_value(src.layer, dag_.choices[src.layer][r]));
      }
      slot = eval_basis(basis, args);
    }
    return *slot;
  }

  const Network& net_;
  const SampledDag& dag_;
  std::vector<Eigen::ArrayXd> leaves_;
  std::vector<std::vector<std::optional<Eigen::ArrayXd>>> images_;
};

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t s = splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
  return Rng(s);
}

bool is_valid(const Network& network, const SampledDag& dag) {
  if (static_cast<int>(dag.choices.size()) != network.depth() + 1) return false;
  for (int layer = 0; layer <= network.depth(); ++layer) {
    if (static_cast<int>(dag.choices[layer].size()) != network.row_count(layer)) return false;
    for (int c : dag.choices[layer]) {
      if (c < 0 || c >= network.source_count(layer)) return false;
    }
  }
  return true;
}

RowMask reachable_rows(const Network& network, const SampledDag& dag, std::span<const int> outputs) {
  RowMask mask(network.depth() + 1);
  for (int layer = 0; layer <= network.depth(); ++layer) mask[layer].assign(network.row_count(layer), 0);
  const std::vector<int> everything = outputs.empty() ? all_outputs(network) : std::vector<int>{};
  if (outputs.empty()) outputs = everything;
  const int out_layer = network.output_layer();
  for (int o : outputs) {
    if (mask[out_layer][o]) continue;
    mask[out_layer][o] = 1;
    mark_source(network, dag, out_layer, dag.choices[out_layer][o], mask);
  }
  return mask;
}

bool reads_inputs(const Network& network, const SampledDag& dag, int output) {
  const int outs[] = {output};
  const RowMask mask = reachable_rows(network, dag, outs);
  for (int layer = 0; layer <= network.depth(); ++layer) {
    for (int r = 0; r < network.row_count(layer); ++r) {
      if (mask[layer][r] && network.source(layer, dag.choices[layer][r]).kind == SourceRef::Kind::Input) return true;
    }
  }
  return false;
}

DagDistribution::DagDistribution(const Network& network)
    : network_(&network),
      probabilities_(network.probabilities()),
      log_probabilities_(network.log_probabilities()),
      cumulative_(probabilities_.size()) {
  for (int layer = 0; layer <= network.depth(); ++layer) {
    for (int r = 0; r < network.row_count(layer); ++r) {
      const Eigen::Index off = network.row_offset(layer, r);
      double acc = 0.0;
      for (int k = 0; k < network.source_count(layer); ++k) {
        acc += probabilities_(off + k);
        cumulative_(off + k) = acc;
      }
    }
  }
}

SampledDag DagDistribution::sample(Rng& rng) const {
  const Network& net = *network_;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  SampledDag dag;
  dag.choices.resize(net.depth() + 1);
  for (int layer = 0; layer <= net.depth(); ++layer) {
    const int n = net.source_count(layer);
    auto& row_choices = dag.choices[layer];
    row_choices.resize(net.row_count(layer));
    for (int r = 0; r < net.row_count(layer); ++r) {
      const double* begin = cumulative_.data() + net.row_offset(layer, r);
      const double target = uniform(rng) * begin[n - 1];
      const double* hit = std::upper_bound(begin, begin + n, target);
      row_choices[r] = static_cast<int>(std::min<std::ptrdiff_t>(hit - begin, n - 1));
    }
  }
  return dag;
}

double DagDistribution::log_probability(const SampledDag& dag, std::span<const int> outputs) const {
  const Network& net = *network_;
  const RowMask mask = reachable_rows(net, dag, outputs);
  double total = 0.0;
  for (int layer = 0; layer <= net.depth(); ++layer) {
    for (int r = 0; r < net.row_count(layer); ++r) {
      if (mask[layer][r]) total += log_probabilities_(net.row_offset(layer, r) + dag.choices[layer][r]);
    }
  }
  return total;
}

SampledDag sample(const Network& network, Rng& rng) { return DagDistribution(network).sample(rng); }

double log_probability(const Network& network, const SampledDag& dag, std::span<const int> outputs) {
  return DagDistribution(network).log_probability(dag, outputs);
}

Eigen::MatrixXd evaluate(const Network& network, const SampledDag& dag, const Eigen::MatrixXd& inputs) {
  return SparseForward(network, dag, inputs).run();
}

std::vector<Eigen::MatrixXd> evaluate_recurrent(const Network& network, const SampledDag& dag,
                                                const Eigen::MatrixXd& inputs, int depth) {
  if (depth < 1) throw std::invalid_argument("recurrence depth must be >= 1");
  if (network.config().output_count != network.config().input_count) {
    throw std::invalid_argument("recurrent evaluation needs as many outputs as inputs");
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(depth);
  out.push_back(evaluate(network, dag, inputs));
  for (int d = 1; d < depth; ++d) out.push_back(evaluate(network, dag, out.back()));
  return out;
}

SampledDag most_likely_dag(const Network& network) {
  SampledDag dag;
  dag.choices.resize(network.depth() + 1);
  for (int layer = 0; layer <= network.depth(); ++layer) {
    for (int r = 0; r < network.row_count(layer); ++r) {
      const auto w = network.row(layer, r);
      int best = 0;
      for (int k = 1; k < w.size(); ++k) {
        if (w(k) > w(best)) best = k;
      }
      dag.choices[layer].push_back(best);
    }
  }
  return dag;
}

std::string to_text(const SampledDag& dag) {
  std::ostringstream out;
  out << "dag " << dag.choices.size() << '\n';
  for (std::size_t layer = 0; layer < dag.choices.size(); ++layer) {
    for (std::size_t r = 0; r < dag.choices[layer].size(); ++r) {
      out << layer << ' ' << r << ' ' << dag.choices[layer][r] << '\n';
    }
  }
  return out.str();
}

SampledDag dag_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag;
  std::size_t layers = 0;
  if (!(in >> tag >> layers) || tag != "dag") throw LoadError("dag text: missing 'dag' header");
  SampledDag dag;
  dag.choices.resize(layers);
  std::size_t layer, row;
  int index;
  while (in >> layer >> row >> index) {
    if (layer >= layers) throw LoadError("dag text: layer out of range");
    auto& rows = dag.choices[layer];
    if (row != rows.size()) throw LoadError("dag text: rows must be listed in order");
    rows.push_back(index);
  }
  if (!in.eof()) throw LoadError("dag text: malformed triple");
  return dag;
}

}  // namespace funcnet
