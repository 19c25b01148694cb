#include "funcnet/network.hpp"

#include "funcnet/errors.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

namespace funcnet {

namespace {
constexpr const char* kMagic = "funcnet-network";
constexpr int kFormatVersion = 1;
}  // namespace

int NetworkConfig::argument_count() const {
  return std::accumulate(bases.begin(), bases.end(), 0,
                         [](int acc, const BasisFunction& b) { return acc + b.arity; });
}

void NetworkConfig::validate() const {
  if (depth < 1) throw ConfigError("network depth must be >= 1");
  if (bases.empty()) throw ConfigError("basis list must not be empty");
  if (input_count < 0) throw ConfigError("input count must be non-negative");
  if (leaf_count() < 1) throw ConfigError("network needs at least one input or constant");
  if (output_count < 1) throw ConfigError("output count must be >= 1");
  if (!(temperature > 0.0) || !(last_temperature > 0.0)) {
    throw ConfigError("temperatures must be positive");
  }
  for (double c : constants) {
    if (!std::isfinite(c)) throw ConfigError("constants must be finite");
  }
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  const int u = config_.leaf_count();
  const int n = config_.image_count();
  const int m = config_.argument_count();
  const int depth = config_.depth;

  int offset = 0;
  for (int i = 0; i < n; ++i) {
    argument_begin_.push_back(offset);
    for (int k = 0; k < config_.bases[i].arity; ++k) argument_node_.push_back(i);
    offset += config_.bases[i].arity;
  }

  for (int layer = 0; layer <= depth; ++layer) {
    if (config_.skip_connections) {
      source_counts_.push_back(u + layer * n);
    } else {
      source_counts_.push_back(layer == 0 ? u : n);
    }
  }

  Eigen::Index cursor = 0;
  row_offsets_.resize(depth + 1);
  for (int layer = 0; layer <= depth; ++layer) {
    const int rows = layer == depth ? config_.output_count : m;
    for (int r = 0; r < rows; ++r) {
      row_offsets_[layer].push_back(cursor);
      cursor += source_counts_[layer];
    }
  }
  weights_ = Eigen::VectorXd::Ones(cursor);
}

int Network::row_count(int layer) const { return static_cast<int>(row_offsets_[layer].size()); }

double Network::temperature(int layer) const {
  return layer == output_layer() ? config_.last_temperature : config_.temperature;
}

void Network::set_temperatures(double hidden, double last) {
  if (!(hidden > 0.0) || !(last > 0.0)) throw ConfigError("temperatures must be positive");
  config_.temperature = hidden;
  config_.last_temperature = last;
}

SourceRef Network::source(int layer, int index) const {
  const int u = config_.leaf_count();
  const int n = config_.image_count();
  auto leaf = [&](int i) {
    return i < config_.input_count ? SourceRef{SourceRef::Kind::Input, -1, i}
                                   : SourceRef{SourceRef::Kind::Constant, -1, i - config_.input_count};
  };
  if (config_.skip_connections) {
    if (index < u) return leaf(index);
    const int k = index - u;
    return {SourceRef::Kind::Image, k / n, k % n};
  }
  if (layer == 0) return leaf(index);
  return {SourceRef::Kind::Image, layer - 1, index};
}

Eigen::VectorXd Network::probabilities() const {
  Eigen::VectorXd p(weights_.size());
  for (int layer = 0; layer <= depth(); ++layer) {
    for (int r = 0; r < row_count(layer); ++r) {
      p.segment(row_offset(layer, r), source_count(layer)) =
          softmax_row(row(layer, r), temperature(layer));
    }
  }
  return p;
}

Eigen::VectorXd Network::log_probabilities() const {
  Eigen::VectorXd p(weights_.size());
  for (int layer = 0; layer <= depth(); ++layer) {
    for (int r = 0; r < row_count(layer); ++r) {
      p.segment(row_offset(layer, r), source_count(layer)) =
          log_softmax_row(row(layer, r), temperature(layer));
    }
  }
  return p;
}

bool operator==(const Network& a, const Network& b) {
  const auto& ca = a.config_;
  const auto& cb = b.config_;
  return ca.depth == cb.depth && ca.bases == cb.bases && ca.input_count == cb.input_count &&
         ca.constants == cb.constants && ca.output_count == cb.output_count &&
         ca.temperature == cb.temperature && ca.last_temperature == cb.last_temperature &&
         ca.skip_connections == cb.skip_connections && a.source_counts_ == b.source_counts_ &&
         a.argument_begin_ == b.argument_begin_ && a.row_offsets_ == b.row_offsets_ &&
         a.weights_ == b.weights_;
}

std::size_t parameter_count(const NetworkConfig& config) {
  const std::size_t u = config.leaf_count();
  const std::size_t n = config.image_count();
  const std::size_t m = config.argument_count();
  const std::size_t depth = config.depth;
  const std::size_t v = config.output_count;
  if (!config.skip_connections) {
    return m * u + (depth - 1) * m * n + v * n;
  }
  std::size_t hidden = 0;
  for (std::size_t l = 0; l < depth; ++l) hidden += u + l * n;
  return m * hidden + v * (u + depth * n);
}

void save_network(const Network& network, std::ostream& out) {
  const auto& c = network.config();
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "depth " << c.depth << '\n';
  out << "inputs " << c.input_count << '\n';
  out << "outputs " << c.output_count << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "temperature " << c.temperature << '\n';
  out << "last_temperature " << c.last_temperature << '\n';
  out << "skip_connections " << (c.skip_connections ? 1 : 0) << '\n';
  out << "bases " << c.bases.size();
  for (const auto& b : c.bases) out << ' ' << b.name;
  out << '\n';
  out << "constants " << c.constants.size();
  for (double v : c.constants) out << ' ' << v;
  out << '\n';
  out << "weights " << network.parameter_count() << '\n';
  for (double w : network.weights()) out << w << '\n';
  out << "end\n";
}

namespace {

template <typename T>
T expect_field(std::istream& in, const std::string& key) {
  std::string name;
  T value{};
  if (!(in >> name) || name != key || !(in >> value)) {
    throw LoadError("network file: expected field '" + key + "'");
  }
  return value;
}

}  // namespace

Network load_network(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) {
    throw LoadError("network file: bad magic header");
  }
  if (version != kFormatVersion) {
    throw LoadError("network file: unsupported version " + std::to_string(version));
  }
  NetworkConfig c;
  c.depth = expect_field<int>(in, "depth");
  c.input_count = expect_field<int>(in, "inputs");
  c.output_count = expect_field<int>(in, "outputs");
  c.temperature = expect_field<double>(in, "temperature");
  c.last_temperature = expect_field<double>(in, "last_temperature");
  c.skip_connections = expect_field<int>(in, "skip_connections") != 0;
  const auto basis_n = expect_field<std::size_t>(in, "bases");
  for (std::size_t i = 0; i < basis_n; ++i) {
    std::string name;
    if (!(in >> name)) throw LoadError("network file: truncated basis list");
    const auto* b = find_basis(name);
    if (!b) throw LoadError("network file: unknown basis '" + name + "'");
    c.bases.push_back(*b);
  }
  const auto const_n = expect_field<std::size_t>(in, "constants");
  for (std::size_t i = 0; i < const_n; ++i) {
    double v;
    if (!(in >> v)) throw LoadError("network file: truncated constant list");
    c.constants.push_back(v);
  }
  const auto weight_n = expect_field<Eigen::Index>(in, "weights");

  std::optional<Network> net;
  try {
    net.emplace(std::move(c));
  } catch (const ConfigError& e) {
    throw LoadError(std::string("network file: invalid config: ") + e.what());
  }
  if (weight_n != net->parameter_count()) {
    throw LoadError("network file: weight count does not match config");
  }
  for (Eigen::Index i = 0; i < weight_n; ++i) {
    if (!(in >> net->weights()(i))) throw LoadError("network file: truncated weights");
  }
  std::string end;
  if (!(in >> end) || end != "end") throw LoadError("network file: missing end marker");
  return std::move(*net);
}

void save_network(const Network& network, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_network(network, out);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  return load_network(in);
}

}  // namespace funcnet
