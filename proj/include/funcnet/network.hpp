#pragma once

#include "funcnet/bases.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace funcnet {

struct NetworkConfig {
  int depth = 1;                        // hidden (arguments + images) layers
  std::vector<BasisFunction> bases;     // reused at every hidden layer
  int input_count = 1;                  // raw inputs, constants excluded
  std::vector<double> constants;        // appended after the raw inputs
  int output_count = 1;
  double temperature = 1.0;             // every hidden layer
  double last_temperature = 1.0;        // output rows
  bool skip_connections = true;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Inputs plus constants: the leaf sources visible to the first layer.
  int leaf_count() const { return input_count + static_cast<int>(constants.size()); }
  int image_count() const { return static_cast<int>(bases.size()); }
  int argument_count() const;
};

/// Where a source index of some layer's rows points to.
struct SourceRef {
  enum class Kind { Input, Constant, Image };
  Kind kind;
  int layer;  // hidden layer of the image, -1 for leaves
  int index;  // raw input, constant or image-node index

  friend bool operator==(const SourceRef&, const SourceRef&) = default;
};

/// Row-wise temperature softmax with max subtraction.
template <typename Derived>
Eigen::VectorXd softmax_row(const Eigen::MatrixBase<Derived>& weights, double temperature) {
  const Eigen::VectorXd z = weights.template cast<double>() / temperature;
  const Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

template <typename Derived>
Eigen::VectorXd log_softmax_row(const Eigen::MatrixBase<Derived>& weights, double temperature) {
  const Eigen::VectorXd z = weights.template cast<double>() / temperature;
  const double top = z.maxCoeff();
  const double lse = top + std::log((z.array() - top).exp().sum());
  return (z.array() - lse).matrix();
}

/// Layered softmax network. Layers 0..depth-1 are hidden argument rows; layer
/// `depth` holds the output rows. All weights live in one flat vector where
/// every row is a contiguous segment, so gradients and optimizer state share
/// its shape.
class Network {
 public:
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  int depth() const { return config_.depth; }
  int output_layer() const { return config_.depth; }
  int row_count(int layer) const;
  int source_count(int layer) const { return source_counts_[layer]; }
  double temperature(int layer) const;
  void set_temperatures(double hidden, double last);

  SourceRef source(int layer, int index) const;

  /// First argument row feeding image node `node` (same for every layer).
  int argument_begin(int node) const { return argument_begin_[node]; }
  /// Image node fed by argument row `row`.
  int node_of_argument(int row) const { return argument_node_[row]; }

  Eigen::Index row_offset(int layer, int row) const { return row_offsets_[layer][row]; }
  Eigen::VectorXd::ConstSegmentReturnType row(int layer, int row) const {
    return weights_.segment(row_offset(layer, row), source_count(layer));
  }
  Eigen::VectorXd::SegmentReturnType row(int layer, int row) {
    return weights_.segment(row_offset(layer, row), source_count(layer));
  }

  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::VectorXd& weights() { return weights_; }
  Eigen::Index parameter_count() const { return weights_.size(); }

  /// Softmax probabilities of every row, laid out like weights().
  Eigen::VectorXd probabilities() const;
  Eigen::VectorXd log_probabilities() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  NetworkConfig config_;
  std::vector<int> source_counts_;
  std::vector<int> argument_begin_;
  std::vector<int> argument_node_;
  std::vector<std::vector<Eigen::Index>> row_offsets_;
  Eigen::VectorXd weights_;
};

/// Closed-form weight count: M * sum_{l<L} (u + l*N) + v * (u + L*N) with
/// skip connections, M*u + (L-1)*M*N + v*N without.
std::size_t parameter_count(const NetworkConfig& config);

/// Versioned text format: header echoing the config, then one weight per line.
void save_network(const Network& network, std::ostream& out);
Network load_network(std::istream& in);
void save_network(const Network& network, const std::string& path);
Network load_network(const std::string& path);

}  // namespace funcnet
