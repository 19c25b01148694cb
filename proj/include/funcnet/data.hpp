#pragma once

#include "funcnet/errors.hpp"
#include "funcnet/expression.hpp"
#include "funcnet/sampler.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace funcnet {

enum class TargetKind { Explicit, Implicit, Recurrent, Classification };

/// Hidden target f* plus the input domain it is sampled from.
struct TargetSpec {
  std::string name;
  TargetKind kind = TargetKind::Explicit;

  /// One expression per output. For recurrent targets this is the single
  /// step g, applied `recurrence_depth` times.
  std::vector<Expression> outputs;

  /// Explicit/recurrent: one axis per raw input. Implicit: the free inputs
  /// only; the last input is produced by `constraint`.
  std::vector<DomainAxis> ranges;

  int recurrence_depth = 1;
  std::optional<Expression> constraint;
  double implicit_value = 1.0;

  // Classification only.
  std::string images_path;
  std::string labels_path;
  std::vector<int> classes;
  double test_fraction = 0.1;

  int input_count() const;
  int output_count() const;

  /// Throws ConfigError on inconsistent specs.
  void validate() const;

  /// Expressions the learned model must match: g^∘depth for recurrent targets,
  /// `outputs` otherwise. Empty for implicit and classification targets.
  std::vector<Expression> reference_expressions() const;

  /// Domain over all raw inputs, suitable for numeric_equivalent.
  std::vector<DomainAxis> input_domain() const;
};

struct Dataset {
  Eigen::MatrixXd inputs;   // rows x input_count; columns contiguous per feature
  Eigen::MatrixXd targets;  // rows x output_count
  std::uint64_t seed = 0;
  std::vector<DomainAxis> ranges;

  Eigen::Index size() const { return inputs.rows(); }
  Dataset subset(std::span<const Eigen::Index> rows) const;
};

/// Draws n rows from the target's domain; rows whose target is non-finite
/// are redrawn.
Dataset generate(const TargetSpec& spec, Eigen::Index n, std::uint64_t seed);

/// IDX failure modes, reported distinctly.
class IdxError : public LoadError {
 public:
  enum class Reason { BadMagic, Truncated, CountMismatch, Unreadable };
  IdxError(Reason reason, const std::string& what) : LoadError(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

/// Big-endian IDX images (magic 2051) and labels (magic 2049). Pixels are
/// scaled to [0, 1]; targets are one-hot over `class_filter` in the given
/// order and only rows with a listed label are kept.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::span<const int> class_filter);

/// Seeded shuffle; the test part gets floor(n * test_fraction) rows.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// Fraction of rows whose thresholded outputs equal the one-hot label exactly.
double classification_accuracy(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& labels,
                               double threshold = 0.5);
double classification_accuracy(const Network& network, const SampledDag& dag, const Dataset& test,
                               double threshold = 0.5);

/// Header row x0..,y0.. followed by one line per row.
void write_csv(const Dataset& dataset, std::ostream& out);

}  // namespace funcnet
