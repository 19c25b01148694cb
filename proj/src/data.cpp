#include "funcnet/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

namespace funcnet {

int TargetSpec::input_count() const {
  if (kind == TargetKind::Implicit) return static_cast<int>(ranges.size()) + 1;
  return static_cast<int>(ranges.size());
}

int TargetSpec::output_count() const {
  if (kind == TargetKind::Implicit) return 1;
  if (kind == TargetKind::Classification) return static_cast<int>(classes.size());
  return static_cast<int>(outputs.size());
}

void TargetSpec::validate() const {
  for (const auto& axis : ranges) {
    if (axis.discrete()) continue;
    if (!(axis.lo < axis.hi) || !std::isfinite(axis.lo) || !std::isfinite(axis.hi)) {
      throw ConfigError("target '" + name + "': degenerate input range");
    }
  }
  switch (kind) {
    case TargetKind::Explicit:
    case TargetKind::Recurrent:
      if (ranges.empty()) throw ConfigError("target '" + name + "': no input ranges");
      if (outputs.empty()) throw ConfigError("target '" + name + "': no target expressions");
      for (const auto& e : outputs) {
        if (input_dimension(e) > input_count()) {
          throw ConfigError("target '" + name + "': expression uses more inputs than ranges given");
        }
      }
      if (kind == TargetKind::Recurrent) {
        if (output_count() != input_count()) {
          throw ConfigError("target '" + name + "': recurrent targets need outputs == inputs");
        }
        if (recurrence_depth < 1) throw ConfigError("target '" + name + "': recurrence depth < 1");
      }
      break;
    case TargetKind::Implicit:
      if (!constraint) throw ConfigError("target '" + name + "': implicit target needs a constraint");
      if (input_dimension(*constraint) > static_cast<int>(ranges.size())) {
        throw ConfigError("target '" + name + "': constraint may only use the free inputs");
      }
      if (!std::isfinite(implicit_value)) throw ConfigError("target '" + name + "': bad implicit value");
      break;
    case TargetKind::Classification:
      if (classes.empty()) throw ConfigError("target '" + name + "': no classes selected");
      if (images_path.empty() || labels_path.empty()) {
        throw ConfigError("target '" + name + "': classification needs image and label files");
      }
      if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("target '" + name + "': test fraction must be in (0, 1)");
      }
      break;
  }
}

std::vector<Expression> TargetSpec::reference_expressions() const {
  if (kind == TargetKind::Explicit) return outputs;
  if (kind != TargetKind::Recurrent) return {};
  std::vector<Expression> composed = outputs;
  for (int d = 1; d < recurrence_depth; ++d) {
    std::vector<Expression> next;
    for (const auto& g : outputs) next.push_back(substitute(g, composed));
    composed = std::move(next);
  }
  return composed;
}

std::vector<DomainAxis> TargetSpec::input_domain() const {
  std::vector<DomainAxis> domain = ranges;
  if (kind == TargetKind::Implicit && constraint) {
    // Bound the dependent axis by probing the constraint over the free axes.
    Dataset probe = generate(*this, 256, 0x5eed);
    const auto col = probe.inputs.col(probe.inputs.cols() - 1);
    domain.push_back({col.minCoeff(), col.maxCoeff(), {}});
  }
  return domain;
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
    out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(rows[i]);
  }
  out.seed = seed;
  out.ranges = ranges;
  return out;
}

namespace {

double draw(const DomainAxis& axis, Rng& rng) {
  if (axis.discrete()) {
    std::uniform_int_distribution<std::size_t> pick(0, axis.values.size() - 1);
    return axis.values[pick(rng)];
  }
  std::uniform_real_distribution<double> u(axis.lo, axis.hi);
  return u(rng);
}

constexpr int kMaxRedraws = 10000;

}  // namespace

Dataset generate(const TargetSpec& spec, Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  if (spec.kind == TargetKind::Classification) {
    throw ConfigError("classification targets are loaded from IDX files, not generated");
  }
  if (n < 1) throw ConfigError("dataset size must be >= 1");

  Rng rng = make_stream(seed, 0xda7a);
  const int u = spec.input_count();
  const int v = spec.output_count();
  Dataset data;
  data.seed = seed;
  data.ranges = spec.ranges;
  data.inputs.resize(n, u);
  data.targets.resize(n, v);

  std::vector<double> x(u);
  std::vector<double> y(v);
  for (Eigen::Index i = 0; i < n; ++i) {
    int attempts = 0;
    for (;;) {
      if (++attempts > kMaxRedraws) {
        throw ConfigError("target '" + spec.name + "': cannot draw finite rows from its domain");
      }
      for (std::size_t d = 0; d < spec.ranges.size(); ++d) x[d] = draw(spec.ranges[d], rng);

      bool finite = true;
      switch (spec.kind) {
        case TargetKind::Explicit:
          for (int o = 0; o < v; ++o) y[o] = evaluate(spec.outputs[o], x);
          break;
        case TargetKind::Recurrent: {
          std::vector<double> state = x;
          for (int d = 0; d < spec.recurrence_depth; ++d) {
            for (int o = 0; o < v; ++o) y[o] = evaluate(spec.outputs[o], state);
            state = y;
          }
          break;
        }
        case TargetKind::Implicit:
          x[u - 1] = evaluate(*spec.constraint, std::span<const double>(x.data(), u - 1));
          finite = !is_sentinel(x[u - 1]);
          y[0] = spec.implicit_value;
          break;
        case TargetKind::Classification: break;
      }
      for (double value : y) finite = finite && !is_sentinel(value);
      if (finite) break;
    }
    for (int d = 0; d < u; ++d) data.inputs(i, d) = x[d];
    for (int o = 0; o < v; ++o) data.targets(i, o) = y[o];
  }
  return data;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw IdxError(IdxError::Reason::Truncated, path + ": truncated IDX header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::ifstream open_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Reason::Unreadable, path + ": cannot open");
  return in;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::span<const int> class_filter) {
  auto images = open_idx(images_path);
  auto labels = open_idx(labels_path);

  if (const auto magic = read_be32(images, images_path); magic != 2051) {
    throw IdxError(IdxError::Reason::BadMagic,
                   images_path + ": bad IDX image magic " + std::to_string(magic) + " (expected 2051)");
  }
  if (const auto magic = read_be32(labels, labels_path); magic != 2049) {
    throw IdxError(IdxError::Reason::BadMagic,
                   labels_path + ": bad IDX label magic " + std::to_string(magic) + " (expected 2049)");
  }
  const std::uint32_t count = read_be32(images, images_path);
  const std::uint32_t height = read_be32(images, images_path);
  const std::uint32_t width = read_be32(images, images_path);
  const std::uint32_t label_count = read_be32(labels, labels_path);
  if (count != label_count) {
    throw IdxError(IdxError::Reason::CountMismatch,
                   images_path + " has " + std::to_string(count) + " images but " + labels_path +
                       " has " + std::to_string(label_count) + " labels");
  }

  const std::size_t pixels = std::size_t{height} * width;
  std::vector<unsigned char> image_bytes(pixels * count);
  std::vector<unsigned char> label_bytes(count);
  if (!images.read(reinterpret_cast<char*>(image_bytes.data()),
                   static_cast<std::streamsize>(image_bytes.size()))) {
    throw IdxError(IdxError::Reason::Truncated, images_path + ": truncated image payload");
  }
  if (!labels.read(reinterpret_cast<char*>(label_bytes.data()),
                   static_cast<std::streamsize>(label_bytes.size()))) {
    throw IdxError(IdxError::Reason::Truncated, labels_path + ": truncated label payload");
  }

  std::vector<Eigen::Index> keep;
  std::vector<int> column;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto it = std::find(class_filter.begin(), class_filter.end(), static_cast<int>(label_bytes[i]));
    if (it == class_filter.end()) continue;
    keep.push_back(i);
    column.push_back(static_cast<int>(it - class_filter.begin()));
  }

  Dataset out;
  const auto rows = static_cast<Eigen::Index>(keep.size());
  out.inputs.resize(rows, static_cast<Eigen::Index>(pixels));
  out.targets = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(class_filter.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const unsigned char* src = image_bytes.data() + keep[r] * pixels;
    for (std::size_t p = 0; p < pixels; ++p) out.inputs(r, static_cast<Eigen::Index>(p)) = src[p] / 255.0;
    out.targets(r, column[r]) = 1.0;
  }
  out.ranges.assign(pixels, DomainAxis{0.0, 1.0, {}});
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must be in (0, 1)");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dataset.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_stream(seed, 0x5b1f);
  std::shuffle(order.begin(), order.end(), rng);
  const auto test_n = static_cast<std::size_t>(std::floor(static_cast<double>(order.size()) * test_fraction));
  const std::span<const Eigen::Index> all(order);
  Dataset test = dataset.subset(all.first(test_n));
  Dataset train = dataset.subset(all.subspan(test_n));
  return {std::move(train), std::move(test)};
}

double classification_accuracy(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& labels,
                               double threshold) {
  if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols()) {
    throw std::invalid_argument("outputs and labels differ in shape");
  }
  if (outputs.rows() == 0) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    bool ok = true;
    for (Eigen::Index j = 0; j < outputs.cols() && ok; ++j) {
      const double y = outputs(i, j);
      ok = !is_sentinel(y) && ((y > threshold) == (labels(i, j) > 0.5));
    }
    correct += ok ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(outputs.rows());
}

double classification_accuracy(const Network& network, const SampledDag& dag, const Dataset& test,
                               double threshold) {
  return classification_accuracy(evaluate(network, dag, test.inputs), test.targets, threshold);
}

void write_csv(const Dataset& dataset, std::ostream& out) {
  for (Eigen::Index j = 0; j < dataset.inputs.cols(); ++j) out << (j ? "," : "") << 'x' << j;
  for (Eigen::Index j = 0; j < dataset.targets.cols(); ++j) out << ",y" << j;
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    for (Eigen::Index j = 0; j < dataset.inputs.cols(); ++j) out << (j ? "," : "") << dataset.inputs(i, j);
    for (Eigen::Index j = 0; j < dataset.targets.cols(); ++j) out << ',' << dataset.targets(i, j);
    out << '\n';
  }
}

}  // namespace funcnet
