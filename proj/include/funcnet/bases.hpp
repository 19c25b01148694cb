#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>

namespace funcnet {

/// Non-finite marker produced by undefined operations. Any NaN or infinity
/// counts as a sentinel; evaluation code emits quiet NaN.
inline constexpr double kSentinel = std::numeric_limits<double>::quiet_NaN();

/// Denominators with magnitude below this evaluate to the sentinel.
inline constexpr double kDivisionGuard = 1e-12;

inline bool is_sentinel(double value) { return !std::isfinite(value); }

enum class BasisKind {
  Add,
  Sub,
  Mul,
  Div,
  Sin,
  Square,
  Neg,
  Id,
  IfLeq,
  Min,
  Max,
  Xor,
  Sigmoid,
  Tanh,
  Sigmoid10,
  Tanh10,
  Add4,
  Add9,
  Min4,
  Max4,
  Min9,
  Max9,
};

/// A primitive usable as an image-node activation. Instances are value types;
/// the registry holds one prototype per kind and networks copy them freely.
struct BasisFunction {
  BasisKind kind;
  std::string_view name;  // stable identifier used in config files
  int arity;
  bool differentiable_hint;

  friend bool operator==(const BasisFunction& a, const BasisFunction& b) {
    return a.kind == b.kind;
  }
};

/// All built-in bases, in declaration order of BasisKind.
std::span<const BasisFunction> builtin_registry();

/// Case-sensitive lookup by registry name ("ADD", "IF_LEQ", ...).
const BasisFunction* find_basis(std::string_view name);

/// Like find_basis but throws ConfigError for unknown names.
const BasisFunction& basis_by_name(std::string_view name);

const BasisFunction& basis_of(BasisKind kind);

/// Scalar evaluation. Throws std::invalid_argument when args.size() differs
/// from the arity; domain violations and non-finite arguments yield the
/// sentinel.
double eval_basis(const BasisFunction& basis, std::span<const double> args);

/// Element-wise batch evaluation over equally sized argument arrays. Matches
/// the scalar path bit-for-bit on every element.
Eigen::ArrayXd eval_basis(const BasisFunction& basis,
                          std::span<const Eigen::ArrayXd* const> args);

/// Infix rendering of one application, e.g. "(a + b)", "sin(a)", "a^2",
/// "if_leq(a, b, c, d)".
std::string render_basis(const BasisFunction& basis,
                         std::span<const std::string> args);

/// Name used in function-call rendering ("if_leq" for IF_LEQ).
std::string call_name(const BasisFunction& basis);

}  // namespace funcnet
