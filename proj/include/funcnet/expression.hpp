#pragma once

#include "funcnet/bases.hpp"
#include "funcnet/network.hpp"
#include "funcnet/sampler.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace funcnet {

/// Expression tree over raw inputs x0, x1, ..., real constants and basis
/// applications. Value type; subtrees are owned by their parent.
class Expression {
 public:
  enum class Kind { Input, Constant, Apply };

  static Expression input(int index);
  static Expression constant(double value);
  /// Throws std::invalid_argument when the child count differs from the arity.
  static Expression apply(const BasisFunction& basis, std::vector<Expression> children);

  Kind kind() const { return kind_; }
  int input_index() const { return input_; }
  double value() const { return value_; }
  const BasisFunction& basis() const { return basis_; }
  const std::vector<Expression>& children() const { return children_; }

  bool is_leaf() const { return kind_ != Kind::Apply; }

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  Expression() = default;

  Kind kind_ = Kind::Constant;
  int input_ = -1;
  double value_ = 0.0;
  BasisFunction basis_ = basis_of(BasisKind::Id);
  std::vector<Expression> children_;
};

/// Canonical infix form, e.g. "sin((x0 + 1))^2". See docs/expression_grammar.md.
std::string to_string(const Expression& expr);

/// Inverse of to_string; also accepts unparenthesised infix with the usual
/// precedence and unary minus. Throws ParseError.
Expression parse_expression(std::string_view text);

/// Recursive scalar interpreter. Sentinels propagate like in eval_basis.
double evaluate(const Expression& expr, std::span<const double> x);

/// Row-wise batch evaluation of the scalar interpreter (batch x inputs).
Eigen::ArrayXd evaluate(const Expression& expr, const Eigen::MatrixXd& inputs);

/// Smallest input dimension the expression can be evaluated on (max index + 1).
int input_dimension(const Expression& expr);

bool depends_on_inputs(const Expression& expr);

std::size_t node_count(const Expression& expr);

/// Replace every x_i by replacements[i] (function composition).
Expression substitute(const Expression& expr, std::span<const Expression> replacements);

/// Value-preserving cleanup: constant folding and the identities
/// e+0, 0+e, e-0, e*1, 1*e, neg(neg(e)), id(e).
Expression simplify(const Expression& expr);

/// Backtrack from one output row, duplicating shared subgraphs.
Expression dag_to_expression(const Network& network, const SampledDag& dag, int output);

/// One input axis: a closed interval, or a finite value set when `values`
/// is non-empty.
struct DomainAxis {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> values;

  bool discrete() const { return !values.empty(); }
};

/// True iff |a(x) - b(x)| <= tol * max(1, |b(x)|) on every probe point where
/// both are finite and their finite/sentinel pattern agrees on at least 99%
/// of the probes. Interval axes are probed with a Halton sequence; an
/// all-discrete domain with at most `samples` points is enumerated fully.
/// Throws std::invalid_argument for an empty domain or samples < 100.
bool numeric_equivalent(const Expression& a, const Expression& b,
                        std::span<const DomainAxis> domain, double tol, int samples = 1000);

}  // namespace funcnet
