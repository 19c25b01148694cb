#include "funcnet/expression.hpp"

#include "funcnet/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numbers>
#include <stdexcept>

namespace funcnet {

Expression Expression::input(int index) {
  if (index < 0) throw std::invalid_argument("input index must be non-negative");
  Expression e;
  e.kind_ = Kind::Input;
  e.input_ = index;
  return e;
}

Expression Expression::constant(double value) {
  Expression e;
  e.kind_ = Kind::Constant;
  e.value_ = value;
  return e;
}

Expression Expression::apply(const BasisFunction& basis, std::vector<Expression> children) {
  if (static_cast<int>(children.size()) != basis.arity) {
    throw std::invalid_argument("basis " + std::string(basis.name) + " takes " +
                                std::to_string(basis.arity) + " children");
  }
  Expression e;
  e.kind_ = Kind::Apply;
  e.basis_ = basis;
  e.children_ = std::move(children);
  return e;
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Expression::Kind::Input: return a.input_ == b.input_;
    case Expression::Kind::Constant:
      return a.value_ == b.value_ || (std::isnan(a.value_) && std::isnan(b.value_));
    case Expression::Kind::Apply: return a.basis_ == b.basis_ && a.children_ == b.children_;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string format_number(double v) {
  if (v == std::numbers::pi) return "pi";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  return v < 0 ? "(" + s + ")" : s;
}

}  // namespace

std::string to_string(const Expression& expr) {
  switch (expr.kind()) {
    case Expression::Kind::Input: return "x" + std::to_string(expr.input_index());
    case Expression::Kind::Constant: return format_number(expr.value());
    case Expression::Kind::Apply: break;
  }
  std::vector<std::string> args;
  args.reserve(expr.children().size());
  for (const auto& c : expr.children()) args.push_back(to_string(c));
  return render_basis(expr.basis(), args);
}

// ---------------------------------------------------------------------------
// Parsing: precedence climbing over + - * / with unary minus and postfix ^2.

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Expression parse() {
    Expression e = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expression sum() {
    Expression lhs = product();
    for (;;) {
      if (accept('+')) {
        lhs = Expression::apply(basis_of(BasisKind::Add), {std::move(lhs), product()});
      } else if (accept('-')) {
        lhs = Expression::apply(basis_of(BasisKind::Sub), {std::move(lhs), product()});
      } else {
        return lhs;
      }
    }
  }

  Expression product() {
    Expression lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expression::apply(basis_of(BasisKind::Mul), {std::move(lhs), unary()});
      } else if (accept('/')) {
        lhs = Expression::apply(basis_of(BasisKind::Div), {std::move(lhs), unary()});
      } else {
        return lhs;
      }
    }
  }

  Expression unary() {
    if (accept('-')) {
      skip();
      if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
        return postfix(Expression::constant(-number()));
      }
      return Expression::apply(basis_of(BasisKind::Neg), {unary()});
    }
    return postfix(primary());
  }

  Expression postfix(Expression base) {
    while (accept('^')) {
      skip();
      if (pos_ >= s_.size() || s_[pos_] != '2') fail("only ^2 is supported");
      ++pos_;
      base = Expression::apply(basis_of(BasisKind::Square), {std::move(base)});
    }
    return base;
  }

  double number() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        ++pos_;
      } else if ((c == 'e' || c == 'E') && pos_ > start) {
        ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      } else {
        break;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (ec != std::errc() || ptr != s_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return v;
  }

  Expression primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expression inner = sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expression::constant(number());
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected character");

    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view ident = s_.substr(start, pos_ - start);
    if (ident == "pi") return Expression::constant(std::numbers::pi);
    if (ident.size() > 1 && ident[0] == 'x' &&
        std::all_of(ident.begin() + 1, ident.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
      int index = 0;
      std::from_chars(ident.data() + 1, ident.data() + ident.size(), index);
      return Expression::input(index);
    }

    std::string upper(ident);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    const BasisFunction* basis = find_basis(upper);
    if (!basis) {
      pos_ = start;
      fail("unknown function '" + std::string(ident) + "'");
    }
    expect('(');
    std::vector<Expression> args;
    if (!accept(')')) {
      do {
        args.push_back(sum());
      } while (accept(','));
      expect(')');
    }
    if (static_cast<int>(args.size()) != basis->arity) {
      fail(std::string(ident) + " takes " + std::to_string(basis->arity) + " arguments");
    }
    return Expression::apply(*basis, std::move(args));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse_expression(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation and structural queries

double evaluate(const Expression& expr, std::span<const double> x) {
  switch (expr.kind()) {
    case Expression::Kind::Input:
      if (expr.input_index() >= static_cast<int>(x.size())) {
        throw std::invalid_argument("expression references x" + std::to_string(expr.input_index()) +
                                    " but only " + std::to_string(x.size()) + " inputs given");
      }
      return x[expr.input_index()];
    case Expression::Kind::Constant: return expr.value();
    case Expression::Kind::Apply: break;
  }
  std::vector<double> args;
  args.reserve(expr.children().size());
  for (const auto& c : expr.children()) args.push_back(evaluate(c, x));
  return eval_basis(expr.basis(), args);
}

Eigen::ArrayXd evaluate(const Expression& expr, const Eigen::MatrixXd& inputs) {
  Eigen::ArrayXd out(inputs.rows());
  std::vector<double> row(inputs.cols());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) row[j] = inputs(i, j);
    out(i) = evaluate(expr, row);
  }
  return out;
}

int input_dimension(const Expression& expr) {
  if (expr.kind() == Expression::Kind::Input) return expr.input_index() + 1;
  int d = 0;
  for (const auto& c : expr.children()) d = std::max(d, input_dimension(c));
  return d;
}

bool depends_on_inputs(const Expression& expr) { return input_dimension(expr) > 0; }

std::size_t node_count(const Expression& expr) {
  std::size_t n = 1;
  for (const auto& c : expr.children()) n += node_count(c);
  return n;
}

Expression substitute(const Expression& expr, std::span<const Expression> replacements) {
  switch (expr.kind()) {
    case Expression::Kind::Input:
      if (expr.input_index() >= static_cast<int>(replacements.size())) {
        throw std::invalid_argument("no replacement for x" + std::to_string(expr.input_index()));
      }
      return replacements[expr.input_index()];
    case Expression::Kind::Constant: return expr;
    case Expression::Kind::Apply: break;
  }
  std::vector<Expression> children;
  for (const auto& c : expr.children()) children.push_back(substitute(c, replacements));
  return Expression::apply(expr.basis(), std::move(children));
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

bool is_constant(const Expression& e, double v) {
  return e.kind() == Expression::Kind::Constant && e.value() == v;
}

}  // namespace

Expression simplify(const Expression& expr) {
  if (expr.is_leaf()) return expr;

  std::vector<Expression> kids;
  kids.reserve(expr.children().size());
  bool all_constant = true;
  for (const auto& c : expr.children()) {
    kids.push_back(simplify(c));
    all_constant = all_constant && kids.back().kind() == Expression::Kind::Constant;
  }

  if (all_constant) {
    std::vector<double> args;
    for (const auto& k : kids) args.push_back(k.value());
    const double v = eval_basis(expr.basis(), args);
    if (!is_sentinel(v)) return Expression::constant(v);
  }

  switch (expr.basis().kind) {
    case BasisKind::Add:
      if (is_constant(kids[1], 0.0)) return kids[0];
      if (is_constant(kids[0], 0.0)) return kids[1];
      break;
    case BasisKind::Sub:
      if (is_constant(kids[1], 0.0)) return kids[0];
      break;
    case BasisKind::Mul:
      if (is_constant(kids[1], 1.0)) return kids[0];
      if (is_constant(kids[0], 1.0)) return kids[1];
      break;
    case BasisKind::Neg:
      if (kids[0].kind() == Expression::Kind::Apply && kids[0].basis().kind == BasisKind::Neg) {
        return kids[0].children()[0];
      }
      break;
    case BasisKind::Id: return kids[0];
    default: break;
  }
  return Expression::apply(expr.basis(), std::move(kids));
}

// ---------------------------------------------------------------------------
// DAG extraction

namespace {

Expression source_expression(const Network& net, const SampledDag& dag, int layer, int index) {
  const SourceRef src = net.source(layer, index);
  switch (src.kind) {
    case SourceRef::Kind::Input: return Expression::input(src.index);
    case SourceRef::Kind::Constant: return Expression::constant(net.config().constants[src.index]);
    case SourceRef::Kind::Image: break;
  }
  const auto& basis = net.config().bases[src.index];
  const int begin = net.argument_begin(src.index);
  std::vector<Expression> children;
  children.reserve(basis.arity);
  for (int r = begin; r < begin + basis.arity; ++r) {
    children.push_back(source_expression(net, dag, src.layer, dag.choices[src.layer][r]));
  }
  return Expression::apply(basis, std::move(children));
}

}  // namespace

Expression dag_to_expression(const Network& network, const SampledDag& dag, int output) {
  if (output < 0 || output >= network.config().output_count) {
    throw std::invalid_argument("output index out of range");
  }
  const int layer = network.output_layer();
  return source_expression(network, dag, layer, dag.choices[layer][output]);
}

// ---------------------------------------------------------------------------
// Numeric equivalence

namespace {

double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

std::vector<std::vector<double>> probe_points(std::span<const DomainAxis> domain, int samples) {
  const bool all_discrete =
      std::all_of(domain.begin(), domain.end(), [](const DomainAxis& a) { return a.discrete(); });
  std::vector<std::vector<double>> points;
  if (all_discrete) {
    double total = 1.0;
    for (const auto& a : domain) total *= static_cast<double>(a.values.size());
    if (total <= samples) {
      std::vector<std::size_t> idx(domain.size(), 0);
      for (;;) {
        std::vector<double> p(domain.size());
        for (std::size_t d = 0; d < domain.size(); ++d) p[d] = domain[d].values[idx[d]];
        points.push_back(std::move(p));
        std::size_t d = 0;
        while (d < domain.size() && ++idx[d] == domain[d].values.size()) idx[d++] = 0;
        if (d == domain.size()) break;
      }
      return points;
    }
  }
  if (domain.size() > std::size(kPrimes)) {
    throw std::invalid_argument("numeric_equivalent supports at most 25 dimensions");
  }
  for (int i = 1; i <= samples; ++i) {
    std::vector<double> p(domain.size());
    for (std::size_t d = 0; d < domain.size(); ++d) {
      const double h = radical_inverse(static_cast<std::uint64_t>(i), kPrimes[d]);
      const auto& axis = domain[d];
      if (axis.discrete()) {
        const auto k = std::min(axis.values.size() - 1,
                                static_cast<std::size_t>(h * static_cast<double>(axis.values.size())));
        p[d] = axis.values[k];
      } else {
        p[d] = axis.lo + (axis.hi - axis.lo) * h;
      }
    }
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace

bool numeric_equivalent(const Expression& a, const Expression& b, std::span<const DomainAxis> domain,
                        double tol, int samples) {
  if (domain.empty()) throw std::invalid_argument("numeric_equivalent: empty domain");
  if (samples < 100) throw std::invalid_argument("numeric_equivalent: need at least 100 samples");
  for (const auto& axis : domain) {
    if (!axis.discrete() && !(axis.lo <= axis.hi)) {
      throw std::invalid_argument("numeric_equivalent: empty interval");
    }
  }
  if (std::max(input_dimension(a), input_dimension(b)) > static_cast<int>(domain.size())) {
    throw std::invalid_argument("numeric_equivalent: domain has fewer axes than the expressions use");
  }

  const auto points = probe_points(domain, samples);
  std::size_t agree = 0;
  std::size_t compared = 0;
  for (const auto& p : points) {
    const double va = evaluate(a, p);
    const double vb = evaluate(b, p);
    const bool fa = !is_sentinel(va);
    const bool fb = !is_sentinel(vb);
    if (fa != fb) continue;
    ++agree;
    if (!fa) continue;
    ++compared;
    if (std::abs(va - vb) > tol * std::max(1.0, std::abs(vb))) return false;
  }
  return compared > 0 && static_cast<double>(agree) >= 0.99 * static_cast<double>(points.size());
}

}  // namespace funcnet
