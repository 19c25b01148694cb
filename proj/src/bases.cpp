#include "funcnet/bases.hpp"

#include "funcnet/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <stdexcept>
#include <vector>

namespace funcnet {
namespace {

constexpr std::array<BasisFunction, 22> kRegistry{{
    {BasisKind::Add, "ADD", 2, true},
    {BasisKind::Sub, "SUB", 2, true},
    {BasisKind::Mul, "MUL", 2, true},
    {BasisKind::Div, "DIV", 2, true},
    {BasisKind::Sin, "SIN", 1, true},
    {BasisKind::Square, "SQUARE", 1, true},
    {BasisKind::Neg, "NEG", 1, true},
    {BasisKind::Id, "ID", 1, true},
    {BasisKind::IfLeq, "IF_LEQ", 4, false},
    {BasisKind::Min, "MIN", 2, false},
    {BasisKind::Max, "MAX", 2, false},
    {BasisKind::Xor, "XOR", 2, false},
    {BasisKind::Sigmoid, "SIGMOID", 1, true},
    {BasisKind::Tanh, "TANH", 1, true},
    {BasisKind::Sigmoid10, "SIGMOID10", 1, true},
    {BasisKind::Tanh10, "TANH10", 1, true},
    {BasisKind::Add4, "ADD4", 4, true},
    {BasisKind::Add9, "ADD9", 9, true},
    {BasisKind::Min4, "MIN4", 4, false},
    {BasisKind::Max4, "MAX4", 4, false},
    {BasisKind::Min9, "MIN9", 9, false},
    {BasisKind::Max9, "MAX9", 9, false},
}};

double divide(double a, double b) { return std::abs(b) < kDivisionGuard ? kSentinel : a / b; }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// Inputs are treated as bits by thresholding at one half.
double exclusive_or(double a, double b) { return ((a > 0.5) != (b > 0.5)) ? 1.0 : 0.0; }

// Core kernel on finite arguments. Every n-ary fold runs left to right so that
// scalar and batch paths perform identical operations.
double kernel(BasisKind kind, const double* a) {
  switch (kind) {
    case BasisKind::Add: return a[0] + a[1];
    case BasisKind::Sub: return a[0] - a[1];
    case BasisKind::Mul: return a[0] * a[1];
    case BasisKind::Div: return divide(a[0], a[1]);
    case BasisKind::Sin: return std::sin(a[0]);
    case BasisKind::Square: return a[0] * a[0];
    case BasisKind::Neg: return -a[0];
    case BasisKind::Id: return a[0];
    case BasisKind::IfLeq: return a[0] <= a[1] ? a[2] : a[3];
    case BasisKind::Min: return std::min(a[0], a[1]);
    case BasisKind::Max: return std::max(a[0], a[1]);
    case BasisKind::Xor: return exclusive_or(a[0], a[1]);
    case BasisKind::Sigmoid: return sigmoid(a[0]);
    case BasisKind::Tanh: return std::tanh(a[0]);
    case BasisKind::Sigmoid10: return sigmoid(10.0 * a[0]);
    case BasisKind::Tanh10: return std::tanh(10.0 * a[0]);
    case BasisKind::Add4: return ((a[0] + a[1]) + a[2]) + a[3];
    case BasisKind::Add9: {
      double s = a[0];
      for (int i = 1; i < 9; ++i) s += a[i];
      return s;
    }
    case BasisKind::Min4: return std::min(std::min(std::min(a[0], a[1]), a[2]), a[3]);
    case BasisKind::Max4: return std::max(std::max(std::max(a[0], a[1]), a[2]), a[3]);
    case BasisKind::Min9: {
      double m = a[0];
      for (int i = 1; i < 9; ++i) m = std::min(m, a[i]);
      return m;
    }
    case BasisKind::Max9: {
      double m = a[0];
      for (int i = 1; i < 9; ++i) m = std::max(m, a[i]);
      return m;
    }
  }
  return kSentinel;
}

std::string join_call(std::string name, std::span<const std::string> args) {
  name += '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) name += ", ";
    name += args[i];
  }
  name += ')';
  return name;
}

}  // namespace

std::span<const BasisFunction> builtin_registry() { return kRegistry; }

const BasisFunction* find_basis(std::string_view name) {
  auto it = std::find_if(kRegistry.begin(), kRegistry.end(),
                         [&](const BasisFunction& b) { return b.name == name; });
  return it == kRegistry.end() ? nullptr : &*it;
}

const BasisFunction& basis_by_name(std::string_view name) {
  if (const auto* b = find_basis(name)) return *b;
  throw ConfigError("unknown basis function '" + std::string(name) + "'");
}

const BasisFunction& basis_of(BasisKind kind) {
  return kRegistry[static_cast<std::size_t>(kind)];
}

double eval_basis(const BasisFunction& basis, std::span<const double> args) {
  if (static_cast<int>(args.size()) != basis.arity) {
    throw std::invalid_argument("basis " + std::string(basis.name) + " expects " +
                                std::to_string(basis.arity) + " arguments, got " +
                                std::to_string(args.size()));
  }
  for (double a : args) {
    if (is_sentinel(a)) return kSentinel;
  }
  const double out = kernel(basis.kind, args.data());
  return is_sentinel(out) ? kSentinel : out;
}

Eigen::ArrayXd eval_basis(const BasisFunction& basis,
                          std::span<const Eigen::ArrayXd* const> args) {
  if (static_cast<int>(args.size()) != basis.arity) {
    throw std::invalid_argument("basis " + std::string(basis.name) + " expects " +
                                std::to_string(basis.arity) + " arguments, got " +
                                std::to_string(args.size()));
  }
  const Eigen::Index n = args.front()->size();
  for (const auto* a : args) {
    if (a->size() != n) throw std::invalid_argument("batch arguments differ in length");
  }

  Eigen::ArrayXd out(n);
  const auto& x = *args[0];
  switch (basis.kind) {
    case BasisKind::Add: out = x + *args[1]; break;
    case BasisKind::Sub: out = x - *args[1]; break;
    case BasisKind::Mul: out = x * *args[1]; break;
    case BasisKind::Square: out = x * x; break;
    case BasisKind::Neg: out = -x; break;
    case BasisKind::Id: out = x; break;
    case BasisKind::Sin: out = x.unaryExpr([](double v) { return std::sin(v); }); break;
    case BasisKind::Tanh: out = x.unaryExpr([](double v) { return std::tanh(v); }); break;
    default: {
      std::array<double, 9> buf{};
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < basis.arity; ++k) buf[k] = (*args[k])(i);
        out(i) = kernel(basis.kind, buf.data());
      }
    }
  }

  // Sentinel propagation: any non-finite argument or result poisons the element.
  auto ok = out.isFinite().eval();
  for (const auto* a : args) ok = ok && a->isFinite();
  return ok.select(out, kSentinel);
}

std::string render_basis(const BasisFunction& basis, std::span<const std::string> args) {
  if (static_cast<int>(args.size()) != basis.arity) {
    throw std::invalid_argument("render arity mismatch for " + std::string(basis.name));
  }
  switch (basis.kind) {
    case BasisKind::Add: return "(" + args[0] + " + " + args[1] + ")";
    case BasisKind::Sub: return "(" + args[0] + " - " + args[1] + ")";
    case BasisKind::Mul: return "(" + args[0] + " * " + args[1] + ")";
    case BasisKind::Div: return "(" + args[0] + " / " + args[1] + ")";
    case BasisKind::Square: return args[0] + "^2";
    default: return join_call(call_name(basis), args);
  }
}

std::string call_name(const BasisFunction& basis) {
  std::string s(basis.name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace funcnet
