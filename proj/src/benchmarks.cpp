#include "funcnet/benchmarks.hpp"

#include <functional>

namespace funcnet {
namespace {

struct Entry {
  std::string_view name;
  std::function<TargetSpec()> make;
};

DomainAxis interval(double lo, double hi) { return {lo, hi, {}}; }
DomainAxis bits() { return {0.0, 1.0, {0.0, 1.0}}; }

TargetSpec explicit_target(std::string_view name, std::vector<std::string_view> exprs,
                           std::vector<DomainAxis> ranges) {
  TargetSpec t;
  t.name = name;
  t.kind = TargetKind::Explicit;
  for (auto e : exprs) t.outputs.push_back(parse_expression(e));
  t.ranges = std::move(ranges);
  return t;
}

TargetSpec recurrent_target(std::string_view name, std::string_view step, int depth, DomainAxis range) {
  TargetSpec t = explicit_target(name, {step}, {range});
  t.kind = TargetKind::Recurrent;
  t.recurrence_depth = depth;
  return t;
}

TargetSpec classification_target(std::string_view name, std::vector<int> classes) {
  TargetSpec t;
  t.name = name;
  t.kind = TargetKind::Classification;
  t.classes = std::move(classes);
  return t;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"2x2_plus_3x", [] { return explicit_target("2x2_plus_3x", {"2*x0^2 + 3*x0"}, {interval(-10, 10)}); }},
      {"sin_3x_plus_2", [] { return explicit_target("sin_3x_plus_2", {"sin(3*x0 + 2)"}, {interval(-10, 10)}); }},
      {"sum_sin_nx",
       [] {
         return explicit_target("sum_sin_nx", {"sin(x0) + sin(2*x0) + sin(3*x0)"}, {interval(-20, 20)});
       }},
      {"rational", [] { return explicit_target("rational", {"(x0^2 + x0) / (x0 + 2)"}, {interval(-6, 6)}); }},
      {"rational_2d",
       [] {
         return explicit_target("rational_2d", {"x0^2 * (x0 + 1) / (x1^2^2 * x1)"},
                                {interval(-10, 10), interval(0.1, 3)});
       }},
      {"quadratic_2d",
       [] {
         return explicit_target("quadratic_2d", {"x0^2 / 2 + (x1 + 1)^2 / 2"},
                                {interval(-20, -2), interval(2, 20)});
       }},
      {"hyperbola",
       [] {
         TargetSpec t;
         t.name = "hyperbola";
         t.kind = TargetKind::Implicit;
         t.ranges = {interval(0, 1)};
         t.constraint = parse_expression("1 / x0");
         t.implicit_value = 1.0;
         return t;
       }},
      {"piecewise_3x",
       [] { return explicit_target("piecewise_3x", {"if_leq(x0, 0, x0, 3*x0)"}, {interval(-20, 20)}); }},
      {"piecewise_square_neg",
       [] {
         return explicit_target("piecewise_square_neg", {"if_leq(x0, 0, -x0, x0^2)"}, {interval(-20, 20)});
       }},
      {"piecewise_x_sin",
       [] { return explicit_target("piecewise_x_sin", {"if_leq(x0, 0, sin(x0), x0)"}, {interval(-20, 20)}); }},
      {"sort3",
       [] {
         return explicit_target("sort3",
                                {"min(min(x0, x1), x2)", "max(min(x0, x1), min(max(x0, x1), x2))",
                                 "max(max(x0, x1), x2)"},
                                {interval(-50, 50), interval(-50, 50), interval(-50, 50)});
       }},
      {"lfsr4",
       [] {
         return explicit_target("lfsr4", {"x1", "x2", "x3", "xor(x0, x1)"}, {bits(), bits(), bits(), bits()});
       }},
      {"piecewise_pair",
       [] {
         return explicit_target("piecewise_pair", {"if_leq(2, x0, -x1, x1)", "if_leq(0, x1, x1^2, x0)"},
                                {interval(-5, 5), interval(-5, 5)});
       }},
      {"recurrent_square_half",
       [] { return recurrent_target("recurrent_square_half", "if_leq(2, x0, x0 / 2, x0^2)", 4, interval(-8, 8)); }},
      {"recurrent_add_sub",
       [] { return recurrent_target("recurrent_add_sub", "if_leq(2, x0, x0 - 1, x0 + 2)", 2, interval(-3, 6)); }},
      {"mnist_binary", [] { return classification_target("mnist_binary", {0, 7}); }},
      {"mnist_trinary", [] { return classification_target("mnist_trinary", {0, 1, 2}); }},
  };
  return table;
}

}  // namespace

std::vector<std::string_view> benchmark_names() {
  std::vector<std::string_view> names;
  for (const auto& e : entries()) names.push_back(e.name);
  return names;
}

TargetSpec benchmark_target(std::string_view name) {
  for (const auto& e : entries()) {
    if (e.name == name) return e.make();
  }
  throw ConfigError("unknown benchmark '" + std::string(name) + "'");
}

}  // namespace funcnet
