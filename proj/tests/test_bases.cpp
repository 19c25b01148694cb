#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "funcnet/bases.hpp"
#include "funcnet/errors.hpp"
#include "funcnet/expression.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace funcnet;

namespace {
double call(std::string_view name, std::vector<double> args) { return eval_basis(basis_by_name(name), args); }
}  // namespace

TEST_CASE("basic values") {
  CHECK(call("ADD", {2, 3}) == 5);
  CHECK(call("SIN", {0}) == 0);
  CHECK(is_sentinel(call("DIV", {1, 0})));
  CHECK(is_sentinel(call("DIV", {1, 1e-13})));
  CHECK(call("DIV", {1, 4}) == 0.25);
  CHECK(call("IF_LEQ", {1, 2, 10, 20}) == 10);
  CHECK(call("IF_LEQ", {3, 2, 10, 20}) == 20);
  CHECK(call("IF_LEQ", {2, 2, 10, 20}) == 10);
  CHECK(call("TANH10", {0.2}) == doctest::Approx(0.96403).epsilon(1e-5));
  CHECK(call("SIGMOID10", {0.0}) == 0.5);
  CHECK(call("ADD9", {1, 2, 3, 4, 5, 6, 7, 8, 9}) == 45);
  CHECK(call("MIN4", {3, -1, 2, 0}) == -1);
  CHECK(call("MAX9", {3, -1, 2, 0, 8, 1, 1, 1, 1}) == 8);
  CHECK(call("NEG", {2}) == -2);
  CHECK(call("SQUARE", {-3}) == 9);
}

TEST_CASE("registry") {
  CHECK(basis_by_name("SIN").arity == 1);
  CHECK(basis_by_name("IF_LEQ").arity == 4);
  CHECK(find_basis("NOPE") == nullptr);
  CHECK_THROWS_AS(basis_by_name("nope"), ConfigError);
  for (const auto& b : builtin_registry()) {
    CHECK(b.arity >= 1);
    CHECK(basis_of(b.kind).name == b.name);
  }
  CHECK(builtin_registry().size() == 22);
}

TEST_CASE("xor truth table") {
  const double want[2][2] = {{0, 1}, {1, 0}};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) CHECK(call("XOR", {double(a), double(b)}) == want[a][b]);
  }
}

TEST_CASE("arity mismatch is a contract error") {
  CHECK_THROWS_AS(call("ADD", {1}), std::invalid_argument);
  CHECK_THROWS_AS(call("SIN", {1, 2}), std::invalid_argument);
}

TEST_CASE("non-finite arguments give the sentinel") {
  CHECK(is_sentinel(call("ADD", {kSentinel, 1})));
  CHECK(is_sentinel(call("SIN", {INFINITY})));
}

TEST_CASE("fuzz: finite or sentinel, batch equals scalar") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> wide(-1e3, 1e3);
  std::uniform_int_distribution<int> kind(0, 4);
  const auto registry = builtin_registry();
  int evaluated = 0;
  for (const auto& b : registry) {
    const int n = 100000 / static_cast<int>(registry.size()) + 1;
    std::vector<Eigen::ArrayXd> cols(b.arity, Eigen::ArrayXd(n));
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < b.arity; ++a) {
        const int k = kind(rng);
        cols[a](i) = k == 0 ? 0.0 : k == 1 ? std::round(wide(rng) / 100) : k == 2 ? 1e-300 : wide(rng);
      }
    }
    std::vector<const Eigen::ArrayXd*> ptrs;
    for (const auto& c : cols) ptrs.push_back(&c);
    const Eigen::ArrayXd batch = eval_basis(b, ptrs);
    for (int i = 0; i < n; ++i) {
      std::vector<double> args;
      for (int a = 0; a < b.arity; ++a) args.push_back(cols[a](i));
      const double v = eval_basis(b, args);
      CHECK_FALSE(std::isinf(v));
      const bool same = (std::isnan(v) && std::isnan(batch(i))) || v == batch(i);
      if (!same) CHECK(v == batch(i));
      ++evaluated;
    }
  }
  CHECK(evaluated >= 100000);
}

TEST_CASE("render parses back to the same application") {
  for (const auto& b : builtin_registry()) {
    std::vector<std::string> names;
    std::vector<Expression> kids;
    for (int a = 0; a < b.arity; ++a) {
      names.push_back("x" + std::to_string(a));
      kids.push_back(Expression::input(a));
    }
    const std::string text = render_basis(b, names);
    const Expression parsed = parse_expression(text);
    CHECK_MESSAGE(parsed == Expression::apply(b, kids), text);
  }
}
