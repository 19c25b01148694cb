#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "funcnet/expression.hpp"
#include "funcnet/sampler.hpp"
#include "support.hpp"

#include <cmath>

using namespace funcnet;

namespace {

Network unary_chain(std::string_view basis, int inputs = 1, std::vector<double> constants = {}) {
  NetworkConfig c;
  c.depth = 1;
  c.input_count = inputs;
  c.constants = std::move(constants);
  c.bases = {basis_by_name(basis)};
  return Network(c);
}

}  // namespace

TEST_CASE("reference DAG evaluates to its two formulas") {
  const Network net(support::reference_config(3));
  const SampledDag dag = support::reference_dag(net);
  CHECK(is_valid(net, dag));
  Eigen::MatrixXd x(2, 2);
  x << 0.0, 0.0, 0.7, -1.3;
  const Eigen::MatrixXd y = evaluate(net, dag, x);
  CHECK(y(0, 0) == doctest::Approx(0.70807).epsilon(1e-5));
  CHECK(y(0, 1) == 0.0);
  CHECK(y(1, 0) == doctest::Approx(std::pow(std::sin(1.7), 2)).epsilon(1e-14));
  CHECK(y(1, 1) == doctest::Approx(std::sin(std::numbers::pi * std::numbers::pi * std::sin(-1.3))).epsilon(1e-12));
  CHECK(to_string(dag_to_expression(net, dag, 0)) == "sin((x0 + 1))^2");
  CHECK(to_string(dag_to_expression(net, dag, 1)) == "sin((pi^2 * sin(x1)))");
}

TEST_CASE("two-row chain probability") {
  const Network net = unary_chain("SIN", 2);
  SampledDag dag{{{1}, {2}}};
  CHECK(log_probability(net, dag) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-14));
  SampledDag direct{{{1}, {0}}};
  CHECK(log_probability(net, direct) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("sampling is deterministic per stream") {
  Network net(support::reference_config(3));
  std::mt19937_64 g(5);
  support::randomize_weights(net, g);
  Rng a = make_stream(42, 1, 2), b = make_stream(42, 1, 2), c = make_stream(42, 1, 3);
  const SampledDag da = sample(net, a);
  CHECK(da == sample(net, b));
  CHECK(is_valid(net, da));
  bool differs = false;
  for (int i = 0; i < 10 && !differs; ++i) differs = !(sample(net, c) == da);
  CHECK(differs);
}

TEST_CASE("row frequencies") {
  Network net = unary_chain("ADD", 2, {1.0, 2.0});
  const int n = 100000;
  Rng rng = make_stream(9);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) counts[sample(net, rng).choices[0][0]]++;
  for (int k = 0; k < 4; ++k) CHECK(std::abs(counts[k] / double(n) - 0.25) < 0.01);

  net.row(0, 0) << 2.0, 0.0, -1e9, -1e9;
  int first = 0;
  for (int i = 0; i < n; ++i) first += sample(net, rng).choices[0][0] == 0;
  CHECK(std::abs(first / double(n) - 0.8808) < 0.01);
}

TEST_CASE("output copying an input touches only the output row") {
  Network net(support::reference_config(3));
  std::mt19937_64 g(1);
  support::randomize_weights(net, g);
  SampledDag dag = support::reference_dag(net);
  dag.choices[3][0] = 1;
  const int o[] = {0};
  const double want = log_softmax_row(net.row(3, 0), net.temperature(3))(1);
  CHECK(log_probability(net, dag, o) == doctest::Approx(want).epsilon(1e-14));
  const RowMask mask = reachable_rows(net, dag, o);
  int count = 0;
  for (const auto& layer : mask) for (char c : layer) count += c;
  CHECK(count == 1);
  CHECK(reads_inputs(net, dag, 0));
  dag.choices[3][0] = 2;
  CHECK_FALSE(reads_inputs(net, dag, 0));
}

TEST_CASE("shared rows are counted once") {
  NetworkConfig c;
  c.depth = 1;
  c.input_count = 1;
  c.bases = {basis_by_name("SIN")};
  c.output_count = 2;
  const Network net(c);
  SampledDag dag{{{0}, {1, 1}}};
  // sin row (1 source) + two output rows (2 sources each)
  CHECK(log_probability(net, dag) == doctest::Approx(std::log(0.25)).epsilon(1e-14));
}

TEST_CASE("division by zero poisons only the affected output") {
  NetworkConfig c;
  c.depth = 1;
  c.input_count = 1;
  c.bases = {basis_by_name("DIV")};
  c.output_count = 2;
  const Network net(c);
  SampledDag dag{{{0, 0}, {1, 0}}};  // y0 = x0/x0, y1 = x0
  Eigen::MatrixXd x(3, 1);
  x << 2.0, 0.0, -1.0;
  const Eigen::MatrixXd y = evaluate(net, dag, x);
  CHECK(y(0, 0) == 1.0);
  CHECK(is_sentinel(y(1, 0)));
  CHECK(y(2, 0) == 1.0);
  CHECK(y(1, 1) == 0.0);
}

TEST_CASE("recurrence examples") {
  const Network inc = unary_chain("ADD", 1, {1.0});
  SampledDag plus_one{{{0, 1}, {2}}};
  Eigen::MatrixXd x0(1, 1);
  x0 << 0.0;
  auto r = evaluate_recurrent(inc, plus_one, x0, 3);
  REQUIRE(r.size() == 3);
  CHECK(r[0](0, 0) == 1);
  CHECK(r[1](0, 0) == 2);
  CHECK(r[2](0, 0) == 3);

  const Network sq = unary_chain("SQUARE");
  SampledDag square{{{0}, {1}}};
  Eigen::MatrixXd x2(1, 1);
  x2 << 2.0;
  r = evaluate_recurrent(sq, square, x2, 3);
  CHECK(r[0](0, 0) == 4);
  CHECK(r[1](0, 0) == 16);
  CHECK(r[2](0, 0) == 256);

  NetworkConfig c;
  c.depth = 2;
  c.input_count = 1;
  c.constants = {1.0, 2.0};
  c.bases = {basis_by_name("IF_LEQ"), basis_by_name("ADD"), basis_by_name("SUB")};
  const Network g(c);
  // layer 0: ADD(x, 2) rows 4,5 ; SUB(x, 1) rows 6,7
  // layer 1: IF_LEQ(2, x, sub, add) rows 0..3; sources: x 1 2 | if add sub
  SampledDag step;
  step.choices = {{0, 0, 0, 0, 0, 2, 0, 1}, {2, 0, 5, 4, 0, 0, 0, 0}, {6}};
  REQUIRE(is_valid(g, step));
  CHECK(to_string(dag_to_expression(g, step, 0)) == "if_leq(2, x0, (x0 - 1), (x0 + 2))");
  r = evaluate_recurrent(g, step, x0, 2);
  CHECK(r[0](0, 0) == 2);
  CHECK(r[1](0, 0) == 1);
}

TEST_CASE("sentinel persists through deeper recurrence") {
  NetworkConfig c;
  c.depth = 1;
  c.input_count = 1;
  c.constants = {1.0};
  c.bases = {basis_by_name("DIV")};
  const Network net(c);
  SampledDag dag{{{1, 0}, {2}}};  // 1 / x
  Eigen::MatrixXd x(1, 1);
  x << 0.0;
  const auto r = evaluate_recurrent(net, dag, x, 3);
  for (const auto& m : r) CHECK(is_sentinel(m(0, 0)));
}

TEST_CASE("most likely dag") {
  Network net(support::reference_config(2));
  SampledDag best = most_likely_dag(net);
  for (const auto& layer : best.choices) for (int i : layer) CHECK(i == 0);
  net.row(0, 0).setZero();
  net.row(0, 0)(1) = 5.0;
  best = most_likely_dag(net);
  CHECK(best.choices[0][0] == 1);
}

TEST_CASE("text form round trip") {
  Network net(support::reference_config(3));
  const SampledDag dag = support::reference_dag(net);
  const std::string text = to_text(dag);
  CHECK(text.rfind("dag 4", 0) == 0);
  CHECK(dag_from_text(text) == dag);
}

TEST_CASE("invalid dag detection") {
  Network net(support::reference_config(2));
  SampledDag dag = most_likely_dag(net);
  CHECK(is_valid(net, dag));
  dag.choices[0][0] = 4;
  CHECK_FALSE(is_valid(net, dag));
  dag.choices[0][0] = -1;
  CHECK_FALSE(is_valid(net, dag));
}
