#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "funcnet/benchmarks.hpp"
#include "funcnet/errors.hpp"
#include "funcnet/expression.hpp"
#include "funcnet/trainer.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace funcnet;

namespace {

Network single_row(int sources) {
  NetworkConfig c;
  c.depth = 1;
  c.input_count = sources - 1;
  c.bases = {basis_by_name("ID")};
  return Network(c);
}

}  // namespace

TEST_CASE("fitness kernel") {
  CHECK(fitness(Eigen::Array2d(1, 2), Eigen::Array2d(1, 2), 1.0) ==
        doctest::Approx(2 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-14));
  CHECK(fitness(Eigen::Array2d(1, 2), Eigen::Array2d(1, 2), 1.0) == doctest::Approx(0.79788).epsilon(1e-5));
  CHECK(fitness(Eigen::Array<double, 1, 1>(1.0), Eigen::Array<double, 1, 1>(2.0), 1.0) ==
        doctest::Approx(0.24197).epsilon(1e-4));
  CHECK(fitness(Eigen::Array2d(kSentinel, kSentinel), Eigen::Array2d(1, 2), 1.0) == 0.0);
  CHECK(fitness(Eigen::Array2d(kSentinel, 1), Eigen::Array2d(1, 1), 1.0) ==
        doctest::Approx(1 / std::sqrt(2 * std::numbers::pi)));
  CHECK_THROWS(fitness(Eigen::Array2d(1, 1), Eigen::Array3d(1, 1, 1), 1.0));
}

TEST_CASE("loss gradient examples") {
  const Network net = single_row(2);
  // output row sees {x0, ID image}; choose x0 directly
  SampledDag dag{{{0}, {0}}};
  Eigen::VectorXd g = loss_gradient(net, dag, 1.0, 0);
  const Eigen::Index off = net.row_offset(1, 0);
  CHECK(g(off) == doctest::Approx(-0.5));
  CHECK(g(off + 1) == doctest::Approx(0.5));
  CHECK(g(net.row_offset(0, 0)) == 0.0);
  CHECK(loss_gradient(net, dag, 0.0, 0).isZero());
}

TEST_CASE("gradient matches finite differences") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = support::random_config(rng, 2, 2, 3);
    Network net(c);
    support::randomize_weights(net, rng, 0.7);
    Rng s = make_stream(trial);
    const SampledDag dag = sample(net, s);
    const int o = static_cast<int>(rng() % c.output_count);
    const double k = 0.5 + (rng() % 100) / 50.0;
    const Eigen::VectorXd g = loss_gradient(net, dag, k, o);
    const int outs[] = {o};
    for (Eigen::Index i = 0; i < net.weights().size(); ++i) {
      const double w = net.weights()(i);
      net.weights()(i) = w + 1e-5;
      const double up = -k * log_probability(net, dag, outs);
      net.weights()(i) = w - 1e-5;
      const double down = -k * log_probability(net, dag, outs);
      net.weights()(i) = w;
      const double fd = (up - down) / 2e-5;
      CHECK(std::abs(fd - g(i)) <= 1e-6 + 1e-5 * std::abs(g(i)));
    }
  }
}

TEST_CASE("select top") {
  Eigen::MatrixXd f(3, 1);
  f << 0.1, 0.9, 0.5;
  auto top = select_top(f, 2);
  CHECK(top[0][0] == Selection{1, 0.9});
  CHECK(top[0][1] == Selection{2, 0.5});
  Eigen::MatrixXd two(3, 2);
  two << 0.1, 0.8, 0.9, 0.2, 0.5, 0.3;
  top = select_top(two, 1);
  CHECK(top[0][0].candidate == 1);
  CHECK(top[1][0].candidate == 0);
  top = select_top(Eigen::MatrixXd::Constant(5, 1, 2.0), 3);
  CHECK(top[0][0].candidate == 0);
  CHECK(top[0][1].candidate == 1);
  CHECK(top[0][2].candidate == 2);
  CHECK_THROWS_AS(select_top(f, 4), ConfigError);
  CHECK_THROWS_AS(select_top(f, 0), ConfigError);
  const auto scaled = select_top(f * 7.5, 2);
  CHECK(scaled[0][0].candidate == 1);
  CHECK(scaled[0][1].candidate == 2);
}

TEST_CASE("rank reweighting") {
  const double a[] = {5.0, 3.0, 1.0};
  auto r = rank_reweight(a);
  CHECK(r[0] == 5.0);
  CHECK(r[1] == 1.5);
  CHECK(r[2] == doctest::Approx(1.0 / 3.0));
  const double one[] = {4.0};
  CHECK(rank_reweight(one)[0] == 4.0);
  const double tie[] = {2.0, 2.0, 2.0};
  r = rank_reweight(tie);
  CHECK(r[0] == 2.0);
  CHECK(r[1] == 1.0);
  CHECK(r[2] == doctest::Approx(2.0 / 3.0));
  const double mixed[] = {1.0, 5.0, 3.0};
  r = rank_reweight(mixed);
  CHECK(r[0] == doctest::Approx(1.0 / 3.0));
  CHECK(r[1] == 5.0);
  CHECK(r[2] == 1.5);
  r = rank_reweight(a, RankOrder::Increasing);
  CHECK(r[2] == 1.0);
  CHECK(r[1] == 1.5);
  CHECK(r[0] == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("adam") {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 1.0);
  AdamState s(3);
  adam_step(w, Eigen::VectorXd::Zero(3), s, 0.1);
  CHECK(w == Eigen::VectorXd::Constant(3, 1.0));
  CHECK(s.step == 1);

  w.setOnes();
  s = AdamState(3);
  adam_step(w, Eigen::Vector3d(2.0, -0.5, 1e-3), s, 0.01);
  CHECK(w(0) == doctest::Approx(1 - 0.01).epsilon(1e-6));
  CHECK(w(1) == doctest::Approx(1 + 0.01).epsilon(1e-6));
  CHECK(w(2) == doctest::Approx(1 - 0.01).epsilon(1e-4));
  s.first *= 3.0;
  const Eigen::VectorXd m = s.first;
  adam_step(w, Eigen::VectorXd::Zero(3), s, 0.01);
  CHECK((s.first - 0.9 * m).norm() < 1e-15);

  w.setZero();
  s = AdamState(3);
  double last = 0;
  for (int i = 0; i < 20; ++i) {
    adam_step(w, Eigen::Vector3d(1, 1, 1), s, 0.01);
    CHECK(w(0) < last);
    last = w(0);
  }
}

TEST_CASE("one step raises the selected route") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Network net(support::random_config(rng, 2, 2, 3));
    support::randomize_weights(net, rng, 0.5);
    Rng s = make_stream(trial, 7);
    const SampledDag dag = sample(net, s);
    const int outs[] = {0};
    const double before = log_probability(net, dag, outs);
    AdamState st(net.parameter_count());
    adam_step(net.weights(), loss_gradient(net, dag, 2.0, 0), st, 0.05);
    CHECK(log_probability(net, dag, outs) > before);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.samples = 3;
  c.truncation = 4;
  CHECK_THROWS_AS(c.validate(1), ConfigError);
  c.recurrence_depth = 2;
  CHECK_NOTHROW(c.validate(1));
  CHECK_THROWS_AS(c.validate(2), ConfigError);
  c = TrainConfig{};
  c.variance = 0;
  CHECK_THROWS_AS(c.validate(1), ConfigError);
  c = TrainConfig{};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(1), ConfigError);
}

TEST_CASE("degenerate data converges at once") {
  NetworkConfig nc;
  nc.depth = 1;
  nc.input_count = 1;
  nc.constants = {3.0};
  nc.bases = {basis_by_name("ADD")};
  Dataset d;
  d.inputs = Eigen::MatrixXd::Constant(20, 1, 3.0);
  d.targets = Eigen::MatrixXd::Constant(20, 1, 3.0);
  TrainConfig tc;
  tc.samples = 20;
  tc.truncation = 3;
  tc.max_epochs = 500;
  tc.seed = 2;
  const TrainRun run = train(Network(nc), [&](int) { return d; }, tc);
  CHECK(run.verdict == Verdict::Converged);
  CHECK(run.converged_epoch < 100);
  CHECK(run.converged_epoch >= tc.patience);
}

TEST_CASE("forced non-convergence") {
  const TargetSpec t = benchmark_target("sin_3x_plus_2");
  NetworkConfig nc;
  nc.depth = 2;
  nc.input_count = 1;
  nc.bases = {basis_by_name("ADD")};
  TrainConfig tc;
  tc.samples = 10;
  tc.max_epochs = 3;
  const TrainRun run = train(Network(nc), [&](int e) { return generate(t, 100, e); }, tc);
  CHECK(run.verdict == Verdict::MaxEpochsExhausted);
  CHECK(run.converged_epoch == 3);
  CHECK(std::string(to_string(run.verdict)) == "max-epochs-exhausted");
}

TEST_CASE("training is deterministic across thread counts") {
  const TargetSpec t = benchmark_target("2x2_plus_3x");
  NetworkConfig nc;
  nc.depth = 3;
  nc.input_count = 1;
  nc.bases = {basis_by_name("MUL"), basis_by_name("MUL"), basis_by_name("ADD"), basis_by_name("ADD")};
  TrainConfig tc;
  tc.samples = 50;
  tc.learning_rate = 0.05;
  tc.max_epochs = 40;
  tc.seed = 8;
  tc.rank_reweight = true;
  auto batches = [&](int e) { return generate(t, 200, 100 + e); };
  tc.threads = 1;
  const TrainRun a = train(Network(nc), batches, tc);
  tc.threads = 3;
  const TrainRun b = train(Network(nc), batches, tc);
  CHECK(a.network.weights() == b.network.weights());
  CHECK(a.epoch == b.epoch);
}

TEST_CASE("observer sees every epoch with decreasing selections") {
  const TargetSpec t = benchmark_target("2x2_plus_3x");
  NetworkConfig nc;
  nc.depth = 2;
  nc.input_count = 1;
  nc.bases = {basis_by_name("MUL"), basis_by_name("ADD")};
  TrainConfig tc;
  tc.samples = 20;
  tc.max_epochs = 5;
  int seen = 0;
  train(Network(nc), [&](int e) { return generate(t, 100, e); }, tc, [&](const TrainRun& run, const EpochStats& s) {
    ++seen;
    CHECK(s.epoch == run.epoch);
    CHECK(s.selected_fitness[0].size() == 5);
    for (std::size_t i = 1; i < s.selected_fitness[0].size(); ++i) {
      CHECK(s.selected_fitness[0][i] <= s.selected_fitness[0][i - 1]);
    }
    const Eigen::VectorXd p = run.network.probabilities();
    CHECK(std::abs(p.segment(run.network.row_offset(0, 0), run.network.source_count(0)).sum() - 1) < 1e-12);
  });
  CHECK(seen == 5);
}

TEST_CASE("recurrent candidates carry their depth") {
  const TargetSpec t = benchmark_target("recurrent_add_sub");
  NetworkConfig nc;
  nc.depth = 2;
  nc.input_count = 1;
  nc.constants = {1, 2};
  nc.bases = {basis_by_name("IF_LEQ"), basis_by_name("ADD"), basis_by_name("SUB")};
  TrainConfig tc;
  tc.samples = 10;
  tc.truncation = 25;
  tc.recurrence_depth = 3;
  tc.max_epochs = 1;
  TrainRun run(Network{nc});
  const EpochStats s = train_epoch(run, generate(t, 50, 1), tc);
  REQUIRE(s.selected[0].size() == 25);
  bool deep = false;
  for (const auto& c : s.selected[0]) {
    CHECK(c.depth >= 1);
    CHECK(c.depth <= 3);
    deep = deep || c.depth > 1;
  }
  CHECK(deep);
}
