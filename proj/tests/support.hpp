#pragma once

#include "funcnet/bases.hpp"
#include "funcnet/network.hpp"
#include "funcnet/sampler.hpp"

#include <numbers>
#include <random>
#include <vector>

namespace support {

// Two inputs, constants 1 and pi, bases ADD SIN SQUARE MUL, two outputs.
inline funcnet::NetworkConfig reference_config(int depth = 3, bool skips = true) {
  funcnet::NetworkConfig c;
  c.depth = depth;
  c.input_count = 2;
  c.constants = {1.0, std::numbers::pi};
  c.bases = {funcnet::basis_by_name("ADD"), funcnet::basis_by_name("SIN"),
             funcnet::basis_by_name("SQUARE"), funcnet::basis_by_name("MUL")};
  c.output_count = 2;
  c.skip_connections = skips;
  return c;
}

// y0 = sin(x0 + 1)^2, y1 = sin(pi^2 * sin(x1)) on reference_config(3).
// Sources per layer: x0 x1 1 pi | layer-0 images | layer-1 images | ...
inline funcnet::SampledDag reference_dag(const funcnet::Network& net) {
  funcnet::SampledDag dag;
  dag.choices.resize(net.depth() + 1);
  for (int l = 0; l <= net.depth(); ++l) dag.choices[l].assign(net.row_count(l), 0);
  dag.choices[0][0] = 0;   // ADD arg a: x0
  dag.choices[0][1] = 2;   // ADD arg b: 1
  dag.choices[0][2] = 1;   // SIN: x1
  dag.choices[0][3] = 3;   // SQUARE: pi
  dag.choices[1][2] = 4;   // SIN: layer-0 ADD
  dag.choices[1][4] = 6;   // MUL a: layer-0 SQUARE
  dag.choices[1][5] = 5;   // MUL b: layer-0 SIN
  dag.choices[2][2] = 11;  // SIN: layer-1 MUL
  dag.choices[2][3] = 9;   // SQUARE: layer-1 SIN
  dag.choices[3][0] = 14;  // y0: layer-2 SQUARE
  dag.choices[3][1] = 13;  // y1: layer-2 SIN
  return dag;
}

inline funcnet::NetworkConfig random_config(std::mt19937_64& rng, int max_depth = 3, int max_inputs = 3,
                                            int max_bases = 4, bool allow_no_skip = true) {
  const auto registry = funcnet::builtin_registry();
  std::uniform_int_distribution<int> depth(1, max_depth), inputs(1, max_inputs), nb(1, max_bases),
      outs(1, 3), consts(0, 2), pick(0, static_cast<int>(registry.size()) - 1);
  std::uniform_real_distribution<double> temp(0.5, 3.0), value(-2.0, 2.0);
  funcnet::NetworkConfig c;
  c.depth = depth(rng);
  c.input_count = inputs(rng);
  const int k = consts(rng);
  for (int i = 0; i < k; ++i) c.constants.push_back(value(rng));
  const int n = nb(rng);
  for (int i = 0; i < n; ++i) c.bases.push_back(registry[pick(rng)]);
  c.output_count = outs(rng);
  c.temperature = temp(rng);
  c.last_temperature = temp(rng);
  c.skip_connections = allow_no_skip ? (rng() % 2 == 0) : true;
  return c;
}

inline void randomize_weights(funcnet::Network& net, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  for (Eigen::Index i = 0; i < net.weights().size(); ++i) net.weights()(i) = g(rng);
}

}  // namespace support
