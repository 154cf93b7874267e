#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dlse/deep_lse.hpp"

namespace dlse::testing {

// Random network with random skips and temperatures (not the init defaults),
// so that every parameter kind matters.
inline DeepLseNet random_net(std::mt19937_64& gen, std::size_t depth, std::size_t input_dim,
                             std::size_t max_width = 4) {
  std::uniform_int_distribution<std::size_t> width(1, max_width);
  std::vector<std::size_t> widths(depth);
  for (auto& k : widths) k = width(gen);
  DeepLseNet net = init_network(widths, input_dim, gen(), 1.0);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (auto& layer : net.layers) {
    for (double& e : layer.eta) e = u(gen);
    layer.t_raw = u(gen);
  }
  net.c_out = u(gen);
  return net;
}

inline std::vector<double> random_point(std::mt19937_64& gen, std::size_t d, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> x(d);
  for (double& v : x) v = u(gen);
  return x;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace dlse::testing
