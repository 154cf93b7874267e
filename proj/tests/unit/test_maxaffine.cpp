#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dlse/deep_lse.hpp"
#include "dlse/errors.hpp"
#include "dlse/lse.hpp"
#include "dlse/maxaffine.hpp"
#include "support.hpp"

using namespace dlse;
using dlse::testing::random_net;
using dlse::testing::random_point;

namespace {

// Zero-temperature recursion written independently of surrogate_eval.
double hard_max_net(const DeepLseNet& net, const std::vector<double>& x) {
  double z = 0.0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& layer = net.layers[l];
    double best = -INFINITY;
    for (std::size_t k = 0; k < layer.width; ++k) {
      double u = layer.b[k] + (l > 0 ? net.skip(l, k) * z : 0.0);
      for (std::size_t j = 0; j < net.input_dim; ++j) u += layer.slope(k, j, net.input_dim) * x[j];
      best = std::max(best, u);
    }
    z = best;
  }
  return z + net.c_out;
}

}  // namespace

TEST_CASE("surrogate: independent hard-max recursion") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const auto net = random_net(gen, 1 + trial % 3, d, 4);
    for (int i = 0; i < 20; ++i) {
      const auto x = random_point(gen, d, 2.0);
      CHECK(surrogate_eval(net, x) == doctest::Approx(hard_max_net(net, x)).epsilon(1e-13));
    }
  }
}

TEST_CASE("paths: enumeration size, recursion vs closed form, max equals surrogate") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const auto net = random_net(gen, 1 + trial % 3, d, 4);
    const auto rec = expand_paths(net);
    const auto cf = expand_paths_closed_form(net);
    std::size_t count = 1;
    for (const auto& l : net.layers) count *= l.width;
    REQUIRE(rec.size() == count);
    REQUIRE(cf.size() == count);
    for (std::size_t p = 0; p < rec.size(); ++p) {
      CHECK(rec[p].path == cf[p].path);
      CHECK(std::abs(rec[p].intercept - cf[p].intercept) < 1e-12);
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(rec[p].slope[j] - cf[p].slope[j]) < 1e-12);
    }
    for (int i = 0; i < 50; ++i) {
      const auto x = random_point(gen, d, 2.0);
      CHECK(std::abs(max_over_paths(rec, x, net.c_out) - surrogate_eval(net, x)) < 1e-10);
    }
  }
}

TEST_CASE("paths: capacity guard") {
  const std::vector<std::size_t> widths{100, 100, 101};
  const auto net = init_network(widths, 1, 1, 0.5);
  CHECK_THROWS_AS(expand_paths(net), CapacityError);
}

TEST_CASE("delta_bound: hand-computed two-layer value") {
  auto net = init_network(std::vector<std::size_t>{3, 2}, 1, 9, 0.5);
  net.layers[0].t_raw = softplus_inv(0.5 - kMinTemperature);
  net.layers[1].t_raw = softplus_inv(0.25 - kMinTemperature);
  net.layers[1].eta = {softplus_inv(0.3), softplus_inv(0.6)};
  const auto rep = delta_bound(net);
  const double d1 = 0.5 * std::log(3.0);
  const double d2 = 0.25 * std::log(2.0) + 0.6 * d1;
  REQUIRE(rep.delta.size() == 2);
  CHECK(rep.delta[0] == doctest::Approx(d1).epsilon(1e-12));
  CHECK(rep.delta_total == doctest::Approx(d2).epsilon(1e-12));
  CHECK(std::abs(rep.delta_total - rep.delta_closed_form.back()) < 1e-12);
  REQUIRE(rep.depth_uniform_cap.has_value());
  CHECK(*rep.depth_uniform_cap == doctest::Approx(0.5 * std::log(3.0) / (1.0 - 0.6)).epsilon(1e-12));
  CHECK(*rep.depth_uniform_cap >= rep.delta_total);
}

TEST_CASE("delta_bound: no depth-uniform cap when skips reach one") {
  auto net = init_network(std::vector<std::size_t>{2, 2}, 1, 9, 0.5);
  net.layers[1].eta = {softplus_inv(1.5), softplus_inv(0.2)};
  CHECK_FALSE(delta_bound(net).depth_uniform_cap.has_value());
}

TEST_CASE("sandwich holds and is tight at low temperature") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const auto net = random_net(gen, 1 + trial % 3, d, 4);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(random_point(gen, d, 3.0));
    const auto rep = check_sandwich(net, pts);
    CHECK(rep.min_slack >= -1e-9);
    CHECK(rep.max_slack <= rep.delta + 1e-9);
  }
  auto cold = init_network(std::vector<std::size_t>{3, 3}, 1, 5, 1.0);
  for (auto& l : cold.layers) l.t_raw = -40.0;
  const double x = 0.3;
  const double gap = forward(cold, std::span<const double>(&x, 1)) - surrogate_eval(cold, std::span<const double>(&x, 1));
  CHECK(gap >= 0.0);
  CHECK(gap <= delta_bound(cold).delta_total + 1e-12);
}
