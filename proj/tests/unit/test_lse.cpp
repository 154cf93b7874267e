#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "dlse/errors.hpp"
#include "dlse/lse.hpp"

using namespace dlse;

TEST_CASE("lse: worked values") {
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(lse(1.0, zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> single{3.0};
  CHECK(lse(2.0, single) == 3.0);
  const std::vector<double> pair{1.0, 0.0};
  CHECK(std::abs(lse(0.01, pair) - 1.0) < 1e-12);
}

TEST_CASE("lse: no overflow on large scores") {
  const std::vector<double> big{1000.0, 999.0};
  const double v = lse(1.0, big);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1000.0 + std::log1p(std::exp(-1.0))));
  const std::vector<double> small{-1000.0, -1000.0};
  CHECK(lse(0.5, small) == doctest::Approx(-1000.0 + 0.5 * std::log(2.0)));
}

TEST_CASE("lse: errors") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(lse(1.0, empty), DomainError);
  const std::vector<double> u{1.0};
  CHECK_THROWS_AS(lse(0.0, u), DomainError);
  CHECK_THROWS_AS(lse(-1.0, u), DomainError);
  const std::vector<double> bad{NAN};
  CHECK_THROWS_AS(lse(1.0, bad), DomainError);
  CHECK_THROWS_AS(lse_weights(1.0, empty), DomainError);
}

TEST_CASE("lse_weights: worked values and brute-force softmax") {
  const std::vector<double> zeros{0.0, 0.0};
  auto w = lse_weights(1.0, zeros);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));
  const std::vector<double> one{4.2};
  CHECK(lse_weights(1.0, one)[0] == 1.0);

  const std::vector<double> u{1.0, 0.0, -1.0};
  w = lse_weights(0.5, u);
  long double den = 0.0L;
  for (double x : u) den += std::exp(static_cast<long double>(x) / 0.5L);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const long double ref = std::exp(static_cast<long double>(u[i]) / 0.5L) / den;
    CHECK(std::abs(static_cast<long double>(w[i]) - ref) < 1e-14L);
  }
}

TEST_CASE("softplus and inverse") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  const double tiny = softplus(-50.0);
  CHECK(tiny > 0.0);
  CHECK(tiny == doctest::Approx(1.9287498479639178e-22).epsilon(1e-6));
  CHECK(std::abs(softplus_inv(softplus(3.7)) - 3.7) < 1e-9);
  for (double x = -30.0; x <= 30.0; x += 0.37) CHECK(std::abs(softplus_inv(softplus(x)) - x) < 1e-9);
  CHECK_THROWS_AS(softplus_inv(0.0), DomainError);
  CHECK_THROWS_AS(softplus_inv(-1.0), DomainError);
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("lse: properties on random inputs") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> temp(0.01, 3.0);
  std::uniform_int_distribution<int> len(1, 8);
  for (int trial = 0; trial < 2000; ++trial) {
    const double t = temp(gen);
    std::vector<double> a(len(gen)), b;
    for (double& x : a) x = u(gen);
    b = a;
    for (double& x : b) x += 0.5 * u(gen);
    const double mx = *std::max_element(a.begin(), a.end());
    const double la = lse(t, a), lb = lse(t, b);

    // Bracketed by max and max + T log m.
    CHECK(la >= mx - 1e-12);
    CHECK(la <= mx + t * std::log(static_cast<double>(a.size())) + 1e-12);

    // 1-Lipschitz in the sup norm.
    double sup = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sup = std::max(sup, std::abs(a[i] - b[i]));
    CHECK(std::abs(la - lb) <= sup + 1e-12);

    // Translation equivariance.
    const double c = u(gen);
    std::vector<double> shifted = a;
    for (double& x : shifted) x += c;
    CHECK(std::abs(lse(t, shifted) - (la + c)) < 1e-10);

    // Monotone componentwise.
    std::vector<double> up = a;
    for (double& x : up) x += std::abs(u(gen));
    CHECK(lse(t, up) >= la - 1e-12);

    // Weights: probabilities summing to one, equal to the FD gradient.
    const auto w = lse_weights(t, a);
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(w[i] >= 0.0);
      CHECK(w[i] <= 1.0);
      auto p = a, m = a;
      p[i] += h;
      m[i] -= h;
      const double fd = (lse(t, p) - lse(t, m)) / (2.0 * h);
      CHECK(std::abs(fd - w[i]) <= 1e-6 * std::max(1.0, std::abs(w[i])));
    }
  }
}

TEST_CASE("lse_with_weights agrees with the checked entry points") {
  const std::vector<double> u{0.3, -1.2, 2.5, 2.4};
  std::vector<double> w(u.size());
  const double v = lse_with_weights(0.7, u, w);
  CHECK(v == lse(0.7, u));
  const auto ref = lse_weights(0.7, u);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(w[i] == doctest::Approx(ref[i]).epsilon(1e-15));
}
