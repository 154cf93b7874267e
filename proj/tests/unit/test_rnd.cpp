#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "dlse/errors.hpp"
#include "dlse/pricing.hpp"
#include "dlse/rnd.hpp"

using namespace dlse;

namespace {

double lognormal_pdf(double k, double s0, double r, double q, double sigma, double tau) {
  const double mu = std::log(s0) + (r - q - 0.5 * sigma * sigma) * tau;
  const double sd = sigma * std::sqrt(tau);
  const double z = (std::log(k) - mu) / sd;
  return std::exp(-0.5 * z * z) / (k * sd * std::sqrt(2.0 * std::numbers::pi));
}

StrikeGrid bl_grid(double rate = 0.0) { return uniform_grid(40.0, 220.0, 361, 100.0, rate, 0.0, 1.0); }

IvModel flat(double sigma) {
  return [sigma](double) { return sigma; };
}

}  // namespace

TEST_CASE("extract_rnd: flat volatility recovers the lognormal density") {
  const auto g = bl_grid();
  REQUIRE(g.step() == doctest::Approx(0.5));
  const auto rnd = extract_rnd(flat(0.2), g);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    worst = std::max(worst, std::abs(rnd.density[i] - lognormal_pdf(g.strikes[i], 100, 0, 0, 0.2, 1)));
  CHECK(worst < 1e-4);
  CHECK(trapezoid(g, rnd.density) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(rnd.mass_warning);
  for (double f : rnd.density) CHECK(f >= 0.0);

  // Nonzero rate and dividend: the e^{r tau} scaling is part of the oracle.
  const auto g2 = uniform_grid(40.0, 220.0, 361, 100.0, 0.05, 0.02, 1.0);
  const auto r2 = extract_rnd(flat(0.25), g2);
  for (std::size_t i = 20; i + 20 < g2.size(); ++i)
    CHECK(std::abs(r2.raw_density[i] - lognormal_pdf(g2.strikes[i], 100, 0.05, 0.02, 0.25, 1)) < 1e-4);

  const auto again = extract_rnd(flat(0.2), g);
  CHECK(again.density == rnd.density);
  CHECK(again.raw_density == rnd.raw_density);
}

TEST_CASE("extract_rnd: convex smile gives convex prices, errors name the strike") {
  const auto g = moneyness_grid(100, 0.01, 0.0, 0.5);
  const auto rnd = extract_rnd([](double m) { return 0.2 + 0.3 * (m - 1.0) * (m - 1.0); }, g);
  std::size_t ok = 0;
  for (std::size_t i = 1; i + 1 < g.size(); ++i) ok += rnd.raw_density[i] >= -1e-6;
  CHECK(static_cast<double>(ok) >= 0.99 * static_cast<double>(g.size() - 2));
  CHECK(trapezoid(g, rnd.density) == doctest::Approx(1.0).epsilon(1e-9));

  try {
    extract_rnd([](double m) { return m > 1.2 ? std::nan("") : 0.2; }, g);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("strike 120.25") != std::string::npos);
  }
  StrikeGrid bad = g;
  bad.strikes.resize(4);
  CHECK_THROWS_AS(extract_rnd(flat(0.2), bad), DomainError);
}

TEST_CASE("clean_density: clipping, renormalization and the mass warning") {
  const auto g = uniform_grid(1.0, 9.0, 9, 5.0, 0.0, 0.0, 1.0);
  std::vector<double> raw{0, 0.05, -0.01, 0.05, 0.05, 0.05, 0.05, 0.05, 0};
  const auto est = clean_density(g, raw);
  CHECK(est.raw_density == raw);
  CHECK(est.density[2] == 0.0);
  CHECK(trapezoid(g, est.density) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.raw_mass == doctest::Approx(0.29));
  CHECK(est.mass_warning);
  CHECK_THROWS_AS(clean_density(g, std::vector<double>(9, -1.0)), NumericError);
}

TEST_CASE("with_wings: identity inside, C1 at the edges, bounded outside") {
  const IvModel inner = [](double m) { return 0.2 + 0.4 * (m - 1.0) * (m - 1.0) + 0.1 * (m - 1.0); };
  const IvSupport sup{0.6, 1.5, 0.1};
  const auto w = with_wings(inner, sup);
  for (double m : {0.6, 0.8, 1.0, 1.3, 1.5}) CHECK(w(m) == inner(m));

  const double h = 1e-6;
  for (double edge : {sup.lo, sup.hi}) {
    CHECK(std::abs(w(edge + h) - w(edge - h)) < 1e-5);
    const double left = (w(edge - h) - w(edge - 2 * h)) / h;
    const double right = (w(edge + 2 * h) - w(edge + h)) / h;
    CHECK(left == doctest::Approx(right).epsilon(1e-3));
  }
  const double s_hi = 0.8 * 0.5 + 0.1;
  const double s_lo = 0.8 * -0.4 + 0.1;
  CHECK(w(50.0) == doctest::Approx(inner(1.5) + s_hi * 0.1).epsilon(1e-8));
  CHECK(w(1e-9) == doctest::Approx(inner(0.6) - s_lo * 0.1 * -std::expm1(-(0.6 - 1e-9) / 0.1)).epsilon(1e-8));
  CHECK(w(2.0) == doctest::Approx(inner(1.5) + s_hi * 0.1 * (1.0 - std::exp(-5.0))).epsilon(1e-8));

  CHECK_THROWS_AS(with_wings(inner, IvSupport{0.0, 1.0, 0.1}), DomainError);
  CHECK_THROWS_AS(with_wings(inner, IvSupport{1.2, 1.0, 0.1}), DomainError);
  CHECK_THROWS_AS(with_wings(inner, IvSupport{0.5, 1.0, 0.0}), DomainError);
}

TEST_CASE("price_from_rnd: forward identity, edges, Black-Scholes round trip") {
  const auto g = bl_grid(0.03);
  const auto rnd = extract_rnd(flat(0.2), g);
  const double df = std::exp(-0.03);
  // Full expectation needs the upper tail inside the grid.
  const auto wide = uniform_grid(20.0, 320.0, 601, 100.0, 0.03, 0.0, 1.0);
  const auto rw = extract_rnd(flat(0.2), wide);
  CHECK(std::abs(price_from_rnd(rw, 20.0) - df * (wide.forward() - 20.0)) < 1e-3);
  CHECK(price_from_rnd(rnd, g.strikes.back()) == 0.0);
  CHECK(price_from_rnd(rnd, 500.0) == 0.0);
  CHECK_THROWS_AS(price_from_rnd(rnd, 39.0), DomainError);
  CHECK_THROWS_AS(price_from_rnd(rnd, 230.0, OptionKind::Put), DomainError);

  for (double k = 60.0; k <= 160.0; k += 3.7) {
    CHECK(std::abs(price_from_rnd(rnd, k) - bs_price(100, k, 0.03, 0, 0.2, 1, OptionKind::Call)) < 0.05);
    CHECK(std::abs(price_from_rnd(rnd, k, OptionKind::Put) - bs_price(100, k, 0.03, 0, 0.2, 1, OptionKind::Put)) < 0.05);
  }

  // Index-scale chain: spot 2000, one month.
  const auto big = moneyness_grid(2000, 0.0, 0.0, 1.0 / 12.0);
  const auto r2 = extract_rnd(flat(0.18), big);
  for (double k = 1900; k <= 2150; k += 50)
    CHECK(std::abs(price_from_rnd(r2, k) - bs_price(2000, k, 0, 0, 0.18, 1.0 / 12.0, OptionKind::Call)) < 0.05);

  // Sub-cell correction: the price is continuous and decreasing in strike.
  double prev = price_from_rnd(rnd, 99.0);
  for (double k = 99.05; k < 101.0; k += 0.05) {
    const double p = price_from_rnd(rnd, k);
    CHECK(p < prev);
    CHECK(prev - p < 0.05);
    prev = p;
  }
}

TEST_CASE("pricing_report and MAE") {
  const auto g = bl_grid();
  const auto rnd = extract_rnd(flat(0.2), g);
  std::vector<OptionQuote> qs;
  for (double k : {90.0, 100.0, 110.0}) qs.push_back({k, price_from_rnd(rnd, k), OptionKind::Call, 1.0, 100, 0, 0});
  const auto same = pricing_report(rnd, qs);
  for (double e : same.abs_errors) CHECK(e == 0.0);
  CHECK(same.mae == 0.0);

  const std::vector<double> errs{0.20, 0.69, 0.26, 0.28, 0.45, 0.27};
  CHECK(mean_absolute_error(errs) == doctest::Approx(2.15 / 6.0).epsilon(1e-14));
  CHECK(mean_absolute_error(errs) == doctest::Approx(0.358).epsilon(1e-3));
  std::vector<double> twice = errs;
  for (double& e : twice) e *= 2.0;
  CHECK(mean_absolute_error(twice) == doctest::Approx(2.0 * mean_absolute_error(errs)).epsilon(1e-15));

  qs[1].price += 0.3;
  const auto off = pricing_report(rnd, qs);
  CHECK(off.abs_errors[1] == doctest::Approx(0.3));
  CHECK(off.mae == doctest::Approx(0.1));
  CHECK_THROWS_AS(mean_absolute_error(std::vector<double>{}), DomainError);
}

TEST_CASE("quadratic spline: knots, linears, dense-solve oracle") {
  const std::vector<IvPoint> pts{{0.8, 0.30}, {0.9, 0.26}, {1.0, 0.25}, {1.15, 0.27}, {1.3, 0.31}};
  const QuadraticSpline s(pts);
  for (const auto& p : pts) CHECK(s(p.moneyness) == p.sigma);
  CHECK(s(0.1) == 0.30);
  CHECK(s(5.0) == 0.31);

  std::vector<IvPoint> line;
  for (double x : {0.7, 0.85, 1.0, 1.05, 1.4}) line.push_back({x, 0.5 - 0.2 * x});
  const QuadraticSpline l(line);
  for (double x = 0.7; x <= 1.4; x += 0.01) CHECK(std::abs(l(x) - (0.5 - 0.2 * x)) < 1e-12);

  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> gap(0.05, 0.3), val(0.1, 0.6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<IvPoint> r;
    double x = 0.5;
    for (int i = 0; i < 5; ++i) {
      r.push_back({x, val(gen)});
      x += gap(gen);
    }
    std::shuffle(r.begin(), r.end(), gen);
    const QuadraticSpline sp(r);
    std::sort(r.begin(), r.end(), [](const IvPoint& a, const IvPoint& b) { return a.moneyness < b.moneyness; });

    // Unknowns (a_i, b_i, c_i) for 4 pieces: interpolation at both ends,
    // slope continuity at the 3 interior knots, zero curvature on the first piece.
    const int m = 4;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * m, 3 * m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * m);
    int row = 0;
    for (int i = 0; i < m; ++i) {
      const double h = r[i + 1].moneyness - r[i].moneyness;
      A(row, 3 * i) = 1.0;
      rhs(row++) = r[i].sigma;
      A(row, 3 * i) = 1.0;
      A(row, 3 * i + 1) = h;
      A(row, 3 * i + 2) = h * h;
      rhs(row++) = r[i + 1].sigma;
      if (i + 1 < m) {
        A(row, 3 * i + 1) = 1.0;
        A(row, 3 * i + 2) = 2.0 * h;
        A(row++, 3 * (i + 1) + 1) = -1.0;
      }
    }
    A(row++, 2) = 1.0;
    REQUIRE(row == 3 * m);
    const Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
    REQUIRE(sp.pieces().size() == 4);
    for (int i = 0; i < m; ++i) {
      const auto& p = sp.pieces()[static_cast<std::size_t>(i)];
      CHECK(p.x0 == r[i].moneyness);
      CHECK(p.a == doctest::Approx(sol(3 * i)).epsilon(1e-9));
      CHECK(p.b == doctest::Approx(sol(3 * i + 1)).epsilon(1e-9));
      CHECK(p.c == doctest::Approx(sol(3 * i + 2)).epsilon(1e-9));
    }
  }

  const std::vector<IvPoint> dup{{0.9, 0.2}, {1.0, 0.2}, {0.9, 0.3}};
  CHECK_THROWS_AS(QuadraticSpline{dup}, DomainError);
  const std::vector<IvPoint> one{{1.0, 0.2}};
  CHECK_THROWS_AS(QuadraticSpline{one}, DomainError);
}

TEST_CASE("fit_parametric: self-consistent recovery, initializer, degenerate flag") {
  const auto g = moneyness_grid(100, 0.0, 0.0, 1.0, 0.3, 2.5, 881);
  const double p1 = std::log(100.0) - 0.03, p2 = 0.25;
  const auto truth = parametric_density(ParametricFamily::Lognormal, p1, p2, g);
  std::vector<OptionQuote> qs;
  for (double k : {80.0, 90.0, 100.0, 110.0, 125.0})
    qs.push_back({k, price_from_rnd(truth, k), OptionKind::Call, 1.0, 100, 0, 0});
  const auto fit = fit_parametric(qs, ParametricFamily::Lognormal, g);
  CHECK(fit.p1 == doctest::Approx(p1).epsilon(1e-3));
  CHECK(fit.p2 == doctest::Approx(p2).epsilon(1e-3));
  CHECK_FALSE(fit.degenerate);
  CHECK(trapezoid(g, fit.rnd.density) == doctest::Approx(1.0).epsilon(1e-9));

  const auto ntruth = parametric_density(ParametricFamily::Normal, 101.0, 18.0, g);
  for (auto& q : qs) q.price = price_from_rnd(ntruth, q.strike);
  const auto nfit = fit_parametric(qs, ParametricFamily::Normal, g);
  CHECK(nfit.init_p1 == doctest::Approx(g.forward()));
  CHECK(nfit.p1 == doctest::Approx(101.0).epsilon(1e-3));
  CHECK(nfit.p2 == doctest::Approx(18.0).epsilon(1e-3));

  const auto again = fit_parametric(qs, ParametricFamily::Normal, g);
  CHECK(again.p1 == nfit.p1);
  CHECK(again.p2 == nfit.p2);

  std::vector<OptionQuote> level(3, OptionQuote{100.0, 5.0, OptionKind::Call, 1.0, 100, 0, 0});
  CHECK(fit_parametric(level, ParametricFamily::Lognormal, g).degenerate);
  CHECK_THROWS_AS(fit_parametric(std::vector<OptionQuote>(qs.begin(), qs.begin() + 1), ParametricFamily::Normal, g),
                  DomainError);
}

TEST_CASE("l1_distance") {
  const auto g = uniform_grid(1.0, 10.0, 10, 5.0, 0.0, 0.0, 1.0);
  const auto a = clean_density(g, {1, 1, 1, 1, 0, 0, 0, 0, 0, 0});
  const auto b = clean_density(g, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
  CHECK(l1_distance(a, a) == 0.0);
  CHECK(l1_distance(a, b) == doctest::Approx(2.0).epsilon(1e-14));
  const auto c = extract_rnd(flat(0.3), uniform_grid(1.0, 10.0, 10, 5.0, 0.0, 0.0, 1.0));
  CHECK(l1_distance(a, c) == l1_distance(c, a));
  CHECK(l1_distance(a, c) >= 0.0);
  CHECK(l1_distance(a, c) <= 2.0 + 1e-12);
  const auto other = clean_density(uniform_grid(1.0, 11.0, 10, 5.0, 0.0, 0.0, 1.0), {1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  CHECK_THROWS_AS(l1_distance(a, other), DomainError);
}
