#include "dlse/rnd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "dlse/errors.hpp"

namespace dlse {

double StrikeGrid::forward() const { return spot * std::exp((rate - dividend) * tau); }

void validate(const StrikeGrid& g) {
  if (g.size() < 5) throw DomainError("StrikeGrid: at least 5 strikes required");
  if (!(g.spot > 0.0) || !(g.tau > 0.0)) throw DomainError("StrikeGrid: spot and tau must be positive");
  if (!std::isfinite(g.rate) || !std::isfinite(g.dividend)) throw DomainError("StrikeGrid: non-finite rate");
  if (!(g.strikes.front() > 0.0)) throw DomainError("StrikeGrid: strikes must be positive");
  const double h = g.step();
  if (!(h > 0.0)) throw DomainError("StrikeGrid: strikes must be strictly increasing");
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double hi = g.strikes[i] - g.strikes[i - 1];
    if (std::abs(hi - h) > 1e-9 * std::max(1.0, g.strikes[i])) throw DomainError("StrikeGrid: spacing must be uniform");
  }
}

StrikeGrid uniform_grid(double lo, double hi, std::size_t n, double spot, double rate, double dividend, double tau) {
  if (n < 5 || !(hi > lo)) throw DomainError("uniform_grid: need n >= 5 and hi > lo");
  StrikeGrid g;
  g.spot = spot;
  g.rate = rate;
  g.dividend = dividend;
  g.tau = tau;
  g.strikes.resize(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g.strikes[i] = lo + h * static_cast<double>(i);
  g.strikes.back() = hi;
  validate(g);
  return g;
}

StrikeGrid moneyness_grid(double spot, double rate, double dividend, double tau, double m_lo, double m_hi,
                          std::size_t n) {
  return uniform_grid(m_lo * spot, m_hi * spot, n, spot, rate, dividend, tau);
}

double trapezoid(const StrikeGrid& grid, std::span<const double> values) {
  if (values.size() != grid.size()) throw DomainError("trapezoid: value count does not match grid");
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    s += 0.5 * (values[i] + values[i - 1]) * (grid.strikes[i] - grid.strikes[i - 1]);
  return s;
}

RndEstimate clean_density(const StrikeGrid& grid, std::vector<double> raw) {
  validate(grid);
  RndEstimate est;
  est.grid = grid;
  est.raw_mass = trapezoid(grid, raw);
  est.mass_warning = !(est.raw_mass >= 0.9 && est.raw_mass <= 1.1);
  est.density.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) est.density[i] = std::max(raw[i], 0.0);
  const double mass = trapezoid(grid, est.density);
  if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericError("clean_density: no positive mass left after clipping");
  for (double& f : est.density) f /= mass;
  est.raw_density = std::move(raw);
  return est;
}

RndEstimate extract_rnd_from_prices(std::span<const double> c, const StrikeGrid& grid) {
  validate(grid);
  if (c.size() != grid.size()) throw DomainError("extract_rnd: price count does not match grid");
  const std::size_t n = grid.size();
  const double h = grid.step();
  const double scale = std::exp(grid.rate * grid.tau) / (h * h);
  std::vector<double> raw(n);
  for (std::size_t i = 1; i + 1 < n; ++i) raw[i] = scale * (c[i - 1] - 2.0 * c[i] + c[i + 1]);
  // One-sided second differences at the ends.
  raw[0] = scale * (c[0] - 2.0 * c[1] + c[2]);
  raw[n - 1] = scale * (c[n - 3] - 2.0 * c[n - 2] + c[n - 1]);
  return clean_density(grid, std::move(raw));
}

RndEstimate extract_rnd(const IvModel& iv_model, const StrikeGrid& grid) {
  validate(grid);
  std::vector<double> prices(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double k = grid.strikes[i];
    const double sigma = iv_model(k / grid.spot);
    if (!std::isfinite(sigma) || !(sigma > 0.0))
      throw NumericError("extract_rnd: invalid implied volatility " + std::to_string(sigma) + " at strike " +
                         std::to_string(k));
    prices[i] = bs_price(grid.spot, k, grid.rate, grid.dividend, sigma, grid.tau, OptionKind::Call);
  }
  return extract_rnd_from_prices(prices, grid);
}

IvModel with_wings(IvModel inner, const IvSupport& sup) {
  if (!(sup.lo > 0.0 && sup.hi > sup.lo) || !(sup.decay > 0.0))
    throw DomainError("with_wings: need 0 < lo < hi and decay > 0");
  const double h = 1e-5 * (sup.hi - sup.lo);
  const double v_lo = inner(sup.lo), v_hi = inner(sup.hi);
  const double s_lo = (inner(sup.lo + h) - inner(sup.lo - h)) / (2.0 * h);
  const double s_hi = (inner(sup.hi + h) - inner(sup.hi - h)) / (2.0 * h);
  return [inner = std::move(inner), sup, v_lo, v_hi, s_lo, s_hi](double m) {
    if (m > sup.hi) return v_hi + s_hi * sup.decay * -std::expm1(-(m - sup.hi) / sup.decay);
    if (m < sup.lo) return v_lo - s_lo * sup.decay * -std::expm1(-(sup.lo - m) / sup.decay);
    return inner(m);
  };
}

double price_from_rnd(const RndEstimate& rnd, double strike, OptionKind kind) {
  const auto& s = rnd.grid.strikes;
  const auto& f = rnd.density;
  const std::size_t n = s.size();
  if (f.size() != n || n < 2) throw DomainError("price_from_rnd: density does not match grid");
  if (!std::isfinite(strike) || strike < s.front())
    throw DomainError("price_from_rnd: strike " + std::to_string(strike) + " below the grid");
  const double df = std::exp(-rnd.grid.rate * rnd.grid.tau);

  if (kind == OptionKind::Call) {
    if (strike >= s.back()) return 0.0;
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), strike) - s.begin()) - 1;
    // Sub-cell [K, s_{j+1}]: payoff is zero at K, so only the right end counts.
    const double right = s[j + 1] - strike;
    double sum = 0.5 * right * right * f[j + 1];
    for (std::size_t i = j + 1; i + 1 < n; ++i)
      sum += 0.5 * ((s[i] - strike) * f[i] + (s[i + 1] - strike) * f[i + 1]) * (s[i + 1] - s[i]);
    return df * sum;
  }

  if (strike > s.back()) throw DomainError("price_from_rnd: put strike " + std::to_string(strike) + " above the grid");
  if (strike == s.front()) return 0.0;
  const std::size_t j = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), strike) - s.begin());
  // Cells fully below K, then the sub-cell [s_{j-1}, K].
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < j; ++i)
    sum += 0.5 * ((strike - s[i]) * f[i] + (strike - s[i + 1]) * f[i + 1]) * (s[i + 1] - s[i]);
  const double left = strike - s[j - 1];
  sum += 0.5 * left * left * f[j - 1];
  return df * sum;
}

double mean_absolute_error(std::span<const double> abs_errors) {
  if (abs_errors.empty()) throw DomainError("mean_absolute_error: no errors");
  return std::accumulate(abs_errors.begin(), abs_errors.end(), 0.0) / static_cast<double>(abs_errors.size());
}

PricingReport pricing_report(const RndEstimate& rnd, std::span<const OptionQuote> quotes) {
  if (quotes.empty()) throw DomainError("pricing_report: no quotes");
  PricingReport rep;
  for (const auto& q : quotes) {
    const double model = price_from_rnd(rnd, q.strike, q.kind);
    rep.strikes.push_back(q.strike);
    rep.market.push_back(q.price);
    rep.model.push_back(model);
    rep.abs_errors.push_back(std::abs(q.price - model));
  }
  rep.mae = mean_absolute_error(rep.abs_errors);
  return rep;
}

QuadraticSpline::QuadraticSpline(std::span<const IvPoint> points) {
  if (points.size() < 2) throw DomainError("quadratic_spline: at least 2 points required");
  std::vector<IvPoint> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const IvPoint& a, const IvPoint& b) { return a.moneyness < b.moneyness; });
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && !(pts[i].moneyness > pts[i - 1].moneyness)) throw DomainError("quadratic_spline: duplicate knot");
    xs_.push_back(pts[i].moneyness);
    ys_.push_back(pts[i].sigma);
  }
  const std::size_t n = xs_.size();
  double slope = (ys_[1] - ys_[0]) / (xs_[1] - xs_[0]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = xs_[i + 1] - xs_[i];
    const double next = 2.0 * (ys_[i + 1] - ys_[i]) / h - slope;
    pieces_.push_back({xs_[i], ys_[i], slope, (next - slope) / (2.0 * h)});
    slope = next;
  }
}

double QuadraticSpline::operator()(double x) const {
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
  if (x == xs_[i]) return ys_[i];
  const auto& p = pieces_[i];
  const double d = x - p.x0;
  return p.a + d * (p.b + d * p.c);
}

std::string to_string(ParametricFamily f) { return f == ParametricFamily::Lognormal ? "lognormal" : "normal"; }

RndEstimate parametric_density(ParametricFamily family, double p1, double p2, const StrikeGrid& grid) {
  if (!(p2 > 0.0)) throw DomainError("parametric_density: scale must be positive");
  std::vector<double> f(grid.size());
  const double norm = 1.0 / (p2 * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double k = grid.strikes[i];
    if (family == ParametricFamily::Lognormal) {
      const double z = (std::log(k) - p1) / p2;
      f[i] = norm / k * std::exp(-0.5 * z * z);
    } else {
      const double z = (k - p1) / p2;
      f[i] = norm * std::exp(-0.5 * z * z);
    }
  }
  return clean_density(grid, std::move(f));
}

namespace {

struct Bounds {
  double lo1, hi1, lo2, hi2;
};

Bounds family_bounds(ParametricFamily family, double fwd) {
  if (family == ParametricFamily::Lognormal) return {std::log(fwd) - 1.0, std::log(fwd) + 1.0, 0.01, 1.5};
  return {0.5 * fwd, 1.5 * fwd, 0.01 * fwd, 1.0 * fwd};
}

double sse(ParametricFamily family, double p1, double p2, const StrikeGrid& grid, std::span<const OptionQuote> quotes) {
  RndEstimate rnd;
  try {
    rnd = parametric_density(family, p1, p2, grid);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
  double s = 0.0;
  for (const auto& q : quotes) {
    const double e = price_from_rnd(rnd, q.strike, q.kind) - q.price;
    s += e * e;
  }
  return s;
}

}  // namespace

ParametricFit fit_parametric(std::span<const OptionQuote> quotes, ParametricFamily family, const StrikeGrid& grid) {
  validate(grid);
  if (quotes.size() < 2) throw DomainError("fit_parametric: at least 2 quotes required");
  for (const auto& q : quotes) validate(q);

  const double fwd = grid.forward();
  const Bounds b = family_bounds(family, fwd);
  ParametricFit fit;
  fit.family = family;
  // Centered on the forward: log-mean with zero convexity term for the
  // lognormal, the forward itself for the normal.
  fit.init_p1 = family == ParametricFamily::Lognormal ? std::log(fwd) : fwd;
  fit.init_p2 = family == ParametricFamily::Lognormal ? 0.2 * std::sqrt(grid.tau) : 0.2 * fwd * std::sqrt(grid.tau);

  auto obj = [&](double p1, double p2) { return sse(family, p1, p2, grid, quotes); };

  // Coarse grid search, then compass search from the best node.
  constexpr int kNodes = 41;
  double best_p1 = fit.init_p1, best_p2 = std::clamp(fit.init_p2, b.lo2, b.hi2);
  double best = obj(best_p1, best_p2);
  for (int i = 0; i < kNodes; ++i) {
    const double p1 = b.lo1 + (b.hi1 - b.lo1) * i / (kNodes - 1);
    for (int j = 0; j < kNodes; ++j) {
      const double p2 = b.lo2 + (b.hi2 - b.lo2) * j / (kNodes - 1);
      const double v = obj(p1, p2);
      if (v < best) {
        best = v;
        best_p1 = p1;
        best_p2 = p2;
      }
    }
  }

  double step1 = (b.hi1 - b.lo1) / (kNodes - 1);
  double step2 = (b.hi2 - b.lo2) / (kNodes - 1);
  const double min1 = 1e-12 * std::max(1.0, std::abs(best_p1));
  const double min2 = 1e-12 * std::max(1.0, best_p2);
  while (step1 > min1 || step2 > min2) {
    bool moved = false;
    const std::array<std::array<double, 2>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (const auto& d : dirs) {
      const double p1 = std::clamp(best_p1 + d[0] * step1, b.lo1, b.hi1);
      const double p2 = std::clamp(best_p2 + d[1] * step2, b.lo2, b.hi2);
      if (p1 == best_p1 && p2 == best_p2) continue;
      const double v = obj(p1, p2);
      if (v < best) {
        best = v;
        best_p1 = p1;
        best_p2 = p2;
        moved = true;
        break;
      }
    }
    if (!moved) {
      step1 *= 0.5;
      step2 *= 0.5;
    }
  }

  fit.p1 = best_p1;
  fit.p2 = best_p2;
  fit.sse = best;
  fit.rnd = parametric_density(family, best_p1, best_p2, grid);

  auto at_bound = [](double v, double lo, double hi) {
    const double tol = 1e-9 * (hi - lo);
    return v <= lo + tol || v >= hi - tol;
  };
  std::set<double> distinct;
  for (const auto& q : quotes) distinct.insert(q.strike);
  fit.degenerate = distinct.size() < 2 || at_bound(best_p1, b.lo1, b.hi1) || at_bound(best_p2, b.lo2, b.hi2);
  return fit;
}

ParametricFit fit_parametric(std::span<const OptionQuote> quotes, ParametricFamily family) {
  if (quotes.empty()) throw DomainError("fit_parametric: at least 2 quotes required");
  const auto& q = quotes.front();
  return fit_parametric(quotes, family, moneyness_grid(q.spot, q.rate, q.dividend, q.tau));
}

double l1_distance(const RndEstimate& a, const RndEstimate& b) {
  const auto& ga = a.grid.strikes;
  const auto& gb = b.grid.strikes;
  if (ga.size() != gb.size() || a.density.size() != b.density.size() || a.density.size() != ga.size())
    throw DomainError("l1_distance: grids differ");
  for (std::size_t i = 0; i < ga.size(); ++i)
    if (std::abs(ga[i] - gb[i]) > 1e-9 * std::max(1.0, std::abs(ga[i]))) throw DomainError("l1_distance: grids differ");
  std::vector<double> diff(ga.size());
  for (std::size_t i = 0; i < ga.size(); ++i) diff[i] = std::abs(a.density[i] - b.density[i]);
  return trapezoid(a.grid, diff);
}

}  // namespace dlse
