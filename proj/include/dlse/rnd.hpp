#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dlse/pricing.hpp"

namespace dlse {

/// Uniform strike grid with the market metadata needed for pricing.
struct StrikeGrid {
  std::vector<double> strikes;
  double spot = 100.0;
  double rate = 0.0;
  double dividend = 0.0;
  double tau = 1.0;

  std::size_t size() const { return strikes.size(); }
  double step() const { return strikes[1] - strikes[0]; }
  double forward() const;
};

/// Throws DomainError unless the grid has >= 5 strictly increasing,
/// uniformly spaced positive strikes and valid metadata.
void validate(const StrikeGrid& grid);

/// n uniform strikes from lo to hi inclusive.
StrikeGrid uniform_grid(double lo, double hi, std::size_t n, double spot, double rate, double dividend, double tau);

/// Strikes spanning [m_lo, m_hi] x spot (defaults 0.5-1.5, 401 points).
StrikeGrid moneyness_grid(double spot, double rate, double dividend, double tau, double m_lo = 0.5,
                          double m_hi = 1.5, std::size_t n = 401);

struct RndEstimate {
  StrikeGrid grid;
  std::vector<double> density;      // clipped at 0 and renormalized
  std::vector<double> raw_density;  // signed second-difference values
  double raw_mass = 0.0;            // trapezoid integral of raw_density
  bool mass_warning = false;        // raw_mass outside [0.9, 1.1]
};

/// Trapezoid integral of `values` on the grid.
double trapezoid(const StrikeGrid& grid, std::span<const double> values);

/// Clips negatives and rescales to unit trapezoid mass. Throws NumericError
/// when nothing positive is left.
RndEstimate clean_density(const StrikeGrid& grid, std::vector<double> raw);

using IvModel = std::function<double(double moneyness)>;

/// Moneyness interval where an IV model is trusted, and the length scale
/// over which its slope dies out beyond either end.
struct IvSupport {
  double lo = 0.0;
  double hi = 0.0;
  double decay = 0.1;
};

/// `inner` on [lo, hi]; outside, sigma(edge) + slope(edge) * decay *
/// (1 - exp(-dist / decay)). The continuation is C1, so no point mass
/// appears at the edges, and the wing levels off instead of growing
/// linearly (which eventually makes calls increase in strike).
IvModel with_wings(IvModel inner, const IvSupport& support);

/// Breeden-Litzenberger: sigma per strike, Black-Scholes call prices,
/// e^{r tau} times the central second difference (one-sided at the two
/// endpoints), then clean_density. A non-finite or non-positive sigma
/// throws NumericError naming the strike.
RndEstimate extract_rnd(const IvModel& iv_model, const StrikeGrid& grid);

/// Same extraction from call prices already on the grid.
RndEstimate extract_rnd_from_prices(std::span<const double> call_prices, const StrikeGrid& grid);

/// e^{-r tau} int (s - K)^+ f(s) ds (calls) or (K - s)^+ (puts) by
/// trapezoid on the grid, with the cell containing K split at K using a
/// linearly interpolated density. Calls at or above the top strike are 0.
/// Throws DomainError below the first strike (and above the last for puts).
double price_from_rnd(const RndEstimate& rnd, double strike, OptionKind kind = OptionKind::Call);

struct PricingReport {
  std::vector<double> strikes;
  std::vector<double> market;
  std::vector<double> model;
  std::vector<double> abs_errors;
  double mae = 0.0;
};

double mean_absolute_error(std::span<const double> abs_errors);

/// |market - model| per quote, model prices from price_from_rnd.
PricingReport pricing_report(const RndEstimate& rnd, std::span<const OptionQuote> quotes);

/// C^1 piecewise-quadratic interpolant. The first piece is linear; every
/// later slope follows from continuity: s_{i+1} = 2 (y_{i+1} - y_i)/h_i - s_i.
/// Boundary values are held constant outside the knots.
class QuadraticSpline {
 public:
  /// y = a + b (x - x0) + c (x - x0)^2 on [x0, next knot).
  struct Piece {
    double x0, a, b, c;
  };

  explicit QuadraticSpline(std::span<const IvPoint> points);
  double operator()(double x) const;
  const std::vector<Piece>& pieces() const { return pieces_; }
  double x_min() const { return xs_.front(); }
  double x_max() const { return xs_.back(); }

 private:
  std::vector<double> xs_, ys_;
  std::vector<Piece> pieces_;
};

enum class ParametricFamily { Lognormal, Normal };

std::string to_string(ParametricFamily f);

/// Lognormal: (p1, p2) = (mean, sd) of log S_T. Normal: (mean, sd) of S_T.
struct ParametricFit {
  ParametricFamily family = ParametricFamily::Lognormal;
  double p1 = 0.0;
  double p2 = 0.0;
  double init_p1 = 0.0;  // starting point of the search
  double init_p2 = 0.0;
  double sse = 0.0;
  bool degenerate = false;  // optimum on a bound or fewer than 2 distinct strikes
  RndEstimate rnd;
};

/// Candidate density of the family on the grid, cleaned.
RndEstimate parametric_density(ParametricFamily family, double p1, double p2, const StrikeGrid& grid);

/// Least squares on the quoted prices over the family's two parameters:
/// grid search around the forward, then compass-search refinement.
ParametricFit fit_parametric(std::span<const OptionQuote> quotes, ParametricFamily family, const StrikeGrid& grid);
/// As above on moneyness_grid of the quotes' metadata.
ParametricFit fit_parametric(std::span<const OptionQuote> quotes, ParametricFamily family);

/// Trapezoid integral of |a - b|; the grids must coincide.
double l1_distance(const RndEstimate& a, const RndEstimate& b);

}  // namespace dlse
