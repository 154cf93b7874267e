#pragma once

#include <cstddef>
#include <vector>

namespace dlse {

enum class OptionKind { Call, Put };

/// One observed European option price.
struct OptionQuote {
  double strike = 0.0;
  double price = 0.0;
  OptionKind kind = OptionKind::Call;
  double tau = 0.0;  // years to expiry
  double spot = 0.0;
  double rate = 0.0;      // continuous, per year
  double dividend = 0.0;  // continuous, per year
};

/// Throws DomainError unless strike > 0, price >= 0, tau > 0, spot > 0.
void validate(const OptionQuote& q);

struct IvPoint {
  double moneyness = 0.0;  // strike / spot
  double sigma = 0.0;      // implied volatility per sqrt(year)
};

/// Implied volatilities of one maturity, ordered by strictly increasing
/// moneyness.
struct IvCurve {
  double spot = 100.0;
  double tau = 1.0;
  double rate = 0.0;
  double dividend = 0.0;
  std::vector<IvPoint> points;

  std::size_t size() const { return points.size(); }
  double strike(std::size_t i) const { return points[i].moneyness * spot; }
};

/// Throws DomainError on non-positive sigma or moneyness, unsorted or
/// repeated moneyness, or bad metadata.
void validate(const IvCurve& c);

/// Black-Scholes-Merton value. sigma = 0 gives the discounted intrinsic
/// value on the forward.
double bs_price(double spot, double strike, double rate, double dividend, double sigma, double tau, OptionKind kind);

/// dPrice/dsigma, identical for calls and puts.
double bs_vega(double spot, double strike, double rate, double dividend, double sigma, double tau);

/// Black-Scholes volatility reproducing `quote.price`.
///
/// Bisection on [1e-6, 5] narrows the bracket, then Newton steps refine
/// it, falling back to bisection whenever a step leaves the bracket.
/// Throws NoArbitrageError when the price is outside
/// [intrinsic, upper bound] and NumericError after 200 iterations without
/// convergence.
double implied_vol(const OptionQuote& quote);

/// Prices every point of a curve as a call.
std::vector<OptionQuote> curve_to_quotes(const IvCurve& curve);

/// Inverts every quote; quotes must share spot, tau, rate and dividend.
IvCurve quotes_to_curve(const std::vector<OptionQuote>& quotes);

}  // namespace dlse
