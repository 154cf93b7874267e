#include "dlse/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dlse/errors.hpp"

namespace dlse {

namespace {

constexpr double kSigmaLo = 1e-6;
constexpr double kSigmaHi = 5.0;
constexpr int kMaxIterations = 200;

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

void check_inputs(double spot, double strike, double sigma, double tau) {
  if (!(spot > 0.0)) throw DomainError("bs_price: spot must be positive");
  if (!(strike > 0.0)) throw DomainError("bs_price: strike must be positive");
  if (!(tau > 0.0)) throw DomainError("bs_price: tau must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("bs_price: sigma must be >= 0");
}

}  // namespace

void validate(const OptionQuote& q) {
  if (!(q.strike > 0.0)) throw DomainError("OptionQuote: strike must be positive");
  if (!(q.price >= 0.0)) throw DomainError("OptionQuote: price must be >= 0");
  if (!(q.tau > 0.0)) throw DomainError("OptionQuote: tau must be positive");
  if (!(q.spot > 0.0)) throw DomainError("OptionQuote: spot must be positive");
  if (!std::isfinite(q.rate) || !std::isfinite(q.dividend)) throw DomainError("OptionQuote: non-finite rate");
}

void validate(const IvCurve& c) {
  if (!(c.spot > 0.0) || !(c.tau > 0.0)) throw DomainError("IvCurve: spot and tau must be positive");
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (!(p.moneyness > 0.0)) throw DomainError("IvCurve: moneyness must be positive");
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw DomainError("IvCurve: sigma must be positive");
    if (i > 0 && !(p.moneyness > c.points[i - 1].moneyness))
      throw DomainError("IvCurve: moneyness must be strictly increasing");
  }
}

double bs_price(double spot, double strike, double rate, double dividend, double sigma, double tau, OptionKind kind) {
  check_inputs(spot, strike, sigma, tau);
  const double df_q = std::exp(-dividend * tau);
  const double df_r = std::exp(-rate * tau);
  const double sign = kind == OptionKind::Call ? 1.0 : -1.0;
  if (sigma == 0.0) return std::max(sign * (spot * df_q - strike * df_r), 0.0);

  const double vs = sigma * std::sqrt(tau);
  const double d1 = (std::log(spot / strike) + (rate - dividend + 0.5 * sigma * sigma) * tau) / vs;
  const double d2 = d1 - vs;
  return sign * (spot * df_q * norm_cdf(sign * d1) - strike * df_r * norm_cdf(sign * d2));
}

double bs_vega(double spot, double strike, double rate, double dividend, double sigma, double tau) {
  check_inputs(spot, strike, sigma, tau);
  if (sigma == 0.0) throw DomainError("bs_vega: sigma must be positive");
  const double vs = sigma * std::sqrt(tau);
  const double d1 = (std::log(spot / strike) + (rate - dividend + 0.5 * sigma * sigma) * tau) / vs;
  return spot * std::exp(-dividend * tau) * norm_pdf(d1) * std::sqrt(tau);
}

double implied_vol(const OptionQuote& q) {
  validate(q);
  const double fwd_spot = q.spot * std::exp(-q.dividend * q.tau);
  const double pv_strike = q.strike * std::exp(-q.rate * q.tau);
  const bool call = q.kind == OptionKind::Call;
  const double lower = std::max(call ? fwd_spot - pv_strike : pv_strike - fwd_spot, 0.0);
  const double upper = call ? fwd_spot : pv_strike;
  if (!(q.price > lower))
    throw NoArbitrageError("implied_vol: price " + std::to_string(q.price) + " at or below intrinsic bound " +
                               std::to_string(lower) + " (strike " + std::to_string(q.strike) + ")",
                           lower);
  if (!(q.price < upper))
    throw NoArbitrageError("implied_vol: price " + std::to_string(q.price) + " at or above upper bound " +
                               std::to_string(upper) + " (strike " + std::to_string(q.strike) + ")",
                           upper);

  auto f = [&](double s) { return bs_price(q.spot, q.strike, q.rate, q.dividend, s, q.tau, q.kind) - q.price; };
  double lo = kSigmaLo, hi = kSigmaHi;
  if (f(lo) > 0.0 || f(hi) < 0.0)
    throw NumericError("implied_vol: price not bracketed by sigma in [1e-6, 5] (strike " + std::to_string(q.strike) +
                       ")");

  const double tol = 1e-13 * q.spot;
  double sigma = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxIterations; ++it) {
    const double err = f(sigma);
    if (std::abs(err) <= tol) return sigma;
    if (err > 0.0) hi = sigma; else lo = sigma;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;

    // Newton only once the bracket is reasonably tight.
    double next = 0.5 * (lo + hi);
    if (hi - lo < 0.25) {
      const double vega = bs_vega(q.spot, q.strike, q.rate, q.dividend, sigma, q.tau);
      if (vega > 0.0) {
        const double step = sigma - err / vega;
        if (step > lo && step < hi) next = step;
      }
    }
    sigma = next;
  }
  if (std::abs(f(sigma)) <= 1e-8 * q.spot) return sigma;
  throw NumericError("implied_vol: no convergence after 200 iterations (strike " + std::to_string(q.strike) + ")");
}

std::vector<OptionQuote> curve_to_quotes(const IvCurve& curve) {
  validate(curve);
  std::vector<OptionQuote> out;
  out.reserve(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    OptionQuote q;
    q.strike = curve.strike(i);
    q.kind = OptionKind::Call;
    q.tau = curve.tau;
    q.spot = curve.spot;
    q.rate = curve.rate;
    q.dividend = curve.dividend;
    q.price = bs_price(q.spot, q.strike, q.rate, q.dividend, curve.points[i].sigma, q.tau, q.kind);
    out.push_back(q);
  }
  return out;
}

IvCurve quotes_to_curve(const std::vector<OptionQuote>& quotes) {
  if (quotes.empty()) throw DomainError("quotes_to_curve: no quotes");
  IvCurve c;
  c.spot = quotes.front().spot;
  c.tau = quotes.front().tau;
  c.rate = quotes.front().rate;
  c.dividend = quotes.front().dividend;
  for (const auto& q : quotes) {
    if (q.spot != c.spot || q.tau != c.tau || q.rate != c.rate || q.dividend != c.dividend)
      throw DomainError("quotes_to_curve: quotes must share spot, tau, rate and dividend");
    c.points.push_back({q.strike / q.spot, implied_vol(q)});
  }
  std::sort(c.points.begin(), c.points.end(),
            [](const IvPoint& a, const IvPoint& b) { return a.moneyness < b.moneyness; });
  validate(c);
  return c;
}

}  // namespace dlse
