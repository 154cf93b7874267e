#include "dlse/lse.hpp"

#include <algorithm>
#include <cmath>

#include "dlse/errors.hpp"

namespace dlse {

namespace {

void validate(double temperature, std::span<const double> u) {
  if (u.empty()) throw DomainError("lse: empty score vector");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw DomainError("lse: temperature must be positive and finite");
  for (double v : u)
    if (!std::isfinite(v)) throw DomainError("lse: non-finite score");
}

}  // namespace

double lse_with_weights(double temperature, std::span<const double> u, std::span<double> out) noexcept {
  const double top = *std::max_element(u.begin(), u.end());
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = std::exp((u[i] - top) / temperature);
    total += out[i];
  }
  for (double& w : out) w /= total;
  return top + temperature * std::log(total);
}

double lse(double temperature, std::span<const double> u) {
  validate(temperature, u);
  const double top = *std::max_element(u.begin(), u.end());
  double total = 0.0;
  for (double v : u) total += std::exp((v - top) / temperature);
  return top + temperature * std::log(total);
}

double lse(const TemperedVector& v) { return lse(v.temperature, v.entries); }

std::vector<double> lse_weights(double temperature, std::span<const double> u) {
  validate(temperature, u);
  std::vector<double> w(u.size());
  lse_with_weights(temperature, u, w);
  return w;
}

std::vector<double> lse_weights(const TemperedVector& v) { return lse_weights(v.temperature, v.entries); }

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_inv(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inv: argument must be positive");
  // For large y, log(expm1(y)) = y + log1p(-exp(-y)).
  if (y > 30.0) return y + std::log1p(-std::exp(-y));
  return std::log(std::expm1(y));
}

}  // namespace dlse
