#pragma once

#include <span>
#include <vector>

namespace dlse {

/// A temperature together with the scores it smooths.
struct TemperedVector {
  double temperature = 1.0;
  std::vector<double> entries;
};

/// Tempered log-sum-exp, T * log(sum_i exp(u_i / T)).
///
/// Evaluated in shifted form, max(u) + T * log(sum_i exp((u_i - max) / T)),
/// so it never overflows for finite input. The result lies in
/// [max(u), max(u) + T * log(m)].
///
/// Throws DomainError when `u` is empty, `temperature <= 0`, or an entry is
/// not finite.
double lse(double temperature, std::span<const double> u);
double lse(const TemperedVector& v);

/// Softmax weights exp(u_i / T) / sum_j exp(u_j / T): the gradient of lse.
std::vector<double> lse_weights(double temperature, std::span<const double> u);
std::vector<double> lse_weights(const TemperedVector& v);

/// Writes the weights into `out` (same length as `u`) and returns lse(u).
/// No validation; used on the hot path of the network.
double lse_with_weights(double temperature, std::span<const double> u, std::span<double> out) noexcept;

/// log(1 + exp(x)) via max(x, 0) + log1p(exp(-|x|)).
double softplus(double x) noexcept;

/// Logistic sigmoid, the derivative of softplus.
double sigmoid(double x) noexcept;

/// Inverse of softplus, log(expm1(y)). Throws DomainError for y <= 0.
double softplus_inv(double y);

}  // namespace dlse
