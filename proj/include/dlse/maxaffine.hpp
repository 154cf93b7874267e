#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dlse/deep_lse.hpp"

namespace dlse {

/// Affine function <slope, x> + intercept reached through one choice of
/// piece per layer (k_1, ..., k_L), 0-based.
struct PathAffine {
  std::vector<std::size_t> path;
  std::vector<double> slope;
  double intercept = 0.0;
};

/// Guard on the number of enumerated paths.
inline constexpr std::size_t kMaxPaths = 1'000'000;

/// Zero-temperature surrogate: every LSE replaced by max, same realized
/// skips and affine pieces, plus c_out. Lower-bounds forward() everywhere.
double surrogate_eval(const DeepLseNet& net, std::span<const double> x);

/// All prod_l K_l path affines via the layer recursion
/// A_(p,k) = alpha_k A_p + a_k, b_(p,k) = alpha_k b_p + b_k.
/// Skips are strictly positive (softplus), so every path is admissible.
/// Intercepts exclude c_out. Throws CapacityError past kMaxPaths.
std::vector<PathAffine> expand_paths(const DeepLseNet& net);

/// Same enumeration computed from the closed form
/// A_p = sum_j (prod_{r>j} alpha_{k_r}) a_{k_j}; used to cross-check the
/// recursion.
std::vector<PathAffine> expand_paths_closed_form(const DeepLseNet& net);

/// max_p (<A_p, x> + b_p) + c_out.
double max_over_paths(std::span<const PathAffine> paths, std::span<const double> x, double c_out);

/// Gap bound between the network and its surrogate.
struct BoundReport {
  std::vector<double> delta;              // Delta_l by recursion, l = 1..L
  std::vector<double> delta_closed_form;  // Delta_l by closed form
  std::vector<double> alpha_max;          // alpha_max per layer, 1 on layer 1
  double delta_total = 0.0;               // Delta_L
  /// M / (1 - q) with M = max_j T_j log K_j and q = max_{l>=2} alpha_max,
  /// present when q < 1 (or L = 1).
  std::optional<double> depth_uniform_cap;
};

/// Delta_1 = T_1 log K_1, Delta_l = T_l log K_l + alpha_max_l Delta_{l-1};
/// the recursion and closed form are evaluated independently and must
/// agree to 1e-12 (PropertyFailure otherwise).
BoundReport delta_bound(const DeepLseNet& net);

struct SandwichReport {
  std::size_t points = 0;
  double min_slack = 0.0;  // min over x of forward - surrogate
  double max_slack = 0.0;  // max over x of forward - surrogate
  double delta = 0.0;      // Delta_L used as the upper allowance
};

/// Checks surrogate(x) <= forward(x) <= surrogate(x) + Delta_L + 1e-9 at
/// every point. Throws PropertyFailure naming the first offending x.
SandwichReport check_sandwich(const DeepLseNet& net, std::span<const std::vector<double>> points);

}  // namespace dlse
