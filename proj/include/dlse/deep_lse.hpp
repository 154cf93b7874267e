#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dlse {

/// Floor added to softplus(t_raw) so temperatures never reach zero.
inline constexpr double kMinTemperature = 1e-3;

/// One LSE layer: K affine pieces a_k.x + b_k, skip pre-activations eta_k
/// (layers >= 2 only) and a temperature pre-activation.
///
/// Realized quantities: alpha_k = softplus(eta_k) and
/// T = kMinTemperature + softplus(t_raw).
struct LayerParams {
  std::size_t width = 0;
  std::vector<double> a;    // width x input_dim, row-major
  std::vector<double> b;    // width
  std::vector<double> eta;  // width, empty on the first layer
  double t_raw = 0.0;

  double slope(std::size_t k, std::size_t j, std::size_t input_dim) const { return a[k * input_dim + j]; }
  std::span<const double> row(std::size_t k, std::size_t input_dim) const {
    return std::span<const double>(a).subspan(k * input_dim, input_dim);
  }
  bool has_skip() const { return !eta.empty(); }

  bool operator==(const LayerParams&) const = default;
};

/// Deep log-sum-exp network
///
///   z_1 = LSE_{T_1}(A_1 x + b_1)
///   z_l = LSE_{T_l}(alpha_l z_{l-1} + A_l x + b_l),   l = 2..L
///   y   = z_L + c_out
///
/// Convex in x whenever every alpha is nonnegative, which softplus
/// guarantees.
struct DeepLseNet {
  std::size_t input_dim = 1;
  std::vector<LayerParams> layers;
  double c_out = 0.0;

  std::size_t depth() const { return layers.size(); }
  double temperature(std::size_t layer) const;
  double skip(std::size_t layer, std::size_t k) const;
  std::vector<double> skips(std::size_t layer) const;
  std::size_t parameter_count() const;

  bool operator==(const DeepLseNet&) const = default;
};

/// Partial derivatives of a scalar loss with respect to every raw parameter
/// of a DeepLseNet, laid out identically (eta and t_raw gradients already
/// include the softplus chain factor).
struct NetGradients {
  std::vector<LayerParams> layers;
  double c_out = 0.0;
};

/// Row-major feature matrix with one regression target per row.
struct Dataset {
  std::size_t input_dim = 1;
  std::vector<double> features;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * input_dim, input_dim);
  }
  void push_back(std::span<const double> x, double target);
};

struct LossAndGradient {
  double loss = 0.0;
  NetGradients grad;
};

/// Throws DomainError if shapes are inconsistent or values non-finite.
void validate(const DeepLseNet& net);

/// Slopes and intercepts i.i.d. uniform in [-scale, scale] from a seeded
/// generator, alpha = 0.1 and T = 1 on every layer, c_out = 0.
DeepLseNet init_network(std::span<const std::size_t> widths, std::size_t input_dim, std::uint64_t seed,
                        double scale);

double forward(const DeepLseNet& net, std::span<const double> x);

/// Mean squared error of `net` over `data` and its exact gradient.
LossAndGradient gradient(const DeepLseNet& net, const Dataset& data);

/// Mean squared error only.
double mse(const DeepLseNet& net, const Dataset& data);

/// Raw parameters in a fixed order: per layer a, b, eta, t_raw; then c_out.
std::vector<double> flatten(const DeepLseNet& net);
std::vector<double> flatten(const NetGradients& grad);
/// Inverse of flatten, using `shape` for layer sizes.
DeepLseNet unflatten(const DeepLseNet& shape, std::span<const double> params);

/// Parameter box of the sieve class.
struct SieveBox {
  std::vector<double> slope_cap;          // S_l, Euclidean row-norm cap
  std::vector<double> intercept_cap;      // B_l
  std::vector<double> skip_cap;           // q_l in (0, 1)
  std::vector<double> temp_cap;           // Theta_l
  std::vector<std::size_t> width_cap;     // K_l
  double out_cap = 1.0;                   // C
  double input_radius = 1.0;              // R

  std::size_t depth() const { return slope_cap.size(); }
};

void validate(const SieveBox& box);

/// Clips the network into `box`: slope rows rescaled to norm S_l, |b| <= B_l,
/// alpha <= q_l (through eta), T <= Theta_l (through t_raw), |c_out| <= C.
/// Parameters already inside are left bit-for-bit unchanged.
DeepLseNet project_sieve(const DeepLseNet& net, const SieveBox& box);

/// Uniform bound V on |f(x)| over the box and ||x|| <= R:
/// V = C + sum_l (R S_l + B_l + Theta_l log K_l) prod_{r>l} q_r.
double envelope_bound(const SieveBox& box, std::size_t depth);

enum class GrowthStatus { ConsistentRegime, GrowthWarning };

struct GrowthReport {
  std::size_t weight_count = 0;  // W, including relay units
  double envelope = 0.0;         // V
  double complexity = 0.0;       // W V^2 log(V^L W)
  double ratio = 0.0;            // complexity / n_samples
  GrowthStatus status = GrowthStatus::ConsistentRegime;
};

/// Configuration-level check of the sieve growth condition
/// W V^2 log(V^L W) = o(n). A ratio >= 1 is reported as a warning only.
GrowthReport growth_check(const SieveBox& box, std::size_t depth, std::size_t input_dim, std::size_t n_samples);

std::string to_string(GrowthStatus status);

/// Checkpoint document (JSON, format_version 1). Doubles are written with
/// enough digits to round-trip exactly.
std::string to_checkpoint(const DeepLseNet& net);
DeepLseNet from_checkpoint(const std::string& text);
void save_checkpoint(const DeepLseNet& net, const std::string& path);
DeepLseNet load_checkpoint(const std::string& path);

}  // namespace dlse
