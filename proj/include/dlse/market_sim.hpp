#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dlse/pricing.hpp"
#include "dlse/rnd.hpp"

namespace dlse {

/// Bates stochastic volatility with lognormal jumps.
struct BatesParams {
  double S0 = 100.0;
  double r = 0.06;
  double v0 = 0.09;
  double kappa = 3.0;
  double theta = 0.07;
  double eta = 0.3;  // vol of variance
  double rho = -0.34;
  double lambda = 0.5;
  double mu_j = -0.09;
  double sigma_j = 0.45;
};

/// Heston variance with double-exponential (Kou) jumps.
struct KouHestonParams {
  double S0 = 100.0;
  double r = 0.05;
  double q = 0.0;
  double v0 = 0.04;
  double kappa = 2.0;
  double theta = 0.04;
  double sigma_v = 0.8;
  double rho = -0.5;
  double lambda = 0.12;
  double p_up = 0.35;
  double eta1 = 8.0;   // rate of upward jumps, > 1
  double eta2 = 10.0;  // rate of downward jumps, > -1
};

struct AblFactor {
  double kappa = 0.0;
  double theta = 0.0;
  double sigma = 0.0;
  double v0 = 0.0;
  double rho = 0.0;  // correlation of the price driver with this factor
};

/// Andersen-Benzoni-Lund multifactor square-root variance with normal
/// log-jumps.
struct AblParams {
  double S0 = 100.0;
  double r = 0.05;
  std::vector<AblFactor> factors;
  double lambda_j = 0.0;
  double mu_j = 0.0;
  double sigma_j = 0.0;
};

/// Three-factor double-exponential model on the forward price: two
/// square-root factors V1, V2, a pure-jump factor U, and state-dependent
/// double-exponential jump intensities c(t) = c0 + c1 V1 + c2 V2 + cu U.
struct ThreeFdeParams {
  double S0 = 100.0;
  double r = 0.05;
  double v1_0 = 0.01;
  double v2_0 = 0.04;
  double u_0 = 0.0;
  double kappa1 = 10.0, vbar1 = 0.01, sigma1 = 0.4, rho1 = -0.9;
  double kappa2 = 0.2, vbar2 = 0.04, sigma2 = 0.12, rho2 = -0.8;
  double kappa_u = 0.6;
  double eta = 0.0;
  double mu_v = 0.7;
  double mu_u = 10.0;
  double rho_u = 0.001;
  std::array<double, 4> c_minus{0.0, 6.0, 0.22, 10.0};
  std::array<double, 4> c_plus{0.3, 20.0, 18.0, 0.0};
  double lambda_minus = 8.0;
  double lambda_plus = 6.0;
};

using SimModelParams = std::variant<BatesParams, KouHestonParams, AblParams, ThreeFdeParams>;

/// Parameter sets of the reference experiments.
BatesParams bates_reference();
KouHestonParams kou_heston_reference();
AblParams abl_set1();
AblParams abl_set2();
ThreeFdeParams three_fde_proxy();
ThreeFdeParams three_fde_target();

/// Throws DomainError naming the offending field, e.g. "bates.rho".
void validate(const SimModelParams& model);
std::string model_tag(const SimModelParams& model);
double model_spot(const SimModelParams& model);
double model_rate(const SimModelParams& model);
double model_dividend(const SimModelParams& model);

/// E[e^Y - 1] for Y ~ N(mu, sigma^2).
double bates_jump_compensator(double mu_j, double sigma_j);
/// E[e^Y - 1] for the double-exponential law: p eta1/(eta1-1) + (1-p) eta2/(eta2+1) - 1.
double kou_jump_compensator(double p_up, double eta1, double eta2);

enum class VarianceScheme { FullTruncation, Reflection };

struct SimConfig {
  std::size_t n_paths = 200'000;
  std::size_t n_steps = 252;  // over the whole horizon
  std::uint64_t seed = 1;
  VarianceScheme variance_scheme = VarianceScheme::FullTruncation;
  unsigned threads = 0;  // 0 = hardware concurrency
};

void validate(const SimConfig& cfg);

/// Terminal prices S_T of `cfg.n_paths` independent paths. Path i is a
/// function of (seed, i) alone, so the output does not depend on thread
/// scheduling.
std::vector<double> simulate_terminals(const SimModelParams& model, double tau, const SimConfig& cfg);

/// Step-by-step record of a single path, for inspection.
struct PathTrace {
  std::vector<double> log_price;            // n_steps + 1 entries
  std::vector<std::vector<double>> states;  // effective variance states after each step
  double terminal = 0.0;
};

PathTrace trace_path(const SimModelParams& model, double tau, const SimConfig& cfg, std::size_t path_index);

struct McEstimate {
  double price = 0.0;
  double std_error = 0.0;
};

/// e^{-r tau} mean((S_T - K)^+) per strike.
std::vector<double> mc_call_prices(std::span<const double> terminals, double rate, double tau,
                                   std::span<const double> strikes);
std::vector<McEstimate> mc_call_estimates(std::span<const double> terminals, double rate, double tau,
                                          std::span<const double> strikes);

/// Simulates, prices calls and inverts them. Strikes whose price violates
/// the no-arbitrage bounds are dropped (reported through `dropped`).
/// Output is sorted by strike. Throws InsufficientData below 3 points.
IvCurve build_liquid_curve(const SimModelParams& model, std::span<const double> strikes, double tau,
                           const SimConfig& cfg, std::vector<double>* dropped = nullptr);

/// Same as build_liquid_curve from an existing terminal sample.
IvCurve curve_from_terminals(std::span<const double> terminals, const SimModelParams& model,
                             std::span<const double> strikes, double tau, std::vector<double>* dropped = nullptr);

/// sigma <- sigma * vol_factor, strike <- strike + strike_shift (moneyness
/// re-expressed against the unchanged spot).
IvCurve translate_curve(const IvCurve& curve, double vol_factor, double strike_shift);
/// sigma <- sigma + vol_offset, strike shifted as above.
IvCurve translate_curve_additive(const IvCurve& curve, double vol_offset, double strike_shift);

/// Linear interpolation of sigma in strike. Throws DomainError outside the
/// curve's strike range.
double interpolate_iv(const IvCurve& curve, double strike);

enum class MoneynessBand { InTheMoney, OutOfTheMoney };

/// Random draw of `count` distinct strikes on a lattice of `strike_step`
/// inside a call moneyness band: ITM means K in [S(1-hi), S(1-lo)], OTM
/// means K in [S(1+lo), S(1+hi)].
struct CensorRule {
  MoneynessBand band = MoneynessBand::InTheMoney;
  double lo = 0.10;
  double hi = 0.25;
  std::size_t count = 3;
  double strike_step = 1.0;
};

/// Quotes at the given strikes, sigma interpolated on the dense curve.
IvCurve censor_to_illiquid(const IvCurve& curve, std::span<const double> picks);
/// Quotes at strikes drawn by `rule`; deterministic under `seed`.
IvCurve censor_to_illiquid(const IvCurve& curve, const CensorRule& rule, std::uint64_t seed);

/// Liquid proxy, illiquid target, censored quotes and the target's
/// reference density.
struct MarketScenario {
  IvCurve liquid;
  IvCurve target;
  IvCurve illiquid;
  std::optional<RndEstimate> truth_rnd;
};

}  // namespace dlse
