#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlse/deep_lse.hpp"
#include "dlse/market_sim.hpp"
#include "dlse/pricing.hpp"
#include "dlse/rnd.hpp"
#include "dlse/training.hpp"

namespace dlse {

enum class VolShiftMode { Multiplicative, Additive };

struct TranslationSpec {
  VolShiftMode mode = VolShiftMode::Multiplicative;
  double vol_factor = 0.9;   // multiplicative mode
  double vol_offset = -0.1;  // additive mode
  double strike_shift = 20.0;
};

struct CensorSpec {
  std::vector<double> picks;        // explicit strikes, used when nonempty
  CensorRule rule;                  // otherwise sampled with `seed`
  std::uint64_t seed = 1;
};

struct ArchitectureSpec {
  std::vector<std::size_t> widths{3, 3};
  std::size_t input_dim = 1;
  double init_scale = 0.5;
  std::uint64_t seed = 7;
};

struct GridSpec {
  double m_lo = 0.5;
  double m_hi = 1.5;
  std::size_t n = 401;
  /// IV models are continued with with_wings outside this interval. Unset:
  /// evaluated as-is on the whole grid.
  std::optional<IvSupport> support;
};

enum class TruthMethod { DeepLse, Spline };

/// Reference density of the illiquid market: a dense Deep-LSE fit (no
/// transfer) to the whole target curve, or a spline through it.
struct TruthSpec {
  TruthMethod method = TruthMethod::DeepLse;
  std::vector<std::size_t> widths{8, 8};
  double init_scale = 0.5;
  TrainConfig train;
};

struct MarketMeta {
  double spot = 100.0;
  double rate = 0.0;
  double dividend = 0.0;
  double tau = 1.0;
};

struct ExperimentConfig {
  SimModelParams model = bates_reference();
  std::optional<SimModelParams> target_model;  // second parameter set; else translate
  double tau = 1.0;
  std::optional<MarketMeta> market;  // overrides model-derived metadata
  SimConfig sim;
  double strike_lo = 40.0, strike_hi = 180.0, strike_step = 2.0;
  TranslationSpec translation;
  CensorSpec censor;
  ArchitectureSpec arch;
  TrainConfig pretrain;
  TrainConfig finetune;
  double prior_sigma = 1.0;
  double prior_tau = 1.0;
  double prior_c = 1e-3;
  GridSpec grid;
  TruthSpec truth;
  std::vector<double> eval_strikes{95.0, 97.5, 100.0, 102.5, 105.0, 107.5};
  std::optional<SieveBox> sieve;
  std::size_t sieve_samples = 0;  // n for the growth check
  std::string output_dir = "out";
};

/// Parses the JSON experiment document. Syntax errors report the line;
/// type and range errors name the field. Throws SchemaError (syntax,
/// types) or DomainError (values).
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
ExperimentConfig default_config();

/// Overrides every seed of the experiment with values derived from `seed`.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

MarketMeta market_meta(const ExperimentConfig& cfg);
std::vector<double> liquid_strikes(const ExperimentConfig& cfg);
StrikeGrid rnd_grid(const ExperimentConfig& cfg);

/// Liquid curve by simulation, target by translation (or second
/// simulation), censored illiquid quotes, and the reference density.
MarketScenario simulate_scenario(const ExperimentConfig& cfg, std::vector<double>* dropped = nullptr);

DeepLseNet initial_network(const ExperimentConfig& cfg);
DeepLseNet run_pretrain(const ExperimentConfig& cfg, const IvCurve& liquid);
PriorSpec make_prior(const ExperimentConfig& cfg, const DeepLseNet& pretrained);
FineTuneResult run_transfer(const ExperimentConfig& cfg, const DeepLseNet& pretrained, const IvCurve& illiquid);

/// Breeden-Litzenberger density of the network's implied-volatility curve,
/// continued by with_wings outside `support` if given.
RndEstimate network_rnd(const DeepLseNet& net, const StrikeGrid& grid,
                        const std::optional<IvSupport>& support = std::nullopt);
RndEstimate spline_rnd(std::span<const IvPoint> points, const StrikeGrid& grid);
RndEstimate truth_rnd(const ExperimentConfig& cfg, const IvCurve& target);

/// Call quotes at `strikes` priced from the target curve.
std::vector<OptionQuote> market_quotes(const IvCurve& target, std::span<const double> strikes);

struct MethodResult {
  std::string name;
  RndEstimate rnd;
  PricingReport report;
  std::optional<double> l1_to_truth;
};

/// Deep-LSE against the quadratic spline and the two parametric fits, all
/// built from the same illiquid quotes and grid.
std::vector<MethodResult> compare_methods(const RndEstimate& deep_lse, const IvCurve& illiquid,
                                          std::span<const OptionQuote> eval_quotes,
                                          const std::optional<RndEstimate>& truth);

struct PipelineResult {
  MarketScenario scenario;
  DeepLseNet pretrained;
  FineTuneResult transfer;
  std::vector<MethodResult> methods;
};

/// All stages in memory.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

}  // namespace dlse
