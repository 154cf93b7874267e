#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dlse/deep_lse.hpp"
#include "dlse/pricing.hpp"

namespace dlse {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t max_epochs = 5000;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;      // minibatch shuffling
  AdamParams adam;
  std::optional<SieveBox> sieve_box;
  std::size_t project_every = 1;
  std::size_t stop_window = 10;  // smoothing window of the stopping rule
};

void validate(const TrainConfig& cfg);

/// Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, const AdamParams& p, double learning_rate);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  AdamParams p_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// (moneyness, sigma) pairs as a one-feature dataset.
Dataset curve_dataset(const IvCurve& curve);
Dataset points_dataset(std::span<const IvPoint> points);

struct TrainResult {
  DeepLseNet net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> losses;  // full-data MSE before the first and after every epoch
};

/// Adam on the MSE. The lowest-loss iterate seen is returned, so
/// final_loss <= initial_loss. Throws NumericError naming the epoch on a
/// non-finite loss.
TrainResult train(const DeepLseNet& net, const Dataset& data, const TrainConfig& cfg);

/// Pretraining on a liquid curve (at least 3 points).
DeepLseNet pretrain(const DeepLseNet& net, const IvCurve& curve, const TrainConfig& cfg);

/// Gaussian prior N(w0, sigma_p^2 I) and posterior N(w, tau_q^2 I).
struct PriorSpec {
  std::vector<double> w0;
  double sigma_p = 1.0;
  double tau_q = 1.0;
  double c = 1e-3;  // c = 0 disables early stopping

  std::size_t p() const { return w0.size(); }
};

void validate(const PriorSpec& prior);

/// KL(N(w, tau^2 I) || N(w0, sigma^2 I)).
double kl_isotropic(std::span<const double> w, const PriorSpec& prior);

struct EpochRecord {
  std::size_t epoch = 0;
  double risk = 0.0;       // MSE on the illiquid points
  double kl = 0.0;
  double objective = 0.0;  // risk + c sqrt(kl)
  std::uint64_t hash = 0;  // FNV-1a of the parameter bytes
};

struct FineTuneTrace {
  std::vector<EpochRecord> epochs;
  std::size_t stop_epoch = 0;
  bool stopped_early = false;
};

struct FineTuneResult {
  DeepLseNet net;  // parameters at stop_epoch
  FineTuneTrace trace;
};

/// Transfer step: starts from net0, minimizes the MSE on `points` with
/// Adam, monitors B(t) = risk + c sqrt(KL) and stops at its first
/// stationary point (see stationarity). The stop-epoch snapshot is returned.
FineTuneResult fine_tune(const DeepLseNet& net0, std::span<const IvPoint> points, const TrainConfig& cfg,
                         const PriorSpec& prior);

/// Smoothed derivative m_i = (s[i+w] - s[i]) / w. Returns the first i with
/// m_{i-1} < 0 <= m_i, or nullopt if the sign never turns.
std::optional<std::size_t> stationarity(std::span<const double> series, std::size_t window);

std::uint64_t parameter_hash(std::span<const double> params);

}  // namespace dlse
