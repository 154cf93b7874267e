#include "dlse/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "dlse/errors.hpp"

namespace dlse {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw DomainError("train.learning_rate must be positive");
  if (cfg.max_epochs < 1) throw DomainError("train.max_epochs must be >= 1");
  if (cfg.project_every < 1) throw DomainError("train.project_every must be >= 1");
  if (cfg.stop_window < 1) throw DomainError("train.stop_window must be >= 1");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0)) throw DomainError("train.adam.beta1 must lie in [0, 1)");
  if (!(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0)) throw DomainError("train.adam.beta2 must lie in [0, 1)");
  if (!(cfg.adam.eps > 0.0)) throw DomainError("train.adam.eps must be positive");
  if (cfg.sieve_box) validate(*cfg.sieve_box);
}

Adam::Adam(std::size_t n, const AdamParams& p, double learning_rate) : p_(p), lr_(learning_rate), m_(n), v_(n) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = p_.beta1 * m_[i] + (1.0 - p_.beta1) * grad[i];
    v_[i] = p_.beta2 * v_[i] + (1.0 - p_.beta2) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + p_.eps);
  }
}

Dataset points_dataset(std::span<const IvPoint> points) {
  Dataset d;
  d.input_dim = 1;
  for (const auto& p : points) {
    const double x = p.moneyness;
    d.push_back(std::span<const double>(&x, 1), p.sigma);
  }
  return d;
}

Dataset curve_dataset(const IvCurve& curve) { return points_dataset(curve.points); }

namespace {

Dataset subset(const Dataset& data, std::span<const std::size_t> idx) {
  Dataset d;
  d.input_dim = data.input_dim;
  for (std::size_t i : idx) d.push_back(data.row(i), data.targets[i]);
  return d;
}

void check_finite(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) throw NumericError("training: non-finite loss at epoch " + std::to_string(epoch));
}

}  // namespace

TrainResult train(const DeepLseNet& net, const Dataset& data, const TrainConfig& cfg) {
  validate(net);
  validate(cfg);
  if (data.size() == 0) throw DomainError("train: empty dataset");
  if (data.input_dim != net.input_dim) throw DomainError("train: dataset width does not match network input");

  DeepLseNet cur = cfg.sieve_box ? project_sieve(net, *cfg.sieve_box) : net;
  std::vector<double> w = flatten(cur);
  Adam opt(w.size(), cfg.adam, cfg.learning_rate);
  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < data.size();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult res;
  res.losses.reserve(cfg.max_epochs + 1);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_w = w;

  auto consider = [&](double loss) {
    if (loss < best) {
      best = loss;
      best_w = w;
    }
  };

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    cur = unflatten(cur, w);
    if (!minibatch) {
      auto lg = gradient(cur, data);
      check_finite(lg.loss, epoch);
      res.losses.push_back(lg.loss);
      consider(lg.loss);
      opt.step(w, flatten(lg.grad));
    } else {
      const double loss = mse(cur, data);
      check_finite(loss, epoch);
      res.losses.push_back(loss);
      consider(loss);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < order.size(); s += cfg.batch_size) {
        const std::size_t e = std::min(order.size(), s + cfg.batch_size);
        auto batch = subset(data, std::span<const std::size_t>(order).subspan(s, e - s));
        auto lg = gradient(unflatten(cur, w), batch);
        check_finite(lg.loss, epoch);
        opt.step(w, flatten(lg.grad));
      }
    }
    if (cfg.sieve_box && (epoch + 1) % cfg.project_every == 0) w = flatten(project_sieve(unflatten(cur, w), *cfg.sieve_box));
  }
  cur = unflatten(cur, w);
  if (cfg.sieve_box) cur = project_sieve(cur, *cfg.sieve_box);
  w = flatten(cur);
  const double last = mse(cur, data);
  check_finite(last, cfg.max_epochs);
  res.losses.push_back(last);
  consider(last);

  res.net = unflatten(cur, best_w);
  res.initial_loss = res.losses.front();
  res.final_loss = best;
  return res;
}

DeepLseNet pretrain(const DeepLseNet& net, const IvCurve& curve, const TrainConfig& cfg) {
  validate(curve);
  if (curve.size() < 3) throw InsufficientData("pretrain: the liquid curve needs at least 3 points");
  return train(net, curve_dataset(curve), cfg).net;
}

void validate(const PriorSpec& prior) {
  if (prior.w0.empty()) throw DomainError("prior.w0 must be nonempty");
  if (!(prior.sigma_p > 0.0)) throw DomainError("prior.sigma_p must be positive");
  if (!(prior.tau_q > 0.0)) throw DomainError("prior.tau_q must be positive");
  if (!(prior.c >= 0.0) || !std::isfinite(prior.c)) throw DomainError("prior.c must be >= 0");
}

double kl_isotropic(std::span<const double> w, const PriorSpec& prior) {
  validate(prior);
  if (w.size() != prior.p()) throw DomainError("kl_isotropic: parameter length does not match prior");
  const double p = static_cast<double>(prior.p());
  const double s2 = prior.sigma_p * prior.sigma_p;
  const double t2 = prior.tau_q * prior.tau_q;
  double dist = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - prior.w0[i];
    dist += d * d;
  }
  const double kl = 0.5 * (t2 / s2 * p + dist / s2 - p + p * std::log(s2 / t2));
  return std::max(kl, 0.0);
}

std::uint64_t parameter_hash(std::span<const double> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::optional<std::size_t> stationarity(std::span<const double> series, std::size_t window) {
  if (window < 1) throw DomainError("stationarity: window must be >= 1");
  if (series.size() <= window + 1) return std::nullopt;
  const double w = static_cast<double>(window);
  auto m = [&](std::size_t i) { return (series[i + window] - series[i]) / w; };
  for (std::size_t i = 1; i + window < series.size(); ++i)
    if (m(i - 1) < 0.0 && m(i) >= 0.0) return i;
  return std::nullopt;
}

FineTuneResult fine_tune(const DeepLseNet& net0, std::span<const IvPoint> points, const TrainConfig& cfg,
                         const PriorSpec& prior) {
  validate(net0);
  validate(cfg);
  validate(prior);
  if (points.empty()) throw InsufficientData("fine_tune: no illiquid points");
  if (net0.input_dim != 1) throw DomainError("fine_tune: quotes carry one feature, network expects more");
  std::vector<double> w = flatten(net0);
  if (w.size() != prior.p()) throw DomainError("fine_tune: prior.w0 does not match the network");

  const Dataset data = points_dataset(points);
  const std::size_t window = cfg.stop_window;
  const bool early_stop = prior.c > 0.0;
  Adam opt(w.size(), cfg.adam, cfg.learning_rate);

  FineTuneResult res;
  auto& trace = res.trace;
  std::vector<double> objective;
  // Parameters of the last window + 1 epochs; the stop index always lies
  // exactly `window` epochs back from the epoch that detects it.
  std::deque<std::vector<double>> recent;
  DeepLseNet cur = net0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    cur = unflatten(cur, w);
    auto lg = gradient(cur, data);
    check_finite(lg.loss, epoch);
    const double kl = kl_isotropic(w, prior);
    const double b = lg.loss + prior.c * std::sqrt(kl);
    check_finite(b, epoch);
    trace.epochs.push_back({epoch, lg.loss, kl, b, parameter_hash(w)});
    objective.push_back(b);
    recent.push_back(w);
    if (recent.size() > window + 1) recent.pop_front();

    if (early_stop && epoch >= window) {
      const std::size_t i = epoch - window;
      const double m_i = (objective[epoch] - objective[i]) / static_cast<double>(window);
      const double m_prev = i > 0 ? (objective[epoch - 1] - objective[i - 1]) / static_cast<double>(window) : -1.0;
      if (m_i >= 0.0 && m_prev < 0.0) {
        trace.stop_epoch = i;
        trace.stopped_early = true;
        res.net = unflatten(net0, recent.front());
        if (cfg.sieve_box) res.net = project_sieve(res.net, *cfg.sieve_box);
        return res;
      }
    }
    if (epoch + 1 == cfg.max_epochs) break;

    opt.step(w, flatten(lg.grad));
    if (cfg.sieve_box && (epoch + 1) % cfg.project_every == 0)
      w = flatten(project_sieve(unflatten(cur, w), *cfg.sieve_box));
  }
  trace.stop_epoch = trace.epochs.size() - 1;
  trace.stopped_early = false;
  res.net = unflatten(net0, w);
  if (cfg.sieve_box) res.net = project_sieve(res.net, *cfg.sieve_box);
  return res;
}

}  // namespace dlse
