#include "dlse/deep_lse.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dlse/errors.hpp"
#include "dlse/lse.hpp"

namespace dlse {

double DeepLseNet::temperature(std::size_t layer) const { return kMinTemperature + softplus(layers.at(layer).t_raw); }

double DeepLseNet::skip(std::size_t layer, std::size_t k) const {
  const auto& lp = layers.at(layer);
  return lp.has_skip() ? softplus(lp.eta.at(k)) : 0.0;
}

std::vector<double> DeepLseNet::skips(std::size_t layer) const {
  const auto& lp = layers.at(layer);
  std::vector<double> out(lp.eta.size());
  std::transform(lp.eta.begin(), lp.eta.end(), out.begin(), softplus);
  return out;
}

std::size_t DeepLseNet::parameter_count() const {
  std::size_t n = 1;
  for (const auto& lp : layers) n += lp.a.size() + lp.b.size() + lp.eta.size() + 1;
  return n;
}

void Dataset::push_back(std::span<const double> x, double target) {
  if (x.size() != input_dim) throw DomainError("Dataset: feature length does not match input_dim");
  features.insert(features.end(), x.begin(), x.end());
  targets.push_back(target);
}

void validate(const DeepLseNet& net) {
  if (net.input_dim == 0) throw DomainError("DeepLseNet: input_dim must be >= 1");
  if (net.layers.empty()) throw DomainError("DeepLseNet: depth must be >= 1");
  if (!std::isfinite(net.c_out)) throw DomainError("DeepLseNet: non-finite c_out");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& lp = net.layers[l];
    const std::string where = "DeepLseNet layer " + std::to_string(l + 1) + ": ";
    if (lp.width == 0) throw DomainError(where + "width must be >= 1");
    if (lp.a.size() != lp.width * net.input_dim) throw DomainError(where + "slope matrix has wrong size");
    if (lp.b.size() != lp.width) throw DomainError(where + "intercept vector has wrong size");
    if (l == 0 && !lp.eta.empty()) throw DomainError(where + "first layer carries no skip weights");
    if (l > 0 && lp.eta.size() != lp.width) throw DomainError(where + "skip vector has wrong size");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(lp.a.begin(), lp.a.end(), finite) || !std::all_of(lp.b.begin(), lp.b.end(), finite) ||
        !std::all_of(lp.eta.begin(), lp.eta.end(), finite) || !std::isfinite(lp.t_raw))
      throw DomainError(where + "non-finite parameter");
  }
}

DeepLseNet init_network(std::span<const std::size_t> widths, std::size_t input_dim, std::uint64_t seed,
                        double scale) {
  if (widths.empty()) throw DomainError("init_network: depth must be >= 1");
  if (input_dim == 0) throw DomainError("init_network: input_dim must be >= 1");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DomainError("init_network: scale must be >= 0");
  for (std::size_t k : widths)
    if (k == 0) throw DomainError("init_network: widths must be >= 1");

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto draw = [&] { return scale * unif(gen); };

  const double eta0 = softplus_inv(0.1);
  const double traw0 = softplus_inv(1.0 - kMinTemperature);

  DeepLseNet net;
  net.input_dim = input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    LayerParams lp;
    lp.width = widths[l];
    lp.a.resize(lp.width * input_dim);
    lp.b.resize(lp.width);
    for (double& v : lp.a) v = draw();
    for (double& v : lp.b) v = draw();
    if (l > 0) lp.eta.assign(lp.width, eta0);
    lp.t_raw = traw0;
    net.layers.push_back(std::move(lp));
  }
  return net;
}

namespace {

double affine(const LayerParams& lp, std::size_t k, std::span<const double> x) {
  double s = lp.b[k];
  const std::size_t d = x.size();
  for (std::size_t j = 0; j < d; ++j) s += lp.a[k * d + j] * x[j];
  return s;
}

// Per-sample intermediate values kept for the backward pass.
struct Tape {
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<double>> weights;
  std::vector<double> z;
  std::vector<double> temps;
  std::vector<std::vector<double>> alphas;

  explicit Tape(const DeepLseNet& net) {
    const std::size_t L = net.depth();
    scores.resize(L);
    weights.resize(L);
    z.resize(L);
    temps.resize(L);
    alphas.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      scores[l].resize(net.layers[l].width);
      weights[l].resize(net.layers[l].width);
      temps[l] = net.temperature(l);
      alphas[l] = net.skips(l);
    }
  }
};

double run_forward(const DeepLseNet& net, std::span<const double> x, Tape& tape) {
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& lp = net.layers[l];
    auto& s = tape.scores[l];
    for (std::size_t k = 0; k < lp.width; ++k) {
      s[k] = affine(lp, k, x);
      if (l > 0) s[k] += tape.alphas[l][k] * tape.z[l - 1];
    }
    tape.z[l] = lse_with_weights(tape.temps[l], s, tape.weights[l]);
  }
  return tape.z.back() + net.c_out;
}

void check_input(const DeepLseNet& net, std::span<const double> x) {
  if (x.size() != net.input_dim)
    throw DomainError("forward: input has length " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(net.input_dim));
}

NetGradients zero_like(const DeepLseNet& net) {
  NetGradients g;
  g.layers = net.layers;
  for (auto& lp : g.layers) {
    std::fill(lp.a.begin(), lp.a.end(), 0.0);
    std::fill(lp.b.begin(), lp.b.end(), 0.0);
    std::fill(lp.eta.begin(), lp.eta.end(), 0.0);
    lp.t_raw = 0.0;
  }
  return g;
}

template <class Layers>
std::vector<double> flatten_layers(const Layers& layers, double c_out) {
  std::vector<double> out;
  for (const auto& lp : layers) {
    out.insert(out.end(), lp.a.begin(), lp.a.end());
    out.insert(out.end(), lp.b.begin(), lp.b.end());
    out.insert(out.end(), lp.eta.begin(), lp.eta.end());
    out.push_back(lp.t_raw);
  }
  out.push_back(c_out);
  return out;
}

}  // namespace

double forward(const DeepLseNet& net, std::span<const double> x) {
  check_input(net, x);
  Tape tape(net);
  return run_forward(net, x, tape);
}

LossAndGradient gradient(const DeepLseNet& net, const Dataset& data) {
  if (data.size() == 0) throw DomainError("gradient: empty batch");
  if (data.input_dim != net.input_dim) throw DomainError("gradient: dataset input_dim does not match network");

  LossAndGradient out;
  out.grad = zero_like(net);
  Tape tape(net);
  const std::size_t L = net.depth();
  const double n = static_cast<double>(data.size());
  std::vector<double> sig_eta_cache;

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const double resid = run_forward(net, x, tape) - data.targets[i];
    out.loss += resid * resid / n;

    double gz = 2.0 * resid / n;  // dLoss/dy, and dy/dz_L = 1
    out.grad.c_out += gz;
    for (std::size_t l = L; l-- > 0;) {
      const auto& lp = net.layers[l];
      auto& gl = out.grad.layers[l];
      const auto& p = tape.weights[l];
      const auto& s = tape.scores[l];
      const double T = tape.temps[l];

      // dLSE_T/dT = (z - sum_k p_k s_k) / T
      double ps = 0.0;
      for (std::size_t k = 0; k < lp.width; ++k) ps += p[k] * s[k];
      gl.t_raw += gz * (tape.z[l] - ps) / T * sigmoid(lp.t_raw);

      double gprev = 0.0;
      for (std::size_t k = 0; k < lp.width; ++k) {
        const double gs = gz * p[k];
        for (std::size_t j = 0; j < net.input_dim; ++j) gl.a[k * net.input_dim + j] += gs * x[j];
        gl.b[k] += gs;
        if (l > 0) {
          gl.eta[k] += gs * tape.z[l - 1] * sigmoid(lp.eta[k]);
          gprev += gs * tape.alphas[l][k];
        }
      }
      gz = gprev;
    }
  }
  return out;
}

double mse(const DeepLseNet& net, const Dataset& data) {
  if (data.size() == 0) throw DomainError("mse: empty batch");
  if (data.input_dim != net.input_dim) throw DomainError("mse: dataset input_dim does not match network");
  Tape tape(net);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = run_forward(net, data.row(i), tape) - data.targets[i];
    loss += r * r;
  }
  return loss / static_cast<double>(data.size());
}

std::vector<double> flatten(const DeepLseNet& net) { return flatten_layers(net.layers, net.c_out); }
std::vector<double> flatten(const NetGradients& grad) { return flatten_layers(grad.layers, grad.c_out); }

DeepLseNet unflatten(const DeepLseNet& shape, std::span<const double> params) {
  if (params.size() != shape.parameter_count()) throw DomainError("unflatten: parameter count mismatch");
  DeepLseNet net = shape;
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& dst) {
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
    pos += dst.size();
  };
  for (auto& lp : net.layers) {
    take(lp.a);
    take(lp.b);
    take(lp.eta);
    lp.t_raw = params[pos++];
  }
  net.c_out = params[pos];
  return net;
}

void validate(const SieveBox& box) {
  const std::size_t L = box.slope_cap.size();
  if (L == 0) throw DomainError("SieveBox: no layers");
  if (box.intercept_cap.size() != L || box.skip_cap.size() != L || box.temp_cap.size() != L ||
      box.width_cap.size() != L)
    throw DomainError("SieveBox: per-layer caps have inconsistent lengths");
  for (std::size_t l = 0; l < L; ++l) {
    if (!(box.slope_cap[l] > 0.0) || !(box.intercept_cap[l] > 0.0))
      throw DomainError("SieveBox: slope and intercept caps must be positive");
    if (!(box.skip_cap[l] > 0.0 && box.skip_cap[l] < 1.0)) throw DomainError("SieveBox: skip caps must lie in (0, 1)");
    if (!(box.temp_cap[l] > kMinTemperature)) throw DomainError("SieveBox: temperature caps must exceed the floor");
    if (box.width_cap[l] == 0) throw DomainError("SieveBox: width caps must be >= 1");
  }
  if (!(box.out_cap >= 0.0) || !(box.input_radius > 0.0))
    throw DomainError("SieveBox: output cap must be >= 0 and input radius positive");
}

DeepLseNet project_sieve(const DeepLseNet& net, const SieveBox& box) {
  validate(box);
  if (box.depth() != net.depth()) throw DomainError("project_sieve: box depth differs from network depth");
  DeepLseNet out = net;
  const std::size_t d = net.input_dim;
  for (std::size_t l = 0; l < out.depth(); ++l) {
    auto& lp = out.layers[l];
    if (lp.width > box.width_cap[l]) throw DomainError("project_sieve: layer width exceeds the box width cap");

    for (std::size_t k = 0; k < lp.width; ++k) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) norm2 += lp.a[k * d + j] * lp.a[k * d + j];
      const double norm = std::sqrt(norm2);
      if (norm > box.slope_cap[l]) {
        const double f = box.slope_cap[l] / norm;
        for (std::size_t j = 0; j < d; ++j) lp.a[k * d + j] *= f;
      }
    }
    for (double& b : lp.b) b = std::clamp(b, -box.intercept_cap[l], box.intercept_cap[l]);

    const double eta_cap = softplus_inv(box.skip_cap[l]);
    for (double& e : lp.eta)
      if (softplus(e) > box.skip_cap[l]) e = eta_cap;

    if (out.temperature(l) > box.temp_cap[l]) lp.t_raw = softplus_inv(box.temp_cap[l] - kMinTemperature);
  }
  out.c_out = std::clamp(out.c_out, -box.out_cap, box.out_cap);
  return out;
}

double envelope_bound(const SieveBox& box, std::size_t depth) {
  validate(box);
  if (depth == 0 || depth > box.depth()) throw DomainError("envelope_bound: depth outside the box");
  double v = 0.0;
  for (std::size_t l = 0; l < depth; ++l) {
    double tail = 1.0;
    for (std::size_t r = l + 1; r < depth; ++r) tail *= box.skip_cap[r];
    const double layer = box.input_radius * box.slope_cap[l] + box.intercept_cap[l] +
                         box.temp_cap[l] * std::log(static_cast<double>(box.width_cap[l]));
    v += layer * tail;
  }
  return box.out_cap + v;
}

GrowthReport growth_check(const SieveBox& box, std::size_t depth, std::size_t input_dim, std::size_t n_samples) {
  if (n_samples == 0) throw DomainError("growth_check: n_samples must be >= 1");
  if (input_dim == 0) throw DomainError("growth_check: input_dim must be >= 1");
  GrowthReport rep;
  rep.envelope = envelope_bound(box, depth);
  std::size_t w = box.width_cap[0] * (input_dim + 1);
  for (std::size_t l = 1; l < depth; ++l) w += box.width_cap[l] * (input_dim + 2);
  w += 1 + input_dim * (depth - 1);
  rep.weight_count = w;
  const double W = static_cast<double>(w);
  const double V = rep.envelope;
  rep.complexity = W * V * V * (static_cast<double>(depth) * std::log(V) + std::log(W));
  rep.ratio = rep.complexity / static_cast<double>(n_samples);
  rep.status = rep.ratio < 1.0 ? GrowthStatus::ConsistentRegime : GrowthStatus::GrowthWarning;
  return rep;
}

std::string to_string(GrowthStatus status) {
  return status == GrowthStatus::ConsistentRegime ? "consistent-regime" : "growth-warning";
}

}  // namespace dlse
