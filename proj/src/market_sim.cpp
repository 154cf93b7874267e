#include "dlse/market_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <thread>

#include "dlse/errors.hpp"

namespace dlse {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 path_engine(std::uint64_t seed, std::size_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index)));
}

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw DomainError(field + " " + rule);
}

void require_nonneg(double v, const std::string& field) { require(v >= 0.0 && std::isfinite(v), field, "must be >= 0"); }
void require_corr(double v, const std::string& field) { require(v >= -1.0 && v <= 1.0, field, "must lie in [-1, 1]"); }

struct Step {
  double dt;
  double sqrt_dt;
  VarianceScheme scheme;
};

// One square-root variance update; returns the new stored value. Full
// truncation keeps the raw value (possibly negative) and uses its positive
// part in the dynamics; reflection keeps the stored value nonnegative.
double cir_step(double v, double kappa, double theta, double sigma, double dw, const Step& st) {
  if (st.scheme == VarianceScheme::FullTruncation) {
    const double vp = std::max(v, 0.0);
    return v + kappa * (theta - vp) * st.dt + sigma * std::sqrt(vp) * dw;
  }
  return std::abs(v + kappa * (theta - v) * st.dt + sigma * std::sqrt(v) * dw);
}

double effective(double v) { return std::max(v, 0.0); }

class Recorder {
 public:
  explicit Recorder(PathTrace* t) : t_(t) {}
  void record(double log_price, std::initializer_list<double> states) {
    if (!t_) return;
    t_->log_price.push_back(log_price);
    t_->states.emplace_back(states);
  }
  void record(double log_price, const std::vector<double>& states) {
    if (!t_) return;
    t_->log_price.push_back(log_price);
    t_->states.push_back(states);
  }

 private:
  PathTrace* t_;
};

double run_bates(const BatesParams& p, std::size_t n_steps, const Step& st, std::mt19937_64& g,
                 PathTrace* trace) {
  std::normal_distribution<double> normal;
  std::poisson_distribution<int> poisson(p.lambda * st.dt);
  const double k = bates_jump_compensator(p.mu_j, p.sigma_j);
  const double rho_c = std::sqrt(1.0 - p.rho * p.rho);
  Recorder rec(trace);
  double x = std::log(p.S0);
  double v = p.v0;
  rec.record(x, {effective(v)});
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double z1 = normal(g), z2 = normal(g);
    const double dw1 = st.sqrt_dt * z1;
    const double dw2 = st.sqrt_dt * (p.rho * z1 + rho_c * z2);
    const double vp = effective(v);
    x += (p.r - p.lambda * k - 0.5 * vp) * st.dt + std::sqrt(vp) * dw1;
    if (p.lambda > 0.0) {
      const int n = poisson(g);
      for (int j = 0; j < n; ++j) x += p.mu_j + p.sigma_j * normal(g);
    }
    v = cir_step(v, p.kappa, p.theta, p.eta, dw2, st);
    rec.record(x, {effective(v)});
  }
  return std::exp(x);
}

double run_kou(const KouHestonParams& p, std::size_t n_steps, const Step& st, std::mt19937_64& g,
               PathTrace* trace) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::poisson_distribution<int> poisson(p.lambda * st.dt);
  std::exponential_distribution<double> up(p.eta1), down(p.eta2);
  const double kj = kou_jump_compensator(p.p_up, p.eta1, p.eta2);
  const double rho_c = std::sqrt(1.0 - p.rho * p.rho);
  Recorder rec(trace);
  double x = std::log(p.S0);
  double v = p.v0;
  rec.record(x, {effective(v)});
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double z1 = normal(g), z2 = normal(g);
    const double dw1 = st.sqrt_dt * z1;
    const double dw2 = st.sqrt_dt * (p.rho * z1 + rho_c * z2);
    const double vp = effective(v);
    x += (p.r - p.q - p.lambda * kj - 0.5 * vp) * st.dt + std::sqrt(vp) * dw1;
    if (p.lambda > 0.0) {
      const int n = poisson(g);
      for (int j = 0; j < n; ++j) x += unif(g) < p.p_up ? up(g) : -down(g);
    }
    v = cir_step(v, p.kappa, p.theta, p.sigma_v, dw2, st);
    rec.record(x, {effective(v)});
  }
  return std::exp(x);
}

double run_abl(const AblParams& p, std::size_t n_steps, const Step& st, std::mt19937_64& g, PathTrace* trace) {
  std::normal_distribution<double> normal;
  std::poisson_distribution<int> poisson(p.lambda_j * st.dt);
  const std::size_t n = p.factors.size();
  double rho_sq = 0.0;
  for (const auto& f : p.factors) rho_sq += f.rho * f.rho;
  const double resid = std::sqrt(std::max(1.0 - rho_sq, 0.0));
  const double mu_q = p.r - p.lambda_j * bates_jump_compensator(p.mu_j, p.sigma_j);

  Recorder rec(trace);
  std::vector<double> v(n), eff(n), dw(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = p.factors[i].v0;
  double x = std::log(p.S0);
  if (trace) {
    for (std::size_t i = 0; i < n; ++i) eff[i] = effective(v[i]);
    rec.record(x, eff);
  }
  for (std::size_t s = 0; s < n_steps; ++s) {
    double total_v = 0.0, dz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dw[i] = st.sqrt_dt * normal(g);
      total_v += effective(v[i]);
      dz += p.factors[i].rho * dw[i];
    }
    dz += resid * st.sqrt_dt * normal(g);
    x += (mu_q - 0.5 * total_v) * st.dt + std::sqrt(total_v) * dz;
    if (p.lambda_j > 0.0) {
      const int nj = poisson(g);
      for (int j = 0; j < nj; ++j) x += p.mu_j + p.sigma_j * normal(g);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = p.factors[i];
      v[i] = cir_step(v[i], f.kappa, f.theta, f.sigma, dw[i], st);
    }
    if (trace) {
      for (std::size_t i = 0; i < n; ++i) eff[i] = effective(v[i]);
      rec.record(x, eff);
    }
  }
  return std::exp(x);
}

double intensity(const std::array<double, 4>& c, double v1, double v2, double u) {
  return std::max(c[0] + c[1] * v1 + c[2] * v2 + c[3] * u, 0.0);
}

// Simulates the forward F_t with F_0 = S0 e^{r tau}; S_T = F_T. Jump
// intensities are frozen at the start-of-step state, so the per-step
// compensator is exact for the drawn counts.
double run_3fde(const ThreeFdeParams& p, double tau, std::size_t n_steps, const Step& st, std::mt19937_64& g,
                PathTrace* trace) {
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> neg(p.lambda_minus), pos(p.lambda_plus);
  const double k_minus = p.lambda_minus / (p.lambda_minus + 1.0) - 1.0;
  const double k_plus = p.lambda_plus / (p.lambda_plus - 1.0) - 1.0;
  const double c1 = std::sqrt(1.0 - p.rho1 * p.rho1);
  const double c2 = std::sqrt(1.0 - p.rho2 * p.rho2);
  const double decay = std::exp(-p.kappa_u * st.dt);

  Recorder rec(trace);
  double x = std::log(p.S0) + p.r * tau;
  double v1 = p.v1_0, v2 = p.v2_0, u = p.u_0;
  rec.record(x, {effective(v1), effective(v2), u});
  for (std::size_t s = 0; s < n_steps; ++s) {
    const double e1 = effective(v1), e2 = effective(v2);
    const double cm = intensity(p.c_minus, e1, e2, u);
    const double cp = intensity(p.c_plus, e1, e2, u);

    const double z1 = normal(g), z2 = normal(g), z3 = normal(g), y1 = normal(g), y2 = normal(g);
    const double dw1 = st.sqrt_dt * z1, dw2 = st.sqrt_dt * z2, dw3 = st.sqrt_dt * z3;
    const double db1 = st.sqrt_dt * (p.rho1 * z1 + c1 * y1);
    const double db2 = st.sqrt_dt * (p.rho2 * z2 + c2 * y2);

    const double diff_var = e1 + e2 + p.eta * p.eta * u;
    x += -(0.5 * diff_var + cm * k_minus + cp * k_plus) * st.dt + std::sqrt(e1) * dw1 + std::sqrt(e2) * dw2 +
         p.eta * std::sqrt(u) * dw3;

    double jump_v1 = 0.0, jump_u = 0.0;
    if (cm > 0.0) {
      std::poisson_distribution<int> n_neg(cm * st.dt);
      const int nx = n_neg(g);
      for (int j = 0; j < nx; ++j) {
        const double xj = -neg(g);
        x += xj;
        jump_v1 += p.mu_v * xj * xj;
        jump_u += p.mu_u * (1.0 - p.rho_u) * xj * xj;
      }
      const int ny = n_neg(g);
      for (int j = 0; j < ny; ++j) {
        const double yj = -neg(g);
        jump_u += p.mu_u * p.rho_u * yj * yj;
      }
    }
    if (cp > 0.0) {
      std::poisson_distribution<int> n_pos(cp * st.dt);
      const int nx = n_pos(g);
      for (int j = 0; j < nx; ++j) x += pos(g);
    }

    v1 = cir_step(v1, p.kappa1, p.vbar1, p.sigma1, db1, st) + jump_v1;
    v2 = cir_step(v2, p.kappa2, p.vbar2, p.sigma2, db2, st);
    u = u * decay + jump_u;
    rec.record(x, {effective(v1), effective(v2), u});
  }
  return std::exp(x);
}

double run_path(const SimModelParams& model, double tau, const SimConfig& cfg, std::size_t index, PathTrace* trace) {
  auto g = path_engine(cfg.seed, index);
  Step st{tau / static_cast<double>(cfg.n_steps), 0.0, cfg.variance_scheme};
  st.sqrt_dt = std::sqrt(st.dt);
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, BatesParams>) return run_bates(p, cfg.n_steps, st, g, trace);
        else if constexpr (std::is_same_v<P, KouHestonParams>) return run_kou(p, cfg.n_steps, st, g, trace);
        else if constexpr (std::is_same_v<P, AblParams>) return run_abl(p, cfg.n_steps, st, g, trace);
        else return run_3fde(p, tau, cfg.n_steps, st, g, trace);
      },
      model);
}

IvCurve translate_impl(const IvCurve& curve, double strike_shift, auto&& vol_map) {
  validate(curve);
  IvCurve out = curve;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double k = curve.strike(i) + strike_shift;
    if (!(k > 0.0)) throw DomainError("translate_curve: shifted strike is not positive");
    out.points[i].moneyness = k / curve.spot;
    out.points[i].sigma = vol_map(curve.points[i].sigma);
  }
  validate(out);
  return out;
}

}  // namespace

BatesParams bates_reference() { return BatesParams{}; }

KouHestonParams kou_heston_reference() { return KouHestonParams{}; }

AblParams abl_set1() {
  AblParams p;
  p.S0 = 100.0;
  p.r = 0.05;
  p.factors = {{3.0, 0.02, 0.2, 0.02, -0.3}, {1.5, 0.04, 0.3, 0.04, 0.0}, {0.5, 0.06, 0.4, 0.06, 0.3}};
  p.lambda_j = 0.20;
  p.mu_j = 0.0;
  p.sigma_j = 0.55;
  return p;
}

AblParams abl_set2() {
  AblParams p = abl_set1();
  p.lambda_j = 0.25;
  p.mu_j = 0.18;
  p.sigma_j = 0.60;
  return p;
}

ThreeFdeParams three_fde_proxy() { return ThreeFdeParams{}; }

ThreeFdeParams three_fde_target() {
  ThreeFdeParams p;
  p.vbar2 = 0.03;
  p.sigma2 = 0.06;
  p.rho2 = -0.6;
  p.c_minus = {0.0, 1.0, 0.1, 7.0};
  p.c_plus = {0.05, 15.0, 18.0, 0.0};
  p.lambda_minus = 10.0;
  p.lambda_plus = 5.7;
  return p;
}

double bates_jump_compensator(double mu_j, double sigma_j) { return std::exp(mu_j + 0.5 * sigma_j * sigma_j) - 1.0; }

double kou_jump_compensator(double p_up, double eta1, double eta2) {
  if (!(eta1 > 1.0)) throw DomainError("kou.eta1 must be > 1");
  if (!(eta2 > -1.0)) throw DomainError("kou.eta2 must be > -1");
  return p_up * eta1 / (eta1 - 1.0) + (1.0 - p_up) * eta2 / (eta2 + 1.0) - 1.0;
}

void validate(const SimModelParams& model) {
  std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, BatesParams>) {
          require(p.S0 > 0.0, "bates.S0", "must be positive");
          require(std::isfinite(p.r), "bates.r", "must be finite");
          require_nonneg(p.v0, "bates.v0");
          require_nonneg(p.kappa, "bates.kappa");
          require_nonneg(p.theta, "bates.theta");
          require_nonneg(p.eta, "bates.eta");
          require_corr(p.rho, "bates.rho");
          require_nonneg(p.lambda, "bates.lambda");
          require(std::isfinite(p.mu_j), "bates.mu_j", "must be finite");
          require_nonneg(p.sigma_j, "bates.sigma_j");
        } else if constexpr (std::is_same_v<P, KouHestonParams>) {
          require(p.S0 > 0.0, "kou.S0", "must be positive");
          require(std::isfinite(p.r) && std::isfinite(p.q), "kou.r", "must be finite");
          require_nonneg(p.v0, "kou.v0");
          require_nonneg(p.kappa, "kou.kappa");
          require_nonneg(p.theta, "kou.theta");
          require_nonneg(p.sigma_v, "kou.sigma_v");
          require_corr(p.rho, "kou.rho");
          require_nonneg(p.lambda, "kou.lambda");
          require(p.p_up >= 0.0 && p.p_up <= 1.0, "kou.p_up", "must lie in [0, 1]");
          require(p.eta1 > 1.0, "kou.eta1", "must be > 1");
          require(p.eta2 > 0.0, "kou.eta2", "must be positive");
        } else if constexpr (std::is_same_v<P, AblParams>) {
          require(p.S0 > 0.0, "abl.S0", "must be positive");
          require(std::isfinite(p.r), "abl.r", "must be finite");
          require(!p.factors.empty(), "abl.factors", "must be nonempty");
          double rho_sq = 0.0;
          for (std::size_t i = 0; i < p.factors.size(); ++i) {
            const auto& f = p.factors[i];
            const std::string tag = "abl.factors[" + std::to_string(i) + "].";
            require_nonneg(f.kappa, tag + "kappa");
            require_nonneg(f.theta, tag + "theta");
            require_nonneg(f.sigma, tag + "sigma");
            require_nonneg(f.v0, tag + "v0");
            require_corr(f.rho, tag + "rho");
            rho_sq += f.rho * f.rho;
          }
          require(rho_sq <= 1.0, "abl.rho", "squared correlations must sum to at most 1");
          require_nonneg(p.lambda_j, "abl.lambda_j");
          require(std::isfinite(p.mu_j), "abl.mu_j", "must be finite");
          require_nonneg(p.sigma_j, "abl.sigma_j");
        } else {
          require(p.S0 > 0.0, "3fde.S0", "must be positive");
          require(std::isfinite(p.r), "3fde.r", "must be finite");
          require_nonneg(p.v1_0, "3fde.v1_0");
          require_nonneg(p.v2_0, "3fde.v2_0");
          require_nonneg(p.u_0, "3fde.u_0");
          require_nonneg(p.kappa1, "3fde.kappa1");
          require_nonneg(p.vbar1, "3fde.vbar1");
          require_nonneg(p.sigma1, "3fde.sigma1");
          require_corr(p.rho1, "3fde.rho1");
          require_nonneg(p.kappa2, "3fde.kappa2");
          require_nonneg(p.vbar2, "3fde.vbar2");
          require_nonneg(p.sigma2, "3fde.sigma2");
          require_corr(p.rho2, "3fde.rho2");
          require_nonneg(p.kappa_u, "3fde.kappa_u");
          require(std::isfinite(p.eta), "3fde.eta", "must be finite");
          require_nonneg(p.mu_v, "3fde.mu_v");
          require_nonneg(p.mu_u, "3fde.mu_u");
          require(p.rho_u >= 0.0 && p.rho_u <= 1.0, "3fde.rho_u", "must lie in [0, 1]");
          for (std::size_t i = 0; i < 4; ++i) {
            require_nonneg(p.c_minus[i], "3fde.c_minus[" + std::to_string(i) + "]");
            require_nonneg(p.c_plus[i], "3fde.c_plus[" + std::to_string(i) + "]");
          }
          require(p.lambda_minus > 0.0, "3fde.lambda_minus", "must be positive");
          require(p.lambda_plus > 1.0, "3fde.lambda_plus", "must be > 1");
        }
      },
      model);
}

std::string model_tag(const SimModelParams& model) {
  static const char* names[] = {"bates", "kou_heston", "abl", "3fde"};
  return names[model.index()];
}

double model_spot(const SimModelParams& model) {
  return std::visit([](const auto& p) { return p.S0; }, model);
}

double model_rate(const SimModelParams& model) {
  return std::visit([](const auto& p) { return p.r; }, model);
}

double model_dividend(const SimModelParams& model) {
  if (const auto* k = std::get_if<KouHestonParams>(&model)) return k->q;
  return 0.0;
}

void validate(const SimConfig& cfg) {
  if (cfg.n_paths < 1) throw DomainError("sim.n_paths must be >= 1");
  if (cfg.n_steps < 1) throw DomainError("sim.n_steps must be >= 1");
}

std::vector<double> simulate_terminals(const SimModelParams& model, double tau, const SimConfig& cfg) {
  validate(model);
  validate(cfg);
  if (!(tau > 0.0)) throw DomainError("simulate_terminals: tau must be positive");

  std::vector<double> out(cfg.n_paths);
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_paths));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = run_path(model, tau, cfg, i, nullptr);
  };
  if (threads <= 1) {
    work(0, cfg.n_paths);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cfg.n_paths + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(cfg.n_paths, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  for (double s : out)
    if (!std::isfinite(s)) throw NumericError("simulate_terminals: non-finite terminal price");
  return out;
}

PathTrace trace_path(const SimModelParams& model, double tau, const SimConfig& cfg, std::size_t path_index) {
  validate(model);
  validate(cfg);
  if (!(tau > 0.0)) throw DomainError("trace_path: tau must be positive");
  PathTrace t;
  t.terminal = run_path(model, tau, cfg, path_index, &t);
  return t;
}

std::vector<McEstimate> mc_call_estimates(std::span<const double> terminals, double rate, double tau,
                                          std::span<const double> strikes) {
  if (terminals.empty()) throw DomainError("mc_call_prices: no terminal values");
  const double df = std::exp(-rate * tau);
  const double n = static_cast<double>(terminals.size());
  std::vector<McEstimate> out;
  out.reserve(strikes.size());
  for (double k : strikes) {
    double sum = 0.0, sum_sq = 0.0;
    for (double s : terminals) {
      const double pay = std::max(s - k, 0.0);
      sum += pay;
      sum_sq += pay * pay;
    }
    const double mean = sum / n;
    const double var = terminals.size() > 1 ? std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0) : 0.0;
    out.push_back({df * mean, df * std::sqrt(var / n)});
  }
  return out;
}

std::vector<double> mc_call_prices(std::span<const double> terminals, double rate, double tau,
                                   std::span<const double> strikes) {
  auto est = mc_call_estimates(terminals, rate, tau, strikes);
  std::vector<double> out;
  out.reserve(est.size());
  for (const auto& e : est) out.push_back(e.price);
  return out;
}

IvCurve curve_from_terminals(std::span<const double> terminals, const SimModelParams& model,
                             std::span<const double> strikes, double tau, std::vector<double>* dropped) {
  if (terminals.empty()) throw DomainError("build_liquid_curve: no terminal values");
  const double s_max = *std::max_element(terminals.begin(), terminals.end());
  std::vector<double> ks(strikes.begin(), strikes.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (double k : ks)
    if (!(k > 0.0 && k < s_max)) throw DomainError("build_liquid_curve: strike " + std::to_string(k) +
                                                   " outside (0, max terminal)");

  IvCurve c;
  c.spot = model_spot(model);
  c.tau = tau;
  c.rate = model_rate(model);
  c.dividend = model_dividend(model);
  const auto prices = mc_call_prices(terminals, c.rate, tau, ks);
  if (dropped) dropped->clear();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    OptionQuote q{ks[i], prices[i], OptionKind::Call, tau, c.spot, c.rate, c.dividend};
    try {
      c.points.push_back({ks[i] / c.spot, implied_vol(q)});
    } catch (const NoArbitrageError&) {
      if (dropped) dropped->push_back(ks[i]);
    } catch (const NumericError&) {
      if (dropped) dropped->push_back(ks[i]);
    }
  }
  if (c.size() < 3)
    throw InsufficientData("build_liquid_curve: only " + std::to_string(c.size()) +
                           " strikes survive the no-arbitrage filter");
  validate(c);
  return c;
}

IvCurve build_liquid_curve(const SimModelParams& model, std::span<const double> strikes, double tau,
                           const SimConfig& cfg, std::vector<double>* dropped) {
  const auto terminals = simulate_terminals(model, tau, cfg);
  return curve_from_terminals(terminals, model, strikes, tau, dropped);
}

IvCurve translate_curve(const IvCurve& curve, double vol_factor, double strike_shift) {
  if (!(vol_factor > 0.0)) throw DomainError("translate_curve: vol_factor must be positive");
  return translate_impl(curve, strike_shift, [&](double s) { return s * vol_factor; });
}

IvCurve translate_curve_additive(const IvCurve& curve, double vol_offset, double strike_shift) {
  return translate_impl(curve, strike_shift, [&](double s) {
    const double out = s + vol_offset;
    if (!(out > 0.0)) throw DomainError("translate_curve: additive shift makes sigma non-positive");
    return out;
  });
}

double interpolate_iv(const IvCurve& curve, double strike) {
  validate(curve);
  if (curve.size() == 0) throw DomainError("interpolate_iv: empty curve");
  const double m = strike / curve.spot;
  const auto& pts = curve.points;
  const double tol = 1e-12 * std::max(1.0, std::abs(m));
  if (m < pts.front().moneyness - tol || m > pts.back().moneyness + tol)
    throw DomainError("interpolate_iv: strike " + std::to_string(strike) + " outside the curve's range");
  if (m <= pts.front().moneyness) return pts.front().sigma;
  if (m >= pts.back().moneyness) return pts.back().sigma;
  auto it = std::upper_bound(pts.begin(), pts.end(), m,
                             [](double v, const IvPoint& p) { return v < p.moneyness; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (m - lo.moneyness) / (hi.moneyness - lo.moneyness);
  return lo.sigma + w * (hi.sigma - lo.sigma);
}

IvCurve censor_to_illiquid(const IvCurve& curve, std::span<const double> picks) {
  if (picks.empty()) throw DomainError("censor_to_illiquid: no strikes picked");
  IvCurve out = curve;
  out.points.clear();
  std::vector<double> ks(picks.begin(), picks.end());
  std::sort(ks.begin(), ks.end());
  if (std::adjacent_find(ks.begin(), ks.end()) != ks.end())
    throw DomainError("censor_to_illiquid: repeated strike");
  for (double k : ks) out.points.push_back({k / curve.spot, interpolate_iv(curve, k)});
  return out;
}

IvCurve censor_to_illiquid(const IvCurve& curve, const CensorRule& rule, std::uint64_t seed) {
  if (!(rule.lo >= 0.0 && rule.hi >= rule.lo)) throw DomainError("censor_to_illiquid: band needs 0 <= lo <= hi");
  if (!(rule.strike_step > 0.0)) throw DomainError("censor_to_illiquid: strike_step must be positive");
  if (rule.count == 0) throw DomainError("censor_to_illiquid: count must be >= 1");
  validate(curve);

  const double s = curve.spot;
  double lo = rule.band == MoneynessBand::InTheMoney ? s * (1.0 - rule.hi) : s * (1.0 + rule.lo);
  double hi = rule.band == MoneynessBand::InTheMoney ? s * (1.0 - rule.lo) : s * (1.0 + rule.hi);
  // Restrict to where the curve can be interpolated.
  if (curve.size() > 0) {
    lo = std::max(lo, curve.strike(0));
    hi = std::min(hi, curve.strike(curve.size() - 1));
  }
  const double eps = 1e-9 * rule.strike_step;
  const auto first = static_cast<long long>(std::ceil(lo / rule.strike_step - eps));
  const auto last = static_cast<long long>(std::floor(hi / rule.strike_step + eps));
  if (last < first || !(lo > 0.0)) throw DomainError("censor_to_illiquid: empty moneyness band");
  const auto available = static_cast<std::size_t>(last - first + 1);
  if (available < rule.count)
    throw DomainError("censor_to_illiquid: band holds " + std::to_string(available) + " lattice strikes, " +
                      std::to_string(rule.count) + " requested");

  std::mt19937_64 g(splitmix64(seed));
  std::uniform_int_distribution<long long> pick(first, last);
  std::set<long long> chosen;
  while (chosen.size() < rule.count) chosen.insert(pick(g));
  std::vector<double> ks;
  for (long long i : chosen) ks.push_back(static_cast<double>(i) * rule.strike_step);
  return censor_to_illiquid(curve, ks);
}

}  // namespace dlse
