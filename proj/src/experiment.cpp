#include "dlse/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dlse/errors.hpp"

namespace dlse {

namespace {

using nlohmann::json;

// Field reader that tracks the dotted path of the object it reads from,
// rejects unknown keys, and turns type mismatches into SchemaErrors.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void opt(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw SchemaError("field '" + sub(key) + "' has the wrong type");
    }
  }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(j_.at(key), sub(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : "field '" + path_ + "'"; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw SchemaError("unknown field '" + sub(it.key()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

TrainConfig read_train(Reader r, TrainConfig t) {
  r.opt("learning_rate", t.learning_rate);
  r.opt("max_epochs", t.max_epochs);
  r.opt("batch_size", t.batch_size);
  r.opt("seed", t.seed);
  r.opt("project_every", t.project_every);
  r.opt("stop_window", t.stop_window);
  if (r.has("adam")) {
    auto a = r.child("adam");
    a.opt("beta1", t.adam.beta1);
    a.opt("beta2", t.adam.beta2);
    a.opt("eps", t.adam.eps);
    a.finish();
  }
  r.finish();
  return t;
}

BatesParams read_bates(Reader r, BatesParams p) {
  r.opt("S0", p.S0);
  r.opt("r", p.r);
  r.opt("v0", p.v0);
  r.opt("kappa", p.kappa);
  r.opt("theta", p.theta);
  r.opt("eta", p.eta);
  r.opt("rho", p.rho);
  r.opt("lambda", p.lambda);
  r.opt("mu_j", p.mu_j);
  r.opt("sigma_j", p.sigma_j);
  r.finish();
  return p;
}

KouHestonParams read_kou(Reader r, KouHestonParams p) {
  r.opt("S0", p.S0);
  r.opt("r", p.r);
  r.opt("q", p.q);
  r.opt("v0", p.v0);
  r.opt("kappa", p.kappa);
  r.opt("theta", p.theta);
  r.opt("sigma_v", p.sigma_v);
  r.opt("rho", p.rho);
  r.opt("lambda", p.lambda);
  r.opt("p_up", p.p_up);
  r.opt("eta1", p.eta1);
  r.opt("eta2", p.eta2);
  r.finish();
  return p;
}

AblParams read_abl(Reader r, AblParams p) {
  r.opt("S0", p.S0);
  r.opt("r", p.r);
  r.opt("lambda_j", p.lambda_j);
  r.opt("mu_j", p.mu_j);
  r.opt("sigma_j", p.sigma_j);
  if (r.has("factors")) {
    const json& arr = r.raw("factors");
    if (!arr.is_array()) throw SchemaError("field '" + r.sub("factors") + "' must be an array");
    p.factors.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader f(arr[i], r.sub("factors[" + std::to_string(i) + "]"));
      AblFactor af;
      f.opt("kappa", af.kappa);
      f.opt("theta", af.theta);
      f.opt("sigma", af.sigma);
      f.opt("v0", af.v0);
      f.opt("rho", af.rho);
      f.finish();
      p.factors.push_back(af);
    }
  }
  r.finish();
  return p;
}

ThreeFdeParams read_3fde(Reader r, ThreeFdeParams p) {
  r.opt("S0", p.S0);
  r.opt("r", p.r);
  r.opt("v1_0", p.v1_0);
  r.opt("v2_0", p.v2_0);
  r.opt("u_0", p.u_0);
  r.opt("kappa1", p.kappa1);
  r.opt("vbar1", p.vbar1);
  r.opt("sigma1", p.sigma1);
  r.opt("rho1", p.rho1);
  r.opt("kappa2", p.kappa2);
  r.opt("vbar2", p.vbar2);
  r.opt("sigma2", p.sigma2);
  r.opt("rho2", p.rho2);
  r.opt("kappa_u", p.kappa_u);
  r.opt("eta", p.eta);
  r.opt("mu_v", p.mu_v);
  r.opt("mu_u", p.mu_u);
  r.opt("rho_u", p.rho_u);
  r.opt("c_minus", p.c_minus);
  r.opt("c_plus", p.c_plus);
  r.opt("lambda_minus", p.lambda_minus);
  r.opt("lambda_plus", p.lambda_plus);
  r.finish();
  return p;
}

SimModelParams read_model(Reader r) {
  std::string type = "bates", preset;
  r.opt("type", type);
  r.opt("preset", preset);
  auto bad_preset = [&] { return SchemaError("field '" + r.sub("preset") + "': unknown preset '" + preset + "'"); };
  const json empty = json::object();
  const json& pj = r.has("params") ? r.raw("params") : empty;
  Reader params(pj, r.sub("params"));
  SimModelParams out;
  if (type == "bates") {
    if (!preset.empty() && preset != "reference") throw bad_preset();
    out = read_bates(params, bates_reference());
  } else if (type == "kou_heston") {
    if (!preset.empty() && preset != "reference") throw bad_preset();
    out = read_kou(params, kou_heston_reference());
  } else if (type == "abl") {
    if (!preset.empty() && preset != "set1" && preset != "set2") throw bad_preset();
    out = read_abl(params, preset == "set2" ? abl_set2() : abl_set1());
  } else if (type == "3fde") {
    if (!preset.empty() && preset != "proxy" && preset != "target") throw bad_preset();
    out = read_3fde(params, preset == "target" ? three_fde_target() : three_fde_proxy());
  } else {
    throw SchemaError("field '" + r.sub("type") + "': unknown model '" + type + "'");
  }
  r.finish();
  validate(out);
  return out;
}

SieveBox read_sieve(Reader r, std::size_t& samples) {
  SieveBox b;
  r.opt("slope_cap", b.slope_cap);
  r.opt("intercept_cap", b.intercept_cap);
  r.opt("skip_cap", b.skip_cap);
  r.opt("temp_cap", b.temp_cap);
  r.opt("width_cap", b.width_cap);
  r.opt("out_cap", b.out_cap);
  r.opt("input_radius", b.input_radius);
  r.opt("n_samples", samples);
  r.finish();
  validate(b);
  return b;
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.pretrain.learning_rate = 1e-2;
  c.pretrain.max_epochs = 3000;
  c.finetune.learning_rate = 1e-3;
  c.finetune.max_epochs = 3000;
  c.truth.train.learning_rate = 1e-2;
  c.truth.train.max_epochs = 4000;
  c.censor.picks = {82.0, 97.0, 98.0};
  // Bates at tau = 1 carries noticeable mass beyond 1.5 x spot.
  c.grid = {0.2, 3.2, 1201, IvSupport{0.4, 1.8, 0.1}};
  c.finetune.stop_window = 50;
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(source + ": line " + std::to_string(line_of(text, e.byte)) + ": JSON syntax error");
  }

  ExperimentConfig c = default_config();
  try {
    Reader r(doc, "");
    if (r.has("model")) c.model = read_model(r.child("model"));
    if (r.has("target_model")) c.target_model = read_model(r.child("target_model"));
    r.opt("tau", c.tau);
    if (!(c.tau > 0.0)) throw DomainError("field 'tau' must be positive");
    if (r.has("market")) {
      auto m = r.child("market");
      MarketMeta meta;
      meta.tau = c.tau;
      m.opt("spot", meta.spot);
      m.opt("rate", meta.rate);
      m.opt("dividend", meta.dividend);
      m.opt("tau", meta.tau);
      m.finish();
      if (!(meta.spot > 0.0) || !(meta.tau > 0.0)) throw DomainError("field 'market': spot and tau must be positive");
      c.market = meta;
    }
    if (r.has("sim")) {
      auto s = r.child("sim");
      s.opt("n_paths", c.sim.n_paths);
      s.opt("n_steps", c.sim.n_steps);
      s.opt("seed", c.sim.seed);
      s.opt("threads", c.sim.threads);
      std::string scheme = "full_truncation";
      s.opt("variance_scheme", scheme);
      if (scheme == "full_truncation") c.sim.variance_scheme = VarianceScheme::FullTruncation;
      else if (scheme == "reflection") c.sim.variance_scheme = VarianceScheme::Reflection;
      else throw SchemaError("field 'sim.variance_scheme': expected full_truncation or reflection");
      s.finish();
      validate(c.sim);
    }
    if (r.has("strikes")) {
      auto s = r.child("strikes");
      s.opt("lo", c.strike_lo);
      s.opt("hi", c.strike_hi);
      s.opt("step", c.strike_step);
      s.finish();
      if (!(c.strike_lo > 0.0 && c.strike_hi > c.strike_lo && c.strike_step > 0.0))
        throw DomainError("field 'strikes': need 0 < lo < hi and step > 0");
    }
    if (r.has("translation")) {
      auto t = r.child("translation");
      std::string mode = "multiplicative";
      t.opt("vol_shift_mode", mode);
      if (mode == "multiplicative") c.translation.mode = VolShiftMode::Multiplicative;
      else if (mode == "additive") c.translation.mode = VolShiftMode::Additive;
      else throw SchemaError("field 'translation.vol_shift_mode': expected multiplicative or additive");
      t.opt("vol_factor", c.translation.vol_factor);
      t.opt("vol_offset", c.translation.vol_offset);
      t.opt("strike_shift", c.translation.strike_shift);
      t.finish();
      if (!(c.translation.vol_factor > 0.0)) throw DomainError("field 'translation.vol_factor' must be positive");
    }
    if (r.has("censoring")) {
      auto s = r.child("censoring");
      c.censor.picks.clear();
      s.opt("picks", c.censor.picks);
      std::string band = "itm";
      s.opt("band", band);
      if (band == "itm") c.censor.rule.band = MoneynessBand::InTheMoney;
      else if (band == "otm") c.censor.rule.band = MoneynessBand::OutOfTheMoney;
      else throw SchemaError("field 'censoring.band': expected itm or otm");
      s.opt("lo", c.censor.rule.lo);
      s.opt("hi", c.censor.rule.hi);
      s.opt("count", c.censor.rule.count);
      s.opt("strike_step", c.censor.rule.strike_step);
      s.opt("seed", c.censor.seed);
      s.finish();
    }
    if (r.has("architecture")) {
      auto a = r.child("architecture");
      a.opt("widths", c.arch.widths);
      a.opt("input_dim", c.arch.input_dim);
      a.opt("init_scale", c.arch.init_scale);
      a.opt("seed", c.arch.seed);
      a.finish();
      if (c.arch.widths.empty()) throw DomainError("field 'architecture.widths' must be nonempty");
      for (auto k : c.arch.widths)
        if (k == 0) throw DomainError("field 'architecture.widths' entries must be >= 1");
      if (c.arch.input_dim != 1) throw DomainError("field 'architecture.input_dim': the pipeline uses moneyness only (1)");
    }
    if (r.has("pretrain")) c.pretrain = read_train(r.child("pretrain"), c.pretrain);
    if (r.has("finetune")) c.finetune = read_train(r.child("finetune"), c.finetune);
    if (r.has("prior")) {
      auto p = r.child("prior");
      p.opt("sigma", c.prior_sigma);
      p.opt("tau", c.prior_tau);
      p.opt("c", c.prior_c);
      p.finish();
      if (!(c.prior_sigma > 0.0) || !(c.prior_tau > 0.0)) throw DomainError("field 'prior': sigma and tau must be positive");
      if (!(c.prior_c >= 0.0)) throw DomainError("field 'prior.c' must be >= 0");
    }
    if (r.has("grid")) {
      auto g = r.child("grid");
      g.opt("m_lo", c.grid.m_lo);
      g.opt("m_hi", c.grid.m_hi);
      g.opt("n", c.grid.n);
      if (g.has("iv_support")) {
        std::vector<double> sup;
        g.opt("iv_support", sup);
        if (sup.empty()) {
          c.grid.support.reset();
        } else {
          if (sup.size() != 2 || !(sup[0] > 0.0 && sup[1] > sup[0]))
            throw DomainError("field 'grid.iv_support' must be [lo, hi] with 0 < lo < hi");
          c.grid.support = IvSupport{sup[0], sup[1]};
        }
      }
      if (g.has("wing_decay")) {
        double decay = 0.0;
        g.opt("wing_decay", decay);
        if (!(decay > 0.0)) throw DomainError("field 'grid.wing_decay' must be positive");
        if (!c.grid.support) throw DomainError("field 'grid.wing_decay' requires grid.iv_support");
        c.grid.support->decay = decay;
      }
      g.finish();
      if (!(c.grid.m_lo > 0.0 && c.grid.m_hi > c.grid.m_lo) || c.grid.n < 5)
        throw DomainError("field 'grid': need 0 < m_lo < m_hi and n >= 5");
    }
    if (r.has("truth")) {
      auto t = r.child("truth");
      std::string method = "deep_lse";
      t.opt("method", method);
      if (method == "deep_lse") c.truth.method = TruthMethod::DeepLse;
      else if (method == "spline") c.truth.method = TruthMethod::Spline;
      else throw SchemaError("field 'truth.method': expected deep_lse or spline");
      t.opt("widths", c.truth.widths);
      t.opt("init_scale", c.truth.init_scale);
      if (t.has("train")) c.truth.train = read_train(t.child("train"), c.truth.train);
      t.finish();
    }
    r.opt("eval_strikes", c.eval_strikes);
    if (r.has("sieve")) c.sieve = read_sieve(r.child("sieve"), c.sieve_samples);
    r.opt("output_dir", c.output_dir);
    r.finish();
  } catch (const SchemaError& e) {
    throw SchemaError(source + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(source + ": " + e.what());
  }
  validate(c.pretrain);
  validate(c.finetune);
  validate(c.truth.train);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.sim.seed = seed;
  cfg.arch.seed = seed + 1;
  cfg.censor.seed = seed + 2;
  cfg.pretrain.seed = seed;
  cfg.finetune.seed = seed;
  cfg.truth.train.seed = seed;
}

MarketMeta market_meta(const ExperimentConfig& cfg) {
  if (cfg.market) return *cfg.market;
  return {model_spot(cfg.model), model_rate(cfg.model), model_dividend(cfg.model), cfg.tau};
}

std::vector<double> liquid_strikes(const ExperimentConfig& cfg) {
  std::vector<double> ks;
  const auto n = static_cast<std::size_t>(std::floor((cfg.strike_hi - cfg.strike_lo) / cfg.strike_step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) ks.push_back(cfg.strike_lo + cfg.strike_step * static_cast<double>(i));
  return ks;
}

StrikeGrid rnd_grid(const ExperimentConfig& cfg) {
  const auto m = market_meta(cfg);
  return moneyness_grid(m.spot, m.rate, m.dividend, m.tau, cfg.grid.m_lo, cfg.grid.m_hi, cfg.grid.n);
}

MarketScenario simulate_scenario(const ExperimentConfig& cfg, std::vector<double>* dropped) {
  const auto strikes = liquid_strikes(cfg);
  MarketScenario sc;
  sc.liquid = build_liquid_curve(cfg.model, strikes, cfg.tau, cfg.sim, dropped);
  if (cfg.target_model) {
    sc.target = build_liquid_curve(*cfg.target_model, strikes, cfg.tau, cfg.sim);
  } else if (cfg.translation.mode == VolShiftMode::Multiplicative) {
    sc.target = translate_curve(sc.liquid, cfg.translation.vol_factor, cfg.translation.strike_shift);
  } else {
    sc.target = translate_curve_additive(sc.liquid, cfg.translation.vol_offset, cfg.translation.strike_shift);
  }
  sc.illiquid = cfg.censor.picks.empty() ? censor_to_illiquid(sc.target, cfg.censor.rule, cfg.censor.seed)
                                         : censor_to_illiquid(sc.target, cfg.censor.picks);
  sc.truth_rnd = truth_rnd(cfg, sc.target);
  return sc;
}

DeepLseNet initial_network(const ExperimentConfig& cfg) {
  return init_network(cfg.arch.widths, cfg.arch.input_dim, cfg.arch.seed, cfg.arch.init_scale);
}

DeepLseNet run_pretrain(const ExperimentConfig& cfg, const IvCurve& liquid) {
  TrainConfig tc = cfg.pretrain;
  if (cfg.sieve) tc.sieve_box = cfg.sieve;
  return pretrain(initial_network(cfg), liquid, tc);
}

PriorSpec make_prior(const ExperimentConfig& cfg, const DeepLseNet& pretrained) {
  PriorSpec p;
  p.w0 = flatten(pretrained);
  p.sigma_p = cfg.prior_sigma;
  p.tau_q = cfg.prior_tau;
  p.c = cfg.prior_c;
  return p;
}

FineTuneResult run_transfer(const ExperimentConfig& cfg, const DeepLseNet& pretrained, const IvCurve& illiquid) {
  TrainConfig tc = cfg.finetune;
  if (cfg.sieve) tc.sieve_box = cfg.sieve;
  return fine_tune(pretrained, illiquid.points, tc, make_prior(cfg, pretrained));
}

RndEstimate network_rnd(const DeepLseNet& net, const StrikeGrid& grid, const std::optional<IvSupport>& support) {
  if (net.input_dim != 1) throw DomainError("network_rnd: the network must take moneyness as its only input");
  IvModel iv = [&net](double m) { return forward(net, std::span<const double>(&m, 1)); };
  return extract_rnd(support ? with_wings(std::move(iv), *support) : iv, grid);
}

RndEstimate spline_rnd(std::span<const IvPoint> points, const StrikeGrid& grid) {
  const QuadraticSpline spline(points);
  return extract_rnd([&](double m) { return spline(m); }, grid);
}

RndEstimate truth_rnd(const ExperimentConfig& cfg, const IvCurve& target) {
  const StrikeGrid grid = rnd_grid(cfg);
  if (cfg.truth.method == TruthMethod::Spline) return spline_rnd(target.points, grid);
  const auto net0 = init_network(cfg.truth.widths, 1, cfg.arch.seed + 101, cfg.truth.init_scale);
  const auto fitted = pretrain(net0, target, cfg.truth.train);
  return network_rnd(fitted, grid, cfg.grid.support);
}

std::vector<OptionQuote> market_quotes(const IvCurve& target, std::span<const double> strikes) {
  std::vector<OptionQuote> out;
  for (double k : strikes) {
    OptionQuote q{k, 0.0, OptionKind::Call, target.tau, target.spot, target.rate, target.dividend};
    q.price = bs_price(q.spot, k, q.rate, q.dividend, interpolate_iv(target, k), q.tau, OptionKind::Call);
    out.push_back(q);
  }
  return out;
}

std::vector<MethodResult> compare_methods(const RndEstimate& deep_lse, const IvCurve& illiquid,
                                          std::span<const OptionQuote> eval_quotes,
                                          const std::optional<RndEstimate>& truth) {
  const StrikeGrid& grid = deep_lse.grid;
  const auto illiquid_quotes = curve_to_quotes(illiquid);
  std::vector<MethodResult> out;
  out.push_back({"Deep-LSE", deep_lse, {}, std::nullopt});
  out.push_back({"Quadratic spline", spline_rnd(illiquid.points, grid), {}, std::nullopt});
  out.push_back({"Parametric lognormal", fit_parametric(illiquid_quotes, ParametricFamily::Lognormal, grid).rnd, {},
                 std::nullopt});
  out.push_back(
      {"Parametric normal", fit_parametric(illiquid_quotes, ParametricFamily::Normal, grid).rnd, {}, std::nullopt});
  for (auto& m : out) {
    if (!eval_quotes.empty()) m.report = pricing_report(m.rnd, eval_quotes);
    if (truth) m.l1_to_truth = l1_distance(m.rnd, *truth);
  }
  return out;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  PipelineResult res;
  res.scenario = simulate_scenario(cfg);
  res.pretrained = run_pretrain(cfg, res.scenario.liquid);
  res.transfer = run_transfer(cfg, res.pretrained, res.scenario.illiquid);
  const auto rnd = network_rnd(res.transfer.net, rnd_grid(cfg), cfg.grid.support);
  const auto eval = market_quotes(res.scenario.target, cfg.eval_strikes);
  res.methods = compare_methods(rnd, res.scenario.illiquid, eval, res.scenario.truth_rnd);
  return res;
}

}  // namespace dlse
