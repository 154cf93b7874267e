#include "dlse/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlse/csv.hpp"
#include "dlse/errors.hpp"
#include "dlse/maxaffine.hpp"

namespace dlse::cli {

namespace fs = std::filesystem;
using csv::format;

namespace {

std::vector<std::string> curve_row(const IvCurve& c, std::size_t i, const char* tag) {
  const double k = c.strike(i);
  const double price = bs_price(c.spot, k, c.rate, c.dividend, c.points[i].sigma, c.tau, OptionKind::Call);
  return {format(k), format(price), format(c.points[i].sigma), tag};
}

void write_curve(const std::string& path, const IvCurve& c, const char* tag) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < c.size(); ++i) rows.push_back(curve_row(c, i, tag));
  csv::write(path, {"strike", "price", "iv", "tag"}, rows);
}

void write_trace(const std::string& path, const FineTuneTrace& t) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : t.epochs)
    rows.push_back({std::to_string(e.epoch), format(e.risk), format(e.kl), format(e.objective),
                    e.epoch == t.stop_epoch ? "1" : "0"});
  csv::write(path, {"epoch", "risk", "kl", "objective", "stopped"}, rows);
}

OptionKind parse_kind(const csv::Table& t, std::size_t row, std::size_t col) {
  const auto& s = t.cell(row, col);
  if (s == "C" || s == "c") return OptionKind::Call;
  if (s == "P" || s == "p") return OptionKind::Put;
  throw SchemaError(t.source + ": column 'kind' row " + std::to_string(row + 1) + ": expected C or P, got '" + s + "'");
}

std::vector<OptionQuote> chain_quotes(const csv::Table& t) {
  const std::size_t ks = t.column("strike"), pr = t.column("price"), kd = t.column("kind"), ta = t.column("tau"),
                    sp = t.column("spot"), ra = t.column("rate"), dv = t.column("dividend");
  std::vector<OptionQuote> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    OptionQuote q{t.number(i, ks), t.number(i, pr), parse_kind(t, i, kd), t.number(i, ta),
                  t.number(i, sp), t.number(i, ra), t.number(i, dv)};
    validate(q);
    out.push_back(q);
  }
  if (out.empty()) throw SchemaError(t.source + ": no quotes");
  return out;
}

bool is_chain(const csv::Table& t) { return t.has_column("kind"); }

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string pick(const std::string& given, const std::string& dir, const std::string& name) {
  return given.empty() ? in_dir(dir, name) : given;
}

StrikeGrid grid_from_features(const std::string& path, const DeepLseNet& net, const MarketMeta& meta) {
  const auto t = csv::read(path);
  if (t.header.size() != net.input_dim)
    throw SchemaError(path + ": feature file has " + std::to_string(t.header.size()) +
                      " columns, checkpoint expects " + std::to_string(net.input_dim));
  const std::size_t col = t.column("moneyness");
  StrikeGrid g;
  g.spot = meta.spot;
  g.rate = meta.rate;
  g.dividend = meta.dividend;
  g.tau = meta.tau;
  for (std::size_t i = 0; i < t.rows.size(); ++i) g.strikes.push_back(t.number(i, col) * meta.spot);
  validate(g);
  return g;
}

nlohmann::json bounds_json(const DeepLseNet& net, const ExperimentConfig& cfg, std::size_t samples,
                           std::ostream& out) {
  const auto rep = delta_bound(net);
  nlohmann::json j;
  j["delta"] = rep.delta;
  j["delta_closed_form"] = rep.delta_closed_form;
  j["alpha_max"] = rep.alpha_max;
  j["delta_total"] = rep.delta_total;
  if (rep.depth_uniform_cap) j["depth_uniform_cap"] = *rep.depth_uniform_cap;
  out << "Delta_L = " << format(rep.delta_total) << "\n";
  if (cfg.sieve) {
    const double v = envelope_bound(*cfg.sieve, cfg.sieve->depth());
    j["envelope"] = v;
    out << "envelope V = " << format(v) << "\n";
    if (samples > 0) {
      const auto g = growth_check(*cfg.sieve, cfg.sieve->depth(), net.input_dim, samples);
      j["growth"] = {{"weight_count", g.weight_count},
                     {"complexity", g.complexity},
                     {"ratio", g.ratio},
                     {"n_samples", samples},
                     {"status", to_string(g.status)}};
      out << "growth check: " << to_string(g.status) << " (ratio " << format(g.ratio) << ")\n";
    }
  }
  return j;
}

}  // namespace

IvCurve load_curve(const std::string& path, const MarketMeta& meta) {
  const auto t = csv::read(path);
  if (is_chain(t)) return quotes_to_curve(chain_quotes(t));
  const std::size_t ks = t.column("strike"), iv = t.column("iv");
  IvCurve c;
  c.spot = meta.spot;
  c.rate = meta.rate;
  c.dividend = meta.dividend;
  c.tau = meta.tau;
  for (std::size_t i = 0; i < t.rows.size(); ++i) c.points.push_back({t.number(i, ks) / meta.spot, t.number(i, iv)});
  std::sort(c.points.begin(), c.points.end(),
            [](const IvPoint& a, const IvPoint& b) { return a.moneyness < b.moneyness; });
  if (c.points.empty()) throw SchemaError(path + ": no rows");
  validate(c);
  return c;
}

std::vector<OptionQuote> load_quotes(const std::string& path, const MarketMeta& meta) {
  const auto t = csv::read(path);
  if (is_chain(t)) return chain_quotes(t);
  const std::size_t ks = t.column("strike"), pr = t.column("price");
  std::vector<OptionQuote> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.push_back({t.number(i, ks), t.number(i, pr), OptionKind::Call, meta.tau, meta.spot, meta.rate, meta.dividend});
  if (out.empty()) throw SchemaError(path + ": no rows");
  return out;
}

RndEstimate load_rnd(const std::string& path, const MarketMeta& meta) {
  const auto t = csv::read(path);
  const std::size_t ks = t.column("strike"), de = t.column("density"), rd = t.column("raw_density");
  RndEstimate r;
  r.grid.spot = meta.spot;
  r.grid.rate = meta.rate;
  r.grid.dividend = meta.dividend;
  r.grid.tau = meta.tau;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    r.grid.strikes.push_back(t.number(i, ks));
    r.density.push_back(t.number(i, de));
    r.raw_density.push_back(t.number(i, rd));
  }
  validate(r.grid);
  r.raw_mass = trapezoid(r.grid, r.raw_density);
  r.mass_warning = !(r.raw_mass >= 0.9 && r.raw_mass <= 1.1);
  return r;
}

void write_rnd(const std::string& path, const RndEstimate& rnd) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < rnd.grid.size(); ++i)
    rows.push_back({format(rnd.grid.strikes[i]), format(rnd.density[i]), format(rnd.raw_density[i])});
  csv::write(path, {"strike", "density", "raw_density"}, rows);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep-LSE implied volatility transfer and risk-neutral density toolkit", "dlse"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Experiment configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Override every seed of the experiment");
  app.add_option("--out", out_dir, "Output directory");

  auto* simulate = app.add_subcommand("simulate", "Simulate liquid/target curves, illiquid quotes and the reference RND");

  std::string liquid_file;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Fit the network to the liquid curve");
  pretrain_cmd->add_option("--liquid", liquid_file, "Liquid curve (scenario or option-chain CSV)");

  std::string checkpoint, illiquid_file;
  auto* transfer = app.add_subcommand("transfer", "Fine-tune the pretrained network on illiquid quotes");
  transfer->add_option("--checkpoint", checkpoint, "Pretrained checkpoint");
  transfer->add_option("--illiquid", illiquid_file, "Illiquid quotes (scenario or option-chain CSV)");

  std::string features, rnd_name = "rnd.csv";
  auto* rnd_cmd = app.add_subcommand("rnd", "Extract the risk-neutral density of a checkpoint");
  rnd_cmd->add_option("--checkpoint", checkpoint, "Network checkpoint");
  rnd_cmd->add_option("--features", features, "Evaluation grid CSV (column: moneyness)");
  rnd_cmd->add_option("--name", rnd_name, "Output file name");

  std::string rnd_file, eval_file, truth_file;
  auto* evaluate = app.add_subcommand("evaluate", "Compare Deep-LSE with spline and parametric baselines");
  evaluate->add_option("--rnd", rnd_file, "Deep-LSE RND CSV");
  evaluate->add_option("--illiquid", illiquid_file, "Illiquid quotes used by the baselines");
  evaluate->add_option("--eval", eval_file, "Evaluation quotes (option-chain or scenario CSV)");
  evaluate->add_option("--truth", truth_file, "Reference RND CSV");

  std::size_t samples = 0;
  auto* bounds = app.add_subcommand("bounds", "Surrogate gap, envelope and sieve growth check");
  bounds->add_option("--checkpoint", checkpoint, "Network checkpoint");
  bounds->add_option("--samples", samples, "Sample size n for the growth check");

  std::vector<std::string> argv_store{"dlse"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "dlse: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (seed_opt->count() > 0) apply_seed(cfg, seed);
    const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
    fs::create_directories(dir);
    const MarketMeta meta = market_meta(cfg);

    if (simulate->parsed()) {
      std::vector<double> dropped;
      const auto sc = simulate_scenario(cfg, &dropped);
      for (double k : dropped) err << "warning: strike " << format(k) << " dropped (no-arbitrage bound violated)\n";
      write_curve(in_dir(dir, "liquid.csv"), sc.liquid, "liquid");
      write_curve(in_dir(dir, "target.csv"), sc.target, "truth");
      write_curve(in_dir(dir, "illiquid.csv"), sc.illiquid, "illiquid");
      write_rnd(in_dir(dir, "truth_rnd.csv"), *sc.truth_rnd);
      out << "liquid points: " << sc.liquid.size() << ", target points: " << sc.target.size()
          << ", illiquid quotes: " << sc.illiquid.size() << "\n";
    } else if (pretrain_cmd->parsed()) {
      const auto liquid = load_curve(pick(liquid_file, dir, "liquid.csv"), meta);
      TrainConfig tc = cfg.pretrain;
      if (cfg.sieve) tc.sieve_box = cfg.sieve;
      if (liquid.size() < 3) throw InsufficientData("pretrain: the liquid curve needs at least 3 points");
      const auto res = train(initial_network(cfg), curve_dataset(liquid), tc);
      save_checkpoint(res.net, in_dir(dir, "pretrained.json"));
      out << "pretrain mse: " << format(res.initial_loss) << " -> " << format(res.final_loss) << "\n";
    } else if (transfer->parsed()) {
      const auto net0 = load_checkpoint(pick(checkpoint, dir, "pretrained.json"));
      const auto illiquid = load_curve(pick(illiquid_file, dir, "illiquid.csv"), meta);
      const auto res = run_transfer(cfg, net0, illiquid);
      save_checkpoint(res.net, in_dir(dir, "transfer.json"));
      write_trace(in_dir(dir, "trace.csv"), res.trace);
      out << "stop epoch: " << res.trace.stop_epoch << (res.trace.stopped_early ? " (stationary point)" : " (max epochs)")
          << "\n";
    } else if (rnd_cmd->parsed()) {
      const auto net = load_checkpoint(pick(checkpoint, dir, "transfer.json"));
      if (!features.empty()) {
        const auto grid = grid_from_features(features, net, meta);
        write_rnd(in_dir(dir, rnd_name), network_rnd(net, grid, cfg.grid.support));
      } else {
        write_rnd(in_dir(dir, rnd_name), network_rnd(net, rnd_grid(cfg), cfg.grid.support));
      }
      out << "wrote " << in_dir(dir, rnd_name) << "\n";
    } else if (evaluate->parsed()) {
      const auto deep = load_rnd(pick(rnd_file, dir, "rnd.csv"), meta);
      const auto illiquid = load_curve(pick(illiquid_file, dir, "illiquid.csv"), meta);
      std::vector<OptionQuote> eval;
      if (!eval_file.empty()) {
        eval = load_quotes(eval_file, meta);
      } else if (fs::exists(in_dir(dir, "target.csv"))) {
        eval = market_quotes(load_curve(in_dir(dir, "target.csv"), meta), cfg.eval_strikes);
      }
      std::optional<RndEstimate> truth;
      const std::string tpath = pick(truth_file, dir, "truth_rnd.csv");
      if (!truth_file.empty() || fs::exists(tpath)) truth = load_rnd(tpath, meta);

      const auto methods = compare_methods(deep, illiquid, eval, truth);
      if (!eval.empty()) {
        std::vector<std::string> header{"method"};
        for (const auto& q : eval) header.push_back(format(q.strike));
        header.push_back("mae");
        std::vector<std::vector<std::string>> rows;
        for (const auto& m : methods) {
          std::vector<std::string> row{m.name};
          for (double e : m.report.abs_errors) row.push_back(format(e));
          row.push_back(format(m.report.mae));
          rows.push_back(row);
          out << m.name << ": MAE " << format(m.report.mae) << "\n";
        }
        csv::write(in_dir(dir, "report.csv"), header, rows);
      }
      if (truth) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& m : methods) {
          rows.push_back({m.name, format(*m.l1_to_truth)});
          out << m.name << ": L1 to truth " << format(*m.l1_to_truth) << "\n";
        }
        csv::write(in_dir(dir, "l1.csv"), {"method", "l1"}, rows);
      }
      write_rnd(in_dir(dir, "spline_rnd.csv"), methods[1].rnd);
      write_rnd(in_dir(dir, "lognormal_rnd.csv"), methods[2].rnd);
      write_rnd(in_dir(dir, "normal_rnd.csv"), methods[3].rnd);
    } else if (bounds->parsed()) {
      const auto net = load_checkpoint(pick(checkpoint, dir, "transfer.json"));
      const auto j = bounds_json(net, cfg, samples ? samples : cfg.sieve_samples, out);
      std::ofstream f(in_dir(dir, "bounds.json"));
      f << j.dump(2) << "\n";
    }
  } catch (const SchemaError& e) {
    err << "dlse: schema error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "dlse: invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "dlse: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace dlse::cli
