#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "dlse/deep_lse.hpp"
#include "dlse/errors.hpp"
#include "dlse/training.hpp"
#include "support.hpp"

using namespace dlse;

namespace {

// KL(N(mq, Sq) || N(mp, Sp)) for full covariance matrices.
double kl_general(const Eigen::VectorXd& mq, const Eigen::MatrixXd& sq, const Eigen::VectorXd& mp,
                  const Eigen::MatrixXd& sp) {
  const Eigen::LLT<Eigen::MatrixXd> llt(sp);
  const Eigen::MatrixXd sp_inv = llt.solve(Eigen::MatrixXd::Identity(sp.rows(), sp.cols()));
  const Eigen::VectorXd d = mp - mq;
  const double p = static_cast<double>(mq.size());
  return 0.5 * ((sp_inv * sq).trace() + d.dot(sp_inv * d) - p + std::log(sp.determinant() / sq.determinant()));
}

IvCurve curve_of(const std::vector<double>& ms, auto&& sigma) {
  IvCurve c;
  for (double m : ms) c.points.push_back({m, sigma(m)});
  return c;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

TrainConfig adam_cfg(double lr, std::size_t epochs) {
  TrainConfig c;
  c.learning_rate = lr;
  c.max_epochs = epochs;
  return c;
}

}  // namespace

TEST_CASE("Adam: first step moves each coordinate by the learning rate") {
  Adam opt(3, AdamParams{}, 0.1);
  std::vector<double> w{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 0.0};
  opt.step(w, g);
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(w[2] == 0.5);
  CHECK(opt.steps() == 1);
}

TEST_CASE("pretrain: realizable target") {
  const std::vector<std::size_t> widths{3, 3};
  const auto teacher = init_network(widths, 1, 41, 0.5);
  const auto ms = linspace(0.5, 1.5, 40);
  IvCurve c = curve_of(ms, [&](double m) { return forward(teacher, std::span<const double>(&m, 1)); });
  const auto student = pretrain(teacher, c, adam_cfg(1e-2, 50));
  CHECK(mse(student, curve_dataset(c)) < 1e-10);
}

TEST_CASE("pretrain: convex smile within 0.01") {
  const auto ms = linspace(0.5, 1.5, 50);
  const auto sigma = [](double m) { return 0.1 + 0.5 * (m - 1.0) * (m - 1.0); };
  const IvCurve c = curve_of(ms, sigma);
  const auto net = pretrain(init_network(std::vector<std::size_t>{3, 3}, 1, 7, 0.5), c, adam_cfg(3e-2, 5000));
  double sup = 0.0;
  for (double m : linspace(0.5, 1.5, 201)) sup = std::max(sup, std::abs(forward(net, std::span<const double>(&m, 1)) - sigma(m)));
  CHECK(sup < 0.01);
}

TEST_CASE("train: determinism, monotone result, errors") {
  const auto ms = linspace(0.6, 1.4, 20);
  const IvCurve c = curve_of(ms, [](double m) { return 0.2 + 0.3 * std::abs(m - 1.0); });
  const auto net0 = init_network(std::vector<std::size_t>{3, 3}, 1, 3, 0.5);
  auto cfg = adam_cfg(1e-2, 300);
  const auto a = train(net0, curve_dataset(c), cfg);
  const auto b = train(net0, curve_dataset(c), cfg);
  CHECK(a.net == b.net);
  CHECK(a.final_loss <= a.initial_loss);
  CHECK(a.losses.size() == cfg.max_epochs + 1);

  cfg.batch_size = 5;
  cfg.seed = 4;
  const auto mb1 = train(net0, curve_dataset(c), cfg);
  const auto mb2 = train(net0, curve_dataset(c), cfg);
  CHECK(mb1.net == mb2.net);

  IvCurve two;
  two.points = {{0.9, 0.2}, {1.1, 0.2}};
  CHECK_THROWS_AS(pretrain(net0, two, cfg), InsufficientData);

  auto blow = adam_cfg(1e6, 200);
  try {
    train(net0, curve_dataset(c), blow);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("train: sieve projection keeps parameters in the box") {
  SieveBox box;
  box.slope_cap = {0.3, 0.3};
  box.intercept_cap = {0.3, 0.3};
  box.skip_cap = {0.5, 0.5};
  box.temp_cap = {0.5, 0.5};
  box.width_cap = {3, 3};
  box.out_cap = 0.2;
  box.input_radius = 2.0;
  const auto ms = linspace(0.5, 1.5, 20);
  const IvCurve c = curve_of(ms, [](double m) { return 2.0 * (m - 1.0) * (m - 1.0); });
  auto cfg = adam_cfg(5e-2, 200);
  cfg.sieve_box = box;
  const auto res = train(init_network(std::vector<std::size_t>{3, 3}, 1, 1, 1.0), curve_dataset(c), cfg);
  CHECK(project_sieve(res.net, box) == res.net);

  PriorSpec prior;
  prior.w0 = flatten(res.net);
  prior.c = 0.0;
  cfg.max_epochs = 100;
  IvCurve far = curve_of(std::vector<double>{0.8, 1.0, 1.2}, [](double) { return 3.0; });
  const auto ft = fine_tune(res.net, far.points, cfg, prior);
  CHECK(project_sieve(ft.net, box) == ft.net);
}

TEST_CASE("kl_isotropic: worked values and general-covariance oracle") {
  PriorSpec p;
  p.w0 = {0.0, 0.0};
  const std::vector<double> w0{0.0, 0.0};
  CHECK(kl_isotropic(w0, p) == 0.0);
  const std::vector<double> w{2.0, 0.0};
  CHECK(kl_isotropic(w, p) == doctest::Approx(2.0).epsilon(1e-15));

  std::mt19937_64 gen(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> s(0.2, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 1 + trial % 7;
    PriorSpec q;
    q.sigma_p = s(gen);
    q.tau_q = s(gen);
    Eigen::VectorXd mp(dim), mq(dim);
    std::vector<double> ww(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      q.w0.push_back(n(gen));
      ww[i] = n(gen);
      mp[static_cast<Eigen::Index>(i)] = q.w0[i];
      mq[static_cast<Eigen::Index>(i)] = ww[i];
    }
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    const double ref = kl_general(mq, q.tau_q * q.tau_q * I, mp, q.sigma_p * q.sigma_p * I);
    const double kl = kl_isotropic(ww, q);
    CHECK(kl == doctest::Approx(ref).epsilon(1e-10));
    CHECK(kl >= 0.0);

    // Monotone in the distance to w0.
    std::vector<double> farther = ww;
    for (std::size_t i = 0; i < dim; ++i) farther[i] = q.w0[i] + 1.5 * (ww[i] - q.w0[i]);
    CHECK(kl_isotropic(farther, q) >= kl);
  }
  const std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(kl_isotropic(wrong, p), DomainError);
}

TEST_CASE("stationarity") {
  const std::vector<double> down{5, 4, 3, 2, 1, 0};
  CHECK_FALSE(stationarity(down, 1).has_value());
  const std::vector<double> v{3, 2, 1, 1.5, 2};
  REQUIRE(stationarity(v, 1).has_value());
  CHECK(*stationarity(v, 1) == 2);

  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> noise(-0.5, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> series;
    for (int i = 0; i <= 120; ++i) series.push_back(std::abs(i - 60.0) + noise(gen));
    const std::size_t w = 5;
    const auto idx = stationarity(series, w);
    REQUIRE(idx.has_value());
    CHECK(std::abs(static_cast<double>(*idx) - 60.0) <= static_cast<double>(w));
  }
  CHECK_THROWS_AS(stationarity(v, 0), DomainError);
}

TEST_CASE("fine_tune: already optimal quotes stop immediately") {
  const auto net0 = init_network(std::vector<std::size_t>{3, 3}, 1, 7, 0.5);
  std::vector<IvPoint> pts;
  for (double m : {0.82, 0.97, 0.98}) pts.push_back({m, forward(net0, std::span<const double>(&m, 1))});
  PriorSpec prior;
  prior.w0 = flatten(net0);
  auto cfg = adam_cfg(1e-3, 500);
  const auto res = fine_tune(net0, pts, cfg, prior);
  CHECK(res.trace.stopped_early);
  CHECK(res.trace.stop_epoch <= 1);
  const auto a = flatten(res.net), b = flatten(net0);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(std::sqrt(d) < 1e-6);
}

TEST_CASE("fine_tune: c = 0 runs to max_epochs and fits realizable quotes") {
  const auto teacher = init_network(std::vector<std::size_t>{3, 3}, 1, 11, 0.5);
  const auto net0 = init_network(std::vector<std::size_t>{3, 3}, 1, 12, 0.5);
  std::vector<IvPoint> pts;
  for (double m : {0.8, 0.95, 1.1}) pts.push_back({m, forward(teacher, std::span<const double>(&m, 1))});
  PriorSpec prior;
  prior.w0 = flatten(net0);
  prior.c = 0.0;
  const auto res = fine_tune(net0, pts, adam_cfg(1e-2, 50000), prior);
  CHECK_FALSE(res.trace.stopped_early);
  CHECK(res.trace.epochs.size() == 50000);
  CHECK(res.trace.stop_epoch == 49999);
  CHECK(res.trace.epochs.back().risk < 1e-8);
  CHECK(flatten(res.net) != flatten(net0));
}

TEST_CASE("fine_tune: returned snapshot is the stop epoch, B(t*) <= B(detection)") {
  const auto net0 = init_network(std::vector<std::size_t>{3, 3}, 1, 7, 0.5);
  const std::vector<IvPoint> pts{{0.82, 0.45}, {0.97, 0.40}, {0.98, 0.41}};
  PriorSpec prior;
  prior.w0 = flatten(net0);
  prior.c = 0.05;
  auto cfg = adam_cfg(1e-2, 3000);
  cfg.stop_window = 10;
  const auto res = fine_tune(net0, pts, cfg, prior);
  REQUIRE(res.trace.stopped_early);
  const auto& e = res.trace.epochs;
  const std::size_t t = res.trace.stop_epoch;
  CHECK(e.size() == t + cfg.stop_window + 1);
  CHECK(e[t].objective <= e.back().objective);
  CHECK(parameter_hash(flatten(res.net)) == e[t].hash);
  CHECK(e[t].risk < e.front().risk);
}
