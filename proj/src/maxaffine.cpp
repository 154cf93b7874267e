#include "dlse/maxaffine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dlse/errors.hpp"

namespace dlse {

namespace {

constexpr double kSandwichSlack = 1e-9;
constexpr double kDeltaAgreement = 1e-12;

std::size_t path_count(const DeepLseNet& net) {
  std::size_t n = 1;
  for (const auto& lp : net.layers) {
    if (n > kMaxPaths / lp.width) throw CapacityError("expand_paths: path count exceeds guard of 10^6");
    n *= lp.width;
  }
  return n;
}

std::string describe(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

double surrogate_eval(const DeepLseNet& net, std::span<const double> x) {
  validate(net);
  if (x.size() != net.input_dim) throw DomainError("surrogate_eval: input length does not match network");
  const std::size_t d = net.input_dim;
  double z = 0.0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& lp = net.layers[l];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lp.width; ++k) {
      double s = lp.b[k];
      for (std::size_t j = 0; j < d; ++j) s += lp.a[k * d + j] * x[j];
      if (l > 0) s += net.skip(l, k) * z;
      best = std::max(best, s);
    }
    z = best;
  }
  return z + net.c_out;
}

std::vector<PathAffine> expand_paths(const DeepLseNet& net) {
  validate(net);
  path_count(net);
  const std::size_t d = net.input_dim;

  std::vector<PathAffine> paths;
  const auto& first = net.layers[0];
  for (std::size_t k = 0; k < first.width; ++k) {
    auto row = first.row(k, d);
    paths.push_back({{k}, {row.begin(), row.end()}, first.b[k]});
  }
  for (std::size_t l = 1; l < net.depth(); ++l) {
    const auto& lp = net.layers[l];
    const auto alpha = net.skips(l);
    std::vector<PathAffine> next;
    next.reserve(paths.size() * lp.width);
    for (const auto& p : paths) {
      for (std::size_t k = 0; k < lp.width; ++k) {
        PathAffine q;
        q.path = p.path;
        q.path.push_back(k);
        q.slope.resize(d);
        for (std::size_t j = 0; j < d; ++j) q.slope[j] = alpha[k] * p.slope[j] + lp.slope(k, j, d);
        q.intercept = alpha[k] * p.intercept + lp.b[k];
        next.push_back(std::move(q));
      }
    }
    paths = std::move(next);
  }
  return paths;
}

std::vector<PathAffine> expand_paths_closed_form(const DeepLseNet& net) {
  validate(net);
  const std::size_t total = path_count(net);
  const std::size_t L = net.depth();
  const std::size_t d = net.input_dim;
  std::vector<std::vector<double>> alpha(L);
  for (std::size_t l = 1; l < L; ++l) alpha[l] = net.skips(l);

  std::vector<PathAffine> paths;
  paths.reserve(total);
  std::vector<std::size_t> idx(L, 0);
  for (std::size_t n = 0; n < total; ++n) {
    // Mixed-radix decode with the last layer varying fastest, matching the
    // recursion's ordering.
    std::size_t rem = n;
    for (std::size_t l = L; l-- > 0;) {
      idx[l] = rem % net.layers[l].width;
      rem /= net.layers[l].width;
    }
    PathAffine p;
    p.path = idx;
    p.slope.assign(d, 0.0);
    for (std::size_t j = 0; j < L; ++j) {
      double tail = 1.0;
      for (std::size_t r = j + 1; r < L; ++r) tail *= alpha[r][idx[r]];
      const auto& lp = net.layers[j];
      for (std::size_t i = 0; i < d; ++i) p.slope[i] += tail * lp.slope(idx[j], i, d);
      p.intercept += tail * lp.b[idx[j]];
    }
    paths.push_back(std::move(p));
  }
  return paths;
}

double max_over_paths(std::span<const PathAffine> paths, std::span<const double> x, double c_out) {
  if (paths.empty()) throw DomainError("max_over_paths: no paths");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : paths) {
    if (p.slope.size() != x.size()) throw DomainError("max_over_paths: input length does not match path slopes");
    double v = p.intercept;
    for (std::size_t j = 0; j < x.size(); ++j) v += p.slope[j] * x[j];
    best = std::max(best, v);
  }
  return best + c_out;
}

BoundReport delta_bound(const DeepLseNet& net) {
  validate(net);
  const std::size_t L = net.depth();
  BoundReport rep;
  rep.alpha_max.assign(L, 1.0);
  std::vector<double> gap(L);
  for (std::size_t l = 0; l < L; ++l) {
    gap[l] = net.temperature(l) * std::log(static_cast<double>(net.layers[l].width));
    if (l > 0) {
      const auto a = net.skips(l);
      rep.alpha_max[l] = *std::max_element(a.begin(), a.end());
    }
  }

  rep.delta.resize(L);
  for (std::size_t l = 0; l < L; ++l) rep.delta[l] = gap[l] + (l > 0 ? rep.alpha_max[l] * rep.delta[l - 1] : 0.0);

  rep.delta_closed_form.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= l; ++j) {
      double tail = 1.0;
      for (std::size_t r = j + 1; r <= l; ++r) tail *= rep.alpha_max[r];
      sum += gap[j] * tail;
    }
    rep.delta_closed_form[l] = sum;
  }

  for (std::size_t l = 0; l < L; ++l) {
    const double scale = std::max(1.0, std::abs(rep.delta[l]));
    if (std::abs(rep.delta[l] - rep.delta_closed_form[l]) > kDeltaAgreement * scale)
      throw PropertyFailure("delta_bound: recursion and closed form disagree at layer " + std::to_string(l + 1));
  }
  rep.delta_total = rep.delta.back();

  const double M = *std::max_element(gap.begin(), gap.end());
  double q = 0.0;
  for (std::size_t l = 1; l < L; ++l) q = std::max(q, rep.alpha_max[l]);
  if (q < 1.0) rep.depth_uniform_cap = M / (1.0 - q);
  return rep;
}

SandwichReport check_sandwich(const DeepLseNet& net, std::span<const std::vector<double>> points) {
  if (points.empty()) throw DomainError("check_sandwich: no points");
  SandwichReport rep;
  rep.delta = delta_bound(net).delta_total;
  rep.min_slack = std::numeric_limits<double>::infinity();
  rep.max_slack = -std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    const double y = forward(net, x);
    const double ybar = surrogate_eval(net, x);
    const double slack = y - ybar;
    if (slack < -kSandwichSlack)
      throw PropertyFailure("check_sandwich: surrogate exceeds network at x = " + describe(x));
    if (slack > rep.delta + kSandwichSlack)
      throw PropertyFailure("check_sandwich: network exceeds surrogate + Delta_L at x = " + describe(x));
    rep.min_slack = std::min(rep.min_slack, slack);
    rep.max_slack = std::max(rep.max_slack, slack);
    ++rep.points;
  }
  return rep;
}

}  // namespace dlse
