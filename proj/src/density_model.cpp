// SPDX-License-Identifier: Apache-2.0
#include "enlarge/density_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "enlarge/error.hpp"
#include "enlarge/quadrature.hpp"

namespace enlarge::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
constexpr std::size_t kHermiteForM = 64;

}  // namespace

void ModelParams::validate() const {
  if (mu.empty()) throw InvalidArgument("ModelParams: n must be at least 1");
  if (sigma.size() != mu.size() || rho.size() != mu.size()) {
    throw InvalidArgument("ModelParams: mu, sigma and rho must have the same length");
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw InvalidArgument("ModelParams: sigma must be positive");
    if (!(std::abs(rho[i]) < 1.0)) throw InvalidArgument("ModelParams: |rho| must be below 1");
    if (!std::isfinite(mu[i])) throw InvalidArgument("ModelParams: mu must be finite");
  }
  if (!(t_max > 0.0 && t_max < 1.0)) throw InvalidArgument("ModelParams: need 0 < t_max < 1");
}

LognormalFactorModel::LognormalFactorModel(ModelParams p) : p_(std::move(p)) {
  p_.validate();
  for (std::size_t i = 0; i < p_.n(); ++i) {
    b_.push_back(p_.sigma[i] * p_.rho[i]);
    d_.push_back(p_.sigma[i] * p_.sigma[i] * (1.0 - p_.rho[i] * p_.rho[i]));
  }
}

double LognormalFactorModel::marginal_var(std::size_t i, double t) const {
  return p_.sigma[i] * p_.sigma[i] * (1.0 - p_.rho[i] * p_.rho[i] * t);
}

Posterior LognormalFactorModel::posterior(double t, double w, std::span<const std::size_t> coords,
                                          std::span<const double> logz) const {
  const double c = 1.0 - t;
  double sbb = 0.0, sbr = 0.0, srr = 0.0, logdet = 0.0, jac = 0.0, sprior = 0.0;
  for (std::size_t m = 0; m < coords.size(); ++m) {
    const std::size_t i = coords[m];
    const double r = logz[m] - p_.mu[i] - b_[i] * w;
    sbb += b_[i] * b_[i] / d_[i];
    sbr += b_[i] * r / d_[i];
    srr += r * r / d_[i];
    logdet += std::log(d_[i]);
    jac += logz[m];
    sprior += b_[i] * (logz[m] - p_.mu[i]) / d_[i];
  }
  const double k = 1.0 + c * sbb;
  Posterior post;
  post.var = c / k;
  post.mean = (w + c * sprior) / k;
  const double quad = srr - c * sbr * sbr / k;
  post.log_lik = -0.5 * static_cast<double>(coords.size()) * kLog2Pi - 0.5 * (logdet + std::log(k)) -
                 0.5 * quad - jac;
  return post;
}

double LognormalFactorModel::log_density(double t, double w, std::span<const double> x) const {
  if (x.size() != n()) throw InvalidArgument("density: wrong dimension");
  if (!(t >= 0.0 && t <= p_.t_max)) throw InvalidArgument("density: t outside [0, T_max]");
  std::vector<std::size_t> all(n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> logx(n());
  for (std::size_t i = 0; i < n(); ++i) {
    if (!(x[i] > 0.0)) throw InvalidArgument("density: coordinates must be positive");
    logx[i] = std::log(x[i]);
  }
  return posterior(t, w, all, logx).log_lik;
}

DensityEval LognormalFactorModel::density(double t, double w, std::span<const double> x) const {
  DensityEval ev;
  ev.a = std::exp(log_density(t, w, x));
  std::vector<std::size_t> all(n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> logx(n());
  for (std::size_t i = 0; i < n(); ++i) logx[i] = std::log(x[i]);
  const Posterior post = posterior(t, w, all, logx);
  ev.u = ev.a * (post.mean - w) / (1.0 - t);
  for (std::size_t i = 0; i < n(); ++i) {
    ev.mean.push_back(marginal_mean(i, w));
    ev.variance.push_back(marginal_var(i, t));
  }
  return ev;
}

DensityEval LognormalFactorModel::density_product_form(double t, double w,
                                                       std::span<const double> x) const {
  if (x.size() != n()) throw InvalidArgument("density: wrong dimension");
  DensityEval ev;
  double loga = 0.0, score = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    if (!(x[i] > 0.0)) throw InvalidArgument("density: coordinates must be positive");
    const double m = marginal_mean(i, w), v = marginal_var(i, t), y = std::log(x[i]);
    loga += -0.5 * kLog2Pi - 0.5 * std::log(v) - 0.5 * (y - m) * (y - m) / v - y;
    score += b_[i] * (y - m) / v;
    ev.mean.push_back(m);
    ev.variance.push_back(v);
  }
  ev.a = std::exp(loga);
  ev.u = ev.a * score;
  return ev;
}

double LognormalFactorModel::coord_log_pdf(std::size_t i, double u, double s) const {
  const double z = (u - p_.mu[i] - b_[i] * s);
  return -0.5 * kLog2Pi - 0.5 * std::log(d_[i]) - 0.5 * z * z / d_[i];
}

double LognormalFactorModel::coord_sf(std::size_t i, double u, double s) const {
  return quad::normal_sf((u - p_.mu[i] - b_[i] * s) / std::sqrt(d_[i]));
}

double LognormalFactorModel::coord_log_sf(std::size_t i, double u, double s) const {
  return quad::log_normal_sf((u - p_.mu[i] - b_[i] * s) / std::sqrt(d_[i]));
}

double LognormalFactorModel::survival(std::size_t l, double y, double t, double w) const {
  if (!(y > 0.0)) return 1.0;
  return quad::normal_sf((std::log(y) - marginal_mean(l, w)) / std::sqrt(marginal_var(l, t)));
}

double LognormalFactorModel::m_value(double t, double w) const {
  if (p_.m == MSelector::brownian) return w;
  const auto& gh = quad::gauss_hermite(kHermiteForM);
  const double sd = std::sqrt(1.0 - t);
  double acc = 0.0;
  for (std::size_t q = 0; q < gh.nodes.size(); ++q) acc += gh.weights[q] * std::tanh(w + sd * gh.nodes[q]);
  return acc;
}

double LognormalFactorModel::m_dw(double t, double w) const {
  if (p_.m == MSelector::brownian) return 1.0;
  const auto& gh = quad::gauss_hermite(kHermiteForM);
  const double sd = std::sqrt(1.0 - t);
  double acc = 0.0;
  for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
    const double c = std::cosh(w + sd * gh.nodes[q]);
    acc += gh.weights[q] / (c * c);
  }
  return acc;
}

SimulatedScenario LognormalFactorModel::simulate(std::size_t steps, std::size_t k,
                                                 std::mt19937_64& rng) const {
  if (steps == 0) throw InvalidArgument("simulate: need at least one step");
  std::normal_distribution<double> nd;
  SimulatedScenario sc;
  sc.grid.resize(steps + 1);
  sc.w.resize(steps + 1);
  const double dt = p_.t_max / static_cast<double>(steps);
  const double sdt = std::sqrt(dt);
  for (std::size_t j = 1; j <= steps; ++j) {
    sc.grid[j] = p_.t_max * static_cast<double>(j) / static_cast<double>(steps);
    sc.w[j] = sc.w[j - 1] + sdt * nd(rng);
  }
  sc.w1 = sc.w[steps] + std::sqrt(1.0 - p_.t_max) * nd(rng);
  sc.tau.resize(n());
  std::vector<comb::ExtendedTime> et(n());
  for (std::size_t i = 0; i < n(); ++i) {
    const double eps = nd(rng);
    sc.tau[i] = std::exp(p_.mu[i] + b_[i] * sc.w1 + std::sqrt(d_[i]) * eps);
    et[i] = comb::ExtendedTime(sc.tau[i]);
  }
  sc.sorted = sc.tau;
  std::sort(sc.sorted.begin(), sc.sorted.end());
  sc.label = comb::partition_label(et, k);
  return sc;
}

std::mt19937_64 path_rng(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double symmetrize(const std::function<double(std::span<const double>)>& g,
                  std::span<const double> x) {
  if (x.size() > 6) {
    throw InvalidArgument("symmetrize: n = " + std::to_string(x.size()) +
                          " is too large for explicit enumeration; use the Monte Carlo backend");
  }
  double acc = 0.0;
  for (const auto& pi : comb::enumerate_permutations(x.size())) {
    const auto y = comb::permute<double>(pi, x);
    acc += g(y);
  }
  return acc;
}

namespace {

bool strictly_increasing(std::span<const double> x) {
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i - 1] < x[i])) return false;
  }
  return true;
}

}  // namespace

double a_tilde(const LognormalFactorModel& m, double t, double w, std::span<const double> x) {
  if (!strictly_increasing(x)) return 0.0;
  return symmetrize([&](std::span<const double> y) { return m.density(t, w, y).a; }, x);
}

double a_tilde_rho(const LognormalFactorModel& m, const comb::Injection& rho, double t, double w,
                   std::span<const double> x) {
  if (!strictly_increasing(x)) return 0.0;
  double acc = 0.0;
  for (const auto& pi : comb::fixing_permutations(rho, x.size())) {
    acc += m.density(t, w, comb::permute<double>(pi, x)).a;
  }
  return acc;
}

AAAReport check_aAA(const LognormalFactorModel& m, std::size_t n_paths, std::size_t steps,
                    std::uint64_t seed, Exec exec) {
  std::vector<double> val(n_paths);
  std::vector<std::size_t> all(m.n());
  std::iota(all.begin(), all.end(), std::size_t{0});
  parallel_for(exec, n_paths, [&](std::size_t p) {
    auto rng = path_rng(seed, p);
    const SimulatedScenario sc = m.simulate(steps, 1, rng);
    std::vector<double> logt(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) logt[i] = std::log(sc.tau[i]);
    double acc = 0.0;
    for (std::size_t j = 0; j < steps; ++j) {
      const double v = sc.grid[j], w = sc.w[j], dv = sc.grid[j + 1] - v;
      const Posterior post = m.posterior(v, w, all, logt);
      const double ratio = std::abs(post.mean - w) / (1.0 - v);  // |u^W| / a
      const double hw = m.m_dw(v, w);
      acc += ratio * std::abs(hw) * dv;  // |u^M| / a d<M,M> with u^M = u^W / h_w
    }
    val[p] = acc;
  });
  AAAReport rep;
  rep.paths = n_paths;
  double mean = 0.0, sq = 0.0;
  for (double v : val) mean += v;
  mean /= static_cast<double>(n_paths);
  for (double v : val) sq += (v - mean) * (v - mean);
  rep.estimate = mean;
  rep.stderr_ = n_paths > 1 ? std::sqrt(sq / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths)) : 0.0;
  rep.finite = std::isfinite(mean) && (mean == 0.0 || rep.stderr_ <= 0.1 * mean);
  return rep;
}

}  // namespace enlarge::model
