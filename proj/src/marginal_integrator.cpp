// SPDX-License-Identifier: Apache-2.0
#include "enlarge/marginal_integrator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "enlarge/error.hpp"
#include "enlarge/quadrature.hpp"

namespace enlarge::marginal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSdSpan = 12.0;  // integrate Gaussians over mean +- 12 sd

struct Expect {
  double g0 = 0.0;  ///< E[G(s)]
  double g1 = 0.0;  ///< E[G(s) (s - mean)]
  double err = 0.0;
};

/// Gauss-Hermite at two orders; falls back to adaptive Gauss-Kronrod when they disagree.
Expect post_expect(double mean, double var, const std::function<double(double)>& g,
                   const QuadratureConfig& cfg) {
  const double sd = std::sqrt(var);
  auto gh_pass = [&](std::size_t order) {
    const auto& gh = quad::gauss_hermite(order);
    Expect e;
    for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
      const double x = gh.nodes[q];
      const double v = g(mean + sd * x);
      e.g0 += gh.weights[q] * v;
      e.g1 += gh.weights[q] * v * sd * x;
    }
    return e;
  };
  Expect hi = gh_pass(64);
  const Expect lo = gh_pass(40);
  const double diff = std::max(std::abs(hi.g0 - lo.g0), std::abs(hi.g1 - lo.g1));
  if (diff <= std::max(cfg.abs_tol, 1e-9 * std::abs(hi.g0))) {
    hi.err = diff;
    return hi;
  }
  const auto r0 = quad::gauss_kronrod(
      [&](double x) { return quad::normal_pdf(x) * g(mean + sd * x); }, -kSdSpan, kSdSpan,
      cfg.abs_tol, cfg.rel_tol, cfg.max_depth);
  const auto r1 = quad::gauss_kronrod(
      [&](double x) { return quad::normal_pdf(x) * g(mean + sd * x) * sd * x; }, -kSdSpan, kSdSpan,
      cfg.abs_tol, cfg.rel_tol, cfg.max_depth);
  return {r0.value, r1.value, std::max(r0.error, r1.error)};
}

double block_rec(const model::LognormalFactorModel& m, std::span<const std::size_t> block,
                 std::span<const std::size_t> rest, double lo, double s, const QuadratureConfig& cfg,
                 double& err) {
  if (block.empty()) {
    double acc = 0.0;
    if (lo == -kInf) return 1.0;
    for (std::size_t l : rest) acc += m.coord_log_sf(l, lo, s);
    return std::exp(acc);
  }
  const std::size_t i = block.front();
  const double mean = m.params().mu[i] + m.loading(i) * s;
  const double sd = std::sqrt(m.idio_var(i));
  const double xl = lo == -kInf ? -kSdSpan : (lo - mean) / sd;
  if (block.size() == 1 && rest.empty()) return lo == -kInf ? 1.0 : quad::normal_sf(xl);
  const double a0 = std::max(xl, -kSdSpan);
  double inner_err = 0.0;
  const auto r = quad::gauss_kronrod(
      [&](double x) {
        return quad::normal_pdf(x) * block_rec(m, block.subspan(1), rest, mean + sd * x, s, cfg, inner_err);
      },
      a0, a0 + 2.0 * kSdSpan, cfg.abs_tol, cfg.rel_tol, cfg.max_depth);
  err += r.error + inner_err;
  return r.value;
}

void check_query_coords(const model::LognormalFactorModel& m, const MarginalQuery& q) {
  const std::size_t n = m.n();
  if (q.fixed.size() != q.z.size()) throw InvalidArgument("marginalize: fixed and z differ in length");
  if (q.fixed.size() > n) throw InvalidArgument("marginalize: too many fixed coordinates");
  std::vector<char> seen(n, 0);
  for (std::size_t c : q.fixed) {
    if (c >= n || seen[c]) throw InvalidArgument("marginalize: fixed coordinates must be distinct and < n");
    seen[c] = 1;
  }
  for (double v : q.z) {
    if (!(v > 0.0)) throw InvalidArgument("marginalize: z must be strictly positive");
  }
  if (!(q.t >= 0.0 && q.t <= m.params().t_max)) throw InvalidArgument("marginalize: t outside [0, T_max]");
}

bool increasing(std::span<const double> z) {
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (!(z[i - 1] < z[i])) return false;
  }
  return true;
}

std::vector<double> logs(std::span<const double> z) {
  std::vector<double> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [](double x) { return std::log(x); });
  return out;
}

/// Plain marginal of a or u with per-coordinate constraints.
MarginalResult plain(const model::LognormalFactorModel& m, const MarginalQuery& q,
                     const QuadratureConfig& cfg, bool mc) {
  const std::size_t n = m.n();
  std::vector<double> lo(n, 0.0), hi(n, kInf);
  if (q.box) {
    if (q.box->lo.size() != n || q.box->hi.size() != n) throw InvalidArgument("marginalize: box dimension");
    lo = q.box->lo;
    hi = q.box->hi;
  }
  std::vector<char> is_fixed(n, 0);
  for (std::size_t c : q.fixed) is_fixed[c] = 1;
  if (q.threshold) {
    for (std::size_t c : q.above) {
      if (c >= n) throw InvalidArgument("marginalize: threshold coordinate out of range");
      lo[c] = std::max(lo[c], *q.threshold);
    }
  }
  for (std::size_t mIdx = 0; mIdx < q.fixed.size(); ++mIdx) {
    const std::size_t c = q.fixed[mIdx];
    const bool above_ok = !(q.threshold && std::find(q.above.begin(), q.above.end(), c) != q.above.end()) ||
                          q.z[mIdx] > *q.threshold;
    const bool box_ok = !q.box || (q.z[mIdx] > q.box->lo[c] && q.z[mIdx] <= q.box->hi[c]);
    if (!above_ok || !box_ok) return {0.0, 0.0, mc ? Backend::monte_carlo : Backend::quadrature};
  }
  std::vector<std::size_t> free;
  for (std::size_t c = 0; c < n; ++c) {
    if (!is_fixed[c]) free.push_back(c);
  }
  const auto logz = logs(q.z);
  const model::Posterior post = m.posterior(q.t, q.w, q.fixed, logz);
  const double scale = std::exp(post.log_lik);
  const bool want_u = q.integrand == Integrand::u;

  if (mc) {
    auto rng = model::path_rng(cfg.mc_seed, 0);
    std::normal_distribution<double> nd;
    double s0 = 0.0, s1 = 0.0, sq = 0.0;
    for (std::size_t it = 0; it < cfg.mc_samples; ++it) {
      const double s = post.mean + std::sqrt(post.var) * nd(rng);
      bool in = true;
      for (std::size_t c : free) {
        const double x = std::exp(m.params().mu[c] + m.loading(c) * s + std::sqrt(m.idio_var(c)) * nd(rng));
        in = in && x > lo[c] && x <= hi[c];
      }
      const double val = in ? (want_u ? (s - q.w) / (1.0 - q.t) : 1.0) : 0.0;
      s0 += val;
      sq += val * val;
      s1 += in ? 1.0 : 0.0;
    }
    const double ns = static_cast<double>(cfg.mc_samples);
    const double mean = s0 / ns;
    const double se = std::sqrt(std::max(sq / ns - mean * mean, 0.0) / ns);
    return {scale * mean, scale * se, Backend::monte_carlo};
  }

  auto g = [&](double s) {
    double p = 1.0;
    for (std::size_t c : free) {
      const double ul = lo[c] > 0.0 ? m.coord_sf(c, std::log(lo[c]), s) : 1.0;
      const double uh = hi[c] < kInf ? m.coord_sf(c, std::log(hi[c]), s) : 0.0;
      p *= std::max(ul - uh, 0.0);
    }
    return p;
  };
  const Expect e = post_expect(post.mean, post.var, g, cfg);
  if (!want_u) return {scale * e.g0, scale * e.err, Backend::quadrature};
  const double u = scale * (e.g1 + (post.mean - q.w) * e.g0) / (1.0 - q.t);
  const double uerr = scale * e.err * (1.0 + std::abs(post.mean - q.w)) / (1.0 - q.t);
  return {u, uerr, Backend::quadrature};
}

/// Literal Monte Carlo of 1_{D_rho} a (or u) with rho(0..j-1) pinned.
RegionIntegrals rho_region_mc(const model::LognormalFactorModel& m, const comb::Injection& rho,
                              std::span<const double> z, double lower, double t, double w,
                              const QuadratureConfig& cfg) {
  const std::size_t n = m.n(), j = z.size();
  std::vector<std::size_t> pinned(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(j));
  const auto logz = logs(z);
  const model::Posterior post = m.posterior(t, w, pinned, logz);
  std::vector<char> is_pinned(n, 0);
  for (std::size_t c : pinned) is_pinned[c] = 1;
  auto rng = model::path_rng(cfg.mc_seed, 1);
  std::normal_distribution<double> nd;
  std::vector<comb::ExtendedTime> x(n);
  for (std::size_t i = 0; i < j; ++i) x[rho[i]] = comb::ExtendedTime(z[i]);
  // With no loading on a free coordinate the region does not depend on s and
  // E[1_region (s - mean)] = 0 exactly, so only the probability is sampled.
  bool factor_free = true;
  for (std::size_t c = 0; c < n; ++c) {
    if (!is_pinned[c] && m.loading(c) != 0.0) factor_free = false;
  }
  double s0 = 0.0, s1 = 0.0, sq = 0.0;
  const std::size_t k = rho.size();
  for (std::size_t it = 0; it < cfg.mc_samples; ++it) {
    const double s = post.mean + std::sqrt(post.var) * nd(rng);
    for (std::size_t c = 0; c < n; ++c) {
      if (!is_pinned[c]) {
        x[c] = comb::ExtendedTime(std::exp(m.params().mu[c] + m.loading(c) * s + std::sqrt(m.idio_var(c)) * nd(rng)));
      }
    }
    bool in = comb::partition_label(x, k) == rho;
    if (in && j < k) in = x[rho[j]].value() >= lower;
    if (in) {
      s0 += 1.0;
      s1 += ((factor_free ? post.mean : s) - w) / (1.0 - t);
      sq += 1.0;
    }
  }
  const double ns = static_cast<double>(cfg.mc_samples);
  RegionIntegrals r;
  r.log_lik = post.log_lik;
  r.w_core = s0 / ns;
  r.u_core = s1 / ns;
  const double scale = std::exp(post.log_lik);
  r.w_value = scale * r.w_core;
  r.u_value = scale * r.u_core;
  r.error = scale * std::sqrt(std::max(sq / ns - r.w_core * r.w_core, 0.0) / ns);
  r.used = Backend::monte_carlo;
  return r;
}

}  // namespace

double block_probability(const model::LognormalFactorModel& m, std::span<const std::size_t> block,
                         std::span<const std::size_t> rest, double log_lower, double s,
                         const QuadratureConfig& cfg, double* error) {
  double err = 0.0;
  const double v = block_rec(m, block, rest, log_lower, s, cfg, err);
  if (error) *error = err;
  return v;
}

RegionIntegrals rho_region(const model::LognormalFactorModel& m, const comb::Injection& rho,
                           std::size_t j, std::span<const double> z, double lower, double t,
                           double w, const QuadratureConfig& cfg) {
  const std::size_t n = m.n(), k = rho.size();
  if (j > k || z.size() != j) throw InvalidArgument("rho_region: need |z| = j <= k");
  RegionIntegrals r;
  if (!increasing(z)) return r;
  for (double v : z) {
    if (!(v > 0.0)) throw InvalidArgument("rho_region: z must be strictly positive");
  }
  const std::size_t block_len = k - j;
  const bool mc = cfg.backend == Backend::monte_carlo ||
                  (cfg.backend == Backend::automatic && block_len > cfg.max_nested);
  if (mc) return rho_region_mc(m, rho, z, lower, t, w, cfg);

  std::vector<std::size_t> pinned(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(j));
  std::vector<std::size_t> block(rho.begin() + static_cast<std::ptrdiff_t>(j), rho.end());
  std::vector<char> in_rho(n, 0);
  for (std::size_t c : rho) in_rho[c] = 1;
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < n; ++c) {
    if (!in_rho[c]) rest.push_back(c);
  }
  const auto logz = logs(z);
  double log_lo = j > 0 ? logz.back() : -kInf;
  if (j < k && lower > 0.0) log_lo = std::max(log_lo, std::log(lower));

  const model::Posterior post = m.posterior(t, w, pinned, logz);
  r.log_lik = post.log_lik;
  const double scale = std::exp(post.log_lik);
  r.used = Backend::quadrature;
  if (block.empty() && rest.size() <= 1) {
    // E[S_l(lo | s)] and E[(s - mean) S_l(lo | s)] in closed form (Stein's identity).
    double g0 = 1.0, g1 = 0.0;
    if (rest.size() == 1 && log_lo > -kInf) {
      const std::size_t l = rest.front();
      const double sd = std::sqrt(m.idio_var(l) + m.loading(l) * m.loading(l) * post.var);
      const double zeta = (log_lo - m.params().mu[l] - m.loading(l) * post.mean) / sd;
      g0 = quad::normal_sf(zeta);
      g1 = post.var * m.loading(l) * quad::normal_pdf(zeta) / sd;
    }
    r.w_core = g0;
    r.u_core = (g1 + (post.mean - w) * g0) / (1.0 - t);
    r.w_value = scale * r.w_core;
    r.u_value = scale * r.u_core;
    return r;
  }
  double inner = 0.0;
  const Expect e = post_expect(
      post.mean, post.var,
      [&](double s) {
        double err = 0.0;
        const double v = block_rec(m, block, rest, log_lo, s, cfg, err);
        inner = std::max(inner, err);
        return v;
      },
      cfg);
  r.w_core = e.g0;
  r.u_core = (e.g1 + (post.mean - w) * e.g0) / (1.0 - t);
  r.w_value = scale * r.w_core;
  r.u_value = scale * r.u_core;
  r.error = scale * (e.err + inner);
  return r;
}

MarginalResult marginalize(const model::LognormalFactorModel& m, const MarginalQuery& q,
                           const QuadratureConfig& cfg) {
  check_query_coords(m, q);
  if (!(cfg.abs_tol > 0.0 && cfg.rel_tol > 0.0)) throw InvalidArgument("marginalize: tolerances must be positive");
  const std::size_t n = m.n();
  const double lower = q.threshold.value_or(0.0);

  switch (q.integrand) {
    case Integrand::a:
    case Integrand::u:
      return plain(m, q, cfg, cfg.backend == Backend::monte_carlo);

    case Integrand::zeta_a:
    case Integrand::zeta_u:
    case Integrand::a_tilde_rho: {
      const std::size_t j = q.fixed.size(), k = q.rho.size();
      if (k == 0 || k > n) throw InvalidArgument("marginalize: rho must be an injection into 0..n-1");
      if (j > k) throw InvalidArgument("marginalize: more fixed coordinates than |rho|");
      for (std::size_t i = 0; i < j; ++i) {
        const std::size_t want = q.integrand == Integrand::a_tilde_rho ? i : q.rho[i];
        if (q.fixed[i] != want) {
          throw InvalidArgument(q.integrand == Integrand::a_tilde_rho
                                    ? "marginalize: a_tilde_rho fixes sorted positions 0..j-1"
                                    : "marginalize: zeta integrands fix rho(0..j-1) in order");
        }
      }
      const RegionIntegrals r = rho_region(m, q.rho, j, q.z, lower, q.t, q.w, cfg);
      const double v = q.integrand == Integrand::zeta_u ? r.u_value : r.w_value;
      return {v, r.error, r.used};
    }

    case Integrand::a_tilde: {
      const std::size_t j = q.fixed.size();
      for (std::size_t i = 0; i < j; ++i) {
        if (q.fixed[i] != i) throw InvalidArgument("marginalize: a_tilde fixes sorted positions 0..j-1");
      }
      if (!increasing(q.z)) return {0.0, 0.0, Backend::quadrature};
      std::vector<double> lo(n, 0.0), hi(n, kInf);
      if (q.box) {
        if (q.box->lo.size() != n || q.box->hi.size() != n) throw InvalidArgument("marginalize: box dimension");
        lo = q.box->lo;
        hi = q.box->hi;
      }
      const auto logz = logs(q.z);
      double bottom = j > 0 ? q.z.back() : 0.0;
      bottom = std::max(bottom, lower);
      const std::vector<comb::Injection> sigmas =
          j == 0 ? std::vector<comb::Injection>{comb::Injection{}} : comb::enumerate_injections(j, n);
      MarginalResult out;
      out.used = cfg.backend == Backend::monte_carlo ? Backend::monte_carlo : Backend::quadrature;
      for (const auto& sigma : sigmas) {
        // Density coordinate sigma(i) carries the i-th pinned sorted value.
        bool in_box = true;
        for (std::size_t i = 0; i < j; ++i) in_box = in_box && q.z[i] > lo[sigma[i]] && q.z[i] <= hi[sigma[i]];
        if (!in_box) continue;
        std::vector<char> pinned(n, 0);
        for (std::size_t c : sigma) pinned[c] = 1;
        std::vector<std::size_t> rest;
        for (std::size_t c = 0; c < n; ++c) {
          if (!pinned[c]) rest.push_back(c);
        }
        const model::Posterior post = m.posterior(q.t, q.w, sigma, logz);
        const double scale = std::exp(post.log_lik);
        if (out.used == Backend::monte_carlo) {
          auto rng = model::path_rng(cfg.mc_seed, 2);
          std::normal_distribution<double> nd;
          double hit = 0.0;
          for (std::size_t it = 0; it < cfg.mc_samples; ++it) {
            const double s = post.mean + std::sqrt(post.var) * nd(rng);
            bool in = true;
            for (std::size_t c : rest) {
              const double x = std::exp(m.params().mu[c] + m.loading(c) * s + std::sqrt(m.idio_var(c)) * nd(rng));
              in = in && x > std::max(lo[c], bottom) && x <= hi[c];
            }
            hit += in ? 1.0 : 0.0;
          }
          const double p = hit / static_cast<double>(cfg.mc_samples);
          out.value += scale * p;
          out.error += scale * std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.mc_samples));
        } else {
          const Expect e = post_expect(
              post.mean, post.var,
              [&](double s) {
                double p = 1.0;
                for (std::size_t c : rest) {
                  const double a = std::max(lo[c], bottom);
                  const double ul = a > 0.0 ? m.coord_sf(c, std::log(a), s) : 1.0;
                  const double uh = hi[c] < kInf ? m.coord_sf(c, std::log(hi[c]), s) : 0.0;
                  p *= std::max(ul - uh, 0.0);
                }
                return p;
              },
              cfg);
          out.value += scale * e.g0;
          out.error += scale * e.err;
        }
      }
      return out;
    }
  }
  throw InvalidArgument("marginalize: unknown integrand");
}

double survival(const model::LognormalFactorModel& m, std::size_t l, double y, double t, double w) {
  if (l >= m.n()) throw InvalidArgument("survival: coordinate out of range");
  return m.survival(l, y, t, w);
}

}  // namespace enlarge::marginal
