// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "enlarge/error.hpp"
#include "enlarge/marginal_integrator.hpp"
#include "enlarge/quadrature.hpp"

using namespace enlarge;
using marginal::Integrand;
using marginal::MarginalQuery;
using model::LognormalFactorModel;

namespace {

model::ModelParams default_params() { return {{-0.5, -0.3}, {0.4, 0.4}, {0.5, 0.5}, 0.9}; }
model::ModelParams params3() { return {{-0.4, -0.1, 0.2}, {0.5, 0.3, 0.6}, {0.6, -0.3, 0.8}, 0.9}; }

MarginalQuery query(double t, double w, Integrand g) {
  MarginalQuery q;
  q.t = t;
  q.w = w;
  q.integrand = g;
  return q;
}

}  // namespace

TEST(Survival, Examples) {
  LognormalFactorModel m(default_params());
  EXPECT_NEAR(marginal::survival(m, 0, 1e-300, 0.3, 0.2), 1.0, 1e-15);
  const double med = std::exp(m.marginal_mean(1, 0.2));
  EXPECT_NEAR(marginal::survival(m, 1, med, 0.3, 0.2), 0.5, 1e-15);
}

TEST(Survival, MatchesTailQuadratureAndDecreases) {
  LognormalFactorModel m(default_params());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uy(0.05, 3.0), ut(0.0, 0.9), uw(-1.5, 1.5);
  for (int it = 0; it < 50; ++it) {
    const double y = uy(rng), t = ut(rng), w = uw(rng);
    const double mu = m.marginal_mean(0, w), s = std::sqrt(m.marginal_var(0, t));
    // Tail integral of the lognormal pdf over (y, inf), substituting x = exp(mu + s z).
    const double tail = quad::gauss_kronrod(quad::normal_pdf, (std::log(y) - mu) / s, 40.0, 1e-16, 1e-13).value;
    EXPECT_NEAR(marginal::survival(m, 0, y, t, w), tail, 1e-8);
    EXPECT_GE(marginal::survival(m, 0, y, t, w), marginal::survival(m, 0, y * 1.01, t, w));
  }
}

TEST(Marginalize, NothingToIntegrateReturnsIntegrand) {
  LognormalFactorModel m(params3());
  auto q = query(0.4, 0.3, Integrand::a);
  q.fixed = {2, 0, 1};
  q.z = {1.1, 0.5, 0.8};
  const std::vector<double> x{0.5, 0.8, 1.1};
  EXPECT_NEAR(marginal::marginalize(m, q).value, m.density(0.4, 0.3, x).a, 1e-12);
  q.integrand = Integrand::u;
  EXPECT_NEAR(marginal::marginalize(m, q).value, m.density(0.4, 0.3, x).u, 1e-11);
}

TEST(Marginalize, FullIntegralOfAIsOne) {
  LognormalFactorModel m(params3());
  for (double t : {0.0, 0.5, 0.9}) {
    const auto r = marginal::marginalize(m, query(t, 0.7, Integrand::a));
    EXPECT_NEAR(r.value, 1.0, 1e-12);
    EXPECT_NEAR(marginal::marginalize(m, query(t, 0.7, Integrand::u)).value, 0.0, 1e-12);
  }
}

TEST(Marginalize, OneFixedCoordinateGivesTheMarginalDensity) {
  LognormalFactorModel m(params3());
  auto q = query(0.3, -0.4, Integrand::a);
  q.fixed = {1};
  q.z = {0.9};
  const double mu = m.marginal_mean(1, -0.4), s = std::sqrt(m.marginal_var(1, 0.3));
  const double ref = quad::normal_pdf((std::log(0.9) - mu) / s) / (s * 0.9);
  EXPECT_NEAR(marginal::marginalize(m, q).value, ref, 1e-12);
}

TEST(Marginalize, ZetaWithMisorderedFixedValuesIsZero) {
  LognormalFactorModel m(params3());
  auto q = query(0.3, 0.0, Integrand::zeta_a);
  q.rho = {2, 0};
  q.fixed = {2, 0};
  q.z = {0.9, 0.4};
  EXPECT_EQ(marginal::marginalize(m, q).value, 0.0);
  q.fixed = {0, 2};
  EXPECT_THROW(marginal::marginalize(m, q), InvalidArgument);
}

TEST(Marginalize, RejectsBadQueries) {
  LognormalFactorModel m(params3());
  auto q = query(0.3, 0.0, Integrand::a);
  q.fixed = {0};
  q.z = {-1.0};
  EXPECT_THROW(marginal::marginalize(m, q), InvalidArgument);
  q.z = {1.0, 2.0};
  EXPECT_THROW(marginal::marginalize(m, q), InvalidArgument);
  q = query(0.95, 0.0, Integrand::a);
  EXPECT_THROW(marginal::marginalize(m, q), InvalidArgument);
}

// n=2, k=1, rho=(0), j=0: P(v <= tau_0 < tau_1 | W_v = w) against 2-d Monte Carlo.
TEST(Marginalize, OrderedRegionMassMatchesMonteCarlo) {
  const auto p = default_params();
  LognormalFactorModel m(p);
  const double v = 0.3, w = 0.25;
  auto q = query(v, w, Integrand::zeta_a);
  q.rho = {0};
  q.threshold = v;
  const auto r = marginal::marginalize(m, q);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  const std::size_t n = 16'000'000;
  double hits = 0;
  const double b0 = p.sigma[0] * p.rho[0], b1 = p.sigma[1] * p.rho[1];
  const double e0 = p.sigma[0] * std::sqrt(1 - p.rho[0] * p.rho[0]), e1 = p.sigma[1] * std::sqrt(1 - p.rho[1] * p.rho[1]);
  for (std::size_t i = 0; i < n; ++i) {
    const double w1 = w + std::sqrt(1 - v) * nd(rng);
    const double t0 = std::exp(p.mu[0] + b0 * w1 + e0 * nd(rng));
    const double t1 = std::exp(p.mu[1] + b1 * w1 + e1 * nd(rng));
    hits += (v <= t0 && t0 < t1);
  }
  const double est = hits / static_cast<double>(n);
  EXPECT_LE(std::abs(r.value - est), 1e-3 * est) << r.value << " vs " << est;
  EXPECT_LE(r.error, 1e-9);
}

TEST(Marginalize, ThresholdShrinksRegions) {
  LognormalFactorModel m(params3());
  double prev = 2.0;
  for (double v : {0.05, 0.2, 0.4, 0.6, 0.8}) {
    auto q = query(0.05, 0.1, Integrand::zeta_a);
    q.rho = {1, 2};
    q.threshold = v;
    const auto r = marginal::marginalize(m, q);
    EXPECT_LE(r.value, prev + r.error);
    prev = r.value;
    auto qa = query(0.05, 0.1, Integrand::a);
    qa.threshold = v;
    qa.above = {0, 2};
    EXPECT_LE(marginal::marginalize(m, qa).value, 1.0);
  }
}

TEST(Marginalize, ZetaPartsOverAllInjectionsSumToOne) {
  LognormalFactorModel m(params3());
  for (std::size_t k = 1; k <= 3; ++k) {
    double acc = 0;
    for (const auto& rho : comb::enumerate_injections(k, 3)) {
      auto q = query(0.5, -0.2, Integrand::zeta_a);
      q.rho = rho;
      acc += marginal::marginalize(m, q).value;
    }
    EXPECT_NEAR(acc, 1.0, 1e-9) << "k=" << k;
  }
}

TEST(Marginalize, ZetaUIsTheWDerivativeOfZetaA) {
  LognormalFactorModel m(params3());
  auto q = query(0.4, 0.2, Integrand::zeta_a);
  q.rho = {2, 0};
  q.fixed = {2};
  q.z = {0.7};
  q.threshold = 0.8;
  const double h = 1e-4;
  auto at = [&](double w) {
    auto c = q;
    c.w = w;
    return marginal::marginalize(m, c).value;
  };
  auto qu = q;
  qu.integrand = Integrand::zeta_u;
  const double u = marginal::marginalize(m, qu).value;
  EXPECT_NEAR(u, (at(0.2 + h) - at(0.2 - h)) / (2 * h), 1e-7 * (1 + std::abs(u)));
}

TEST(Marginalize, QuadratureAndMonteCarloBackendsAgree) {
  LognormalFactorModel m(params3());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uz(0.3, 1.2);
  marginal::QuadratureConfig mc;
  mc.backend = marginal::Backend::monte_carlo;
  mc.mc_samples = 400000;
  for (int it = 0; it < 6; ++it) {
    const auto injections = comb::enumerate_injections(2, 3);
    const auto& rho = injections[static_cast<std::size_t>(it)];
    auto q = query(0.3, 0.4, it % 2 ? Integrand::zeta_u : Integrand::zeta_a);
    q.rho = rho;
    q.threshold = 0.5;
    if (it >= 3) {
      q.fixed = {rho[0]};
      q.z = {uz(rng)};
    }
    const auto a = marginal::marginalize(m, q);
    const auto b = marginal::marginalize(m, q, mc);
    EXPECT_EQ(b.used, marginal::Backend::monte_carlo);
    const double scale = it % 2 ? 3.0 : 1.0;  // u samples carry (s - w) / (1 - t)
    EXPECT_LE(std::abs(a.value - b.value), 4 * scale * b.error + a.error + 1e-12) << it;
  }
  auto q = query(0.3, 0.4, Integrand::a);
  q.box = marginal::Box{{0.2, 0.4, 0.1}, {1.0, 2.0, 1.5}};
  const auto a = marginal::marginalize(m, q);
  const auto b = marginal::marginalize(m, q, mc);
  EXPECT_LE(std::abs(a.value - b.value), 4 * b.error);
}

TEST(Marginalize, LongBlocksFallBackToMonteCarlo) {
  const auto p = params3();
  LognormalFactorModel m(p);
  auto q = query(0.3, 0.4, Integrand::zeta_a);
  q.rho = {2, 0, 1};
  marginal::QuadratureConfig cfg;
  cfg.mc_samples = 200000;
  const auto r = marginal::marginalize(m, q, cfg);
  EXPECT_EQ(r.used, marginal::Backend::monte_carlo);
  // Independent sampler of the ordering tau_2 < tau_0 < tau_1 given W_t.
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> nd;
  const std::size_t n = 200000;
  double hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w1 = 0.4 + std::sqrt(0.7) * nd(rng);
    double tau[3];
    for (std::size_t c = 0; c < 3; ++c) {
      tau[c] = p.mu[c] + p.sigma[c] * (p.rho[c] * w1 + std::sqrt(1 - p.rho[c] * p.rho[c]) * nd(rng));
    }
    hits += tau[2] < tau[0] && tau[0] < tau[1];
  }
  const double est = hits / n;
  EXPECT_LE(std::abs(r.value - est), 4 * std::hypot(r.error, std::sqrt(est * (1 - est) / n)));
}

// The a_tilde selectors use a closed reduction; check it against literal quadrature
// of the symmetrized density over the ordered region.
TEST(Marginalize, ATildeReductionMatchesLiteralIntegral) {
  LognormalFactorModel m(default_params());
  const double t = 0.35, w = 0.1, v = 0.45;
  auto literal = [&](auto&& f) {
    // {v <= x0 < x1} in log coordinates.
    return quad::gauss_kronrod(
               [&](double y0) {
                 return quad::gauss_kronrod(
                            [&](double y1) {
                              const std::vector<double> x{std::exp(y0), std::exp(y1)};
                              return f(x) * x[0] * x[1];
                            },
                            y0, 5.0, 1e-14, 1e-11)
                     .value;
               },
               std::log(v), 5.0, 1e-14, 1e-11)
        .value;
  };
  for (comb::Injection rho : {comb::Injection{0}, comb::Injection{1}}) {
    auto q = query(t, w, Integrand::a_tilde_rho);
    q.rho = rho;
    q.threshold = v;
    const double lit = literal([&](const std::vector<double>& x) { return model::a_tilde_rho(m, rho, t, w, x); });
    EXPECT_NEAR(marginal::marginalize(m, q).value, lit, 1e-9);
  }
  auto q = query(t, w, Integrand::a_tilde);
  q.threshold = v;
  const double lit = literal([&](const std::vector<double>& x) { return model::a_tilde(m, t, w, x); });
  EXPECT_NEAR(marginal::marginalize(m, q).value, lit, 1e-9);

  // One pinned sorted coordinate z: integrate x1 over (max(v, z), inf).
  const double z = 0.6;
  for (comb::Injection rho : {comb::Injection{0}, comb::Injection{1}}) {
    auto qz = query(t, w, Integrand::a_tilde_rho);
    qz.rho = rho;
    qz.fixed = {0};
    qz.z = {z};
    qz.threshold = v;
    const double one = quad::gauss_kronrod(
                           [&](double y1) {
                             const std::vector<double> x{z, std::exp(y1)};
                             return model::a_tilde_rho(m, rho, t, w, x) * x[1];
                           },
                           std::log(z), 5.0, 1e-14, 1e-11)
                           .value;
    EXPECT_NEAR(marginal::marginalize(m, qz).value, one, 1e-9);
  }
}

TEST(RhoRegion, MonteCarloWithoutLoadingsHasNoFactorNoise) {
  LognormalFactorModel m({{-0.4, -0.1, 0.2}, {0.5, 0.3, 0.6}, {0.0, 0.0, 0.0}, 0.9});
  marginal::QuadratureConfig cfg;
  cfg.backend = marginal::Backend::monte_carlo;
  cfg.mc_samples = 20000;
  const auto r = marginal::rho_region(m, {2, 0, 1}, 0, {}, 0.3, 0.5, 0.7, cfg);
  EXPECT_EQ(r.used, marginal::Backend::monte_carlo);
  EXPECT_GT(r.w_value, 0.0);
  EXPECT_EQ(r.u_value, 0.0);
}
