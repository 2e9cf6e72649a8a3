// SPDX-License-Identifier: Apache-2.0
//
// Order-constrained marginals of the lognormal factor model. Every integrand
// is written as L(z) E[G(s)] where L is the joint density of the fixed
// coordinates, s is the factor given F_t and the fixed coordinates (Gaussian),
// and G(s) is the conditional probability of the region for the free
// coordinates, which are independent given s.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "enlarge/combinatorics.hpp"
#include "enlarge/density_model.hpp"

namespace enlarge::marginal {

enum class Integrand {
  a,            ///< a_t
  u,            ///< u^W_t = d a_t / dw
  zeta_a,       ///< 1_{D_rho} a_t
  zeta_u,       ///< 1_{D_rho} u^W_t
  a_tilde,      ///< sorted-vector density
  a_tilde_rho,  ///< rho-part of the sorted-vector density
};

enum class Backend { automatic, quadrature, monte_carlo };

/// Half-open box lo < x <= hi per coordinate (x-space).
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct MarginalQuery {
  double t = 0.0;
  double w = 0.0;
  /// For a, u, zeta_*: density coordinates. For a_tilde*: positions 0..j-1 of the sorted vector.
  std::vector<std::size_t> fixed;
  std::vector<double> z;
  Integrand integrand = Integrand::a;
  comb::Injection rho;  ///< zeta_*, a_tilde_rho; fixed must equal rho(0..j-1) for zeta_*
  /// a, u: the free coordinates in `above` must exceed v. zeta_*, a_tilde*: the
  /// first free coordinate of the ordered block must be at least v.
  std::optional<double> threshold;
  std::vector<std::size_t> above;
  std::optional<Box> box;  ///< a, u, a_tilde (the sorted-vector version applies g to every ordering)
};

struct QuadratureConfig {
  Backend backend = Backend::automatic;
  double abs_tol = 1e-13;
  double rel_tol = 1e-10;
  unsigned max_depth = 15;
  /// Largest ordered block integrated by nested quadrature; longer blocks use Monte Carlo.
  std::size_t max_nested = 2;
  std::size_t mc_samples = 1'000'000;
  std::uint64_t mc_seed = 1;
};

struct MarginalResult {
  double value = 0.0;
  double error = 0.0;
  Backend used = Backend::quadrature;
};

/// Throws InvalidArgument on inconsistent queries and QuadratureError on non-convergence.
MarginalResult marginalize(const model::LognormalFactorModel& m, const MarginalQuery& q,
                           const QuadratureConfig& cfg = {});

/// P(tau_l > y | F_t).
double survival(const model::LognormalFactorModel& m, std::size_t l, double y, double t, double w);

// -- D_rho regions ----------------------------------------------------------
//
// With rho(0..j-1) pinned at increasing z, the region is
//   max(L, z_{j-1}) <= x_{rho(j)} < ... < x_{rho(k-1)} < x_l  for all l outside rho.
// W is the a-integral of that region and U the u^W-integral.

struct RegionIntegrals {
  double w_value = 0.0;
  double u_value = 0.0;
  double error = 0.0;  ///< error bound for w_value
  /// w_value = exp(log_lik) w_core, likewise for u; lets callers normalize in log space.
  double log_lik = 0.0;
  double w_core = 0.0;
  double u_core = 0.0;
  Backend used = Backend::quadrature;
};

/// Nested quadrature for blocks up to cfg.max_nested, Monte Carlo otherwise.
RegionIntegrals rho_region(const model::LognormalFactorModel& m, const comb::Injection& rho,
                           std::size_t j, std::span<const double> z, double lower, double t,
                           double w, const QuadratureConfig& cfg);

/// P(ordered block above `log_lower` and rest above it | s), log_lower in log-space.
/// block may be empty, in which case this is the product of rest survivals.
double block_probability(const model::LognormalFactorModel& m, std::span<const std::size_t> block,
                         std::span<const std::size_t> rest, double log_lower, double s,
                         const QuadratureConfig& cfg, double* error = nullptr);

}  // namespace enlarge::marginal
