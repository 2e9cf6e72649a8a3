// SPDX-License-Identifier: Apache-2.0
//
// One-factor lognormal model for n random times driven by a Brownian motion W:
//
//   tau_i = exp(mu_i + sigma_i (rho_i W_1 + sqrt(1 - rho_i^2) eps_i)),
//
// observed on [0, T_max] with T_max < 1. Given F_t the log-times are jointly
// Gaussian with mean mu + b W_t and covariance D + (1 - t) b b^T, where
// b_i = sigma_i rho_i and D = diag(sigma_i^2 (1 - rho_i^2)). Conditional on the
// factor s = W_1 they are independent, which is what the integrators exploit.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "enlarge/combinatorics.hpp"
#include "enlarge/parallel.hpp"

namespace enlarge::model {

/// Which F-martingale M the drift is computed for.
enum class MSelector {
  brownian,  ///< M = W, d<M,M> = dv
  tanh,      ///< M_v = E[tanh(W_1) | F_v], bounded
};

struct ModelParams {
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> rho;
  double t_max = 0.9;
  MSelector m = MSelector::brownian;

  std::size_t n() const noexcept { return mu.size(); }
  /// Throws InvalidArgument unless sigma > 0, |rho| < 1, 0 < t_max < 1 and sizes agree.
  void validate() const;
};

struct DensityEval {
  double a = 0.0;
  double u = 0.0;                ///< d<a(x), W>/dv, i.e. the w-derivative of a
  std::vector<double> mean;      ///< m_i(t) of log x_i
  std::vector<double> variance;  ///< s_i^2(t) of log x_i
};

/// Gaussian law of the factor s = W_1 given F_t and some log-coordinates.
struct Posterior {
  double mean = 0.0;
  double var = 0.0;
  /// log of the joint density of the conditioning coordinates (in x, not log x) given F_t.
  double log_lik = 0.0;
};

struct SimulatedScenario {
  std::vector<double> grid;     ///< observation times in [0, T_max]
  std::vector<double> w;        ///< W on the grid
  double w1 = 0.0;              ///< W_1
  std::vector<double> tau;
  std::vector<double> sorted;   ///< increasing re-ordering of tau
  comb::Injection label;        ///< partition label for the configured k
};

class LognormalFactorModel {
 public:
  explicit LognormalFactorModel(ModelParams p);

  const ModelParams& params() const noexcept { return p_; }
  std::size_t n() const noexcept { return p_.n(); }
  double loading(std::size_t i) const { return b_[i]; }
  double idio_var(std::size_t i) const { return d_[i]; }

  double marginal_mean(std::size_t i, double w) const { return p_.mu[i] + b_[i] * w; }
  double marginal_var(std::size_t i, double t) const;

  /// Joint conditional density a_t(x) given W_t = w, and its w-derivative.
  /// Throws InvalidArgument for x_i <= 0 or t outside [0, T_max].
  DensityEval density(double t, double w, std::span<const double> x) const;
  double log_density(double t, double w, std::span<const double> x) const;

  /// Product of the per-coordinate marginal lognormals. This is not the joint law
  /// when two or more loadings are nonzero; kept as a negative control.
  DensityEval density_product_form(double t, double w, std::span<const double> x) const;

  /// Law of s given W_t = w and log x_j = logz[m] for j = coords[m].
  Posterior posterior(double t, double w, std::span<const std::size_t> coords,
                      std::span<const double> logz) const;

  /// Density of log x_i at u given s (Gaussian, mean mu_i + b_i s, variance d_i).
  double coord_log_pdf(std::size_t i, double u, double s) const;
  /// P(log x_i > u | s).
  double coord_sf(std::size_t i, double u, double s) const;
  double coord_log_sf(std::size_t i, double u, double s) const;

  /// P(x_l > y | F_t), closed form.
  double survival(std::size_t l, double y, double t, double w) const;

  /// Base martingale value and its w-derivative.
  double m_value(double t, double w) const;
  double m_dw(double t, double w) const;

  /// Uniform grid of `steps` intervals on [0, T_max], then W_1 and the times.
  SimulatedScenario simulate(std::size_t steps, std::size_t k, std::mt19937_64& rng) const;

 private:
  ModelParams p_;
  std::vector<double> b_, d_;
};

/// Per-path generator: a seed sequence built from (master seed, path index).
std::mt19937_64 path_rng(std::uint64_t master, std::uint64_t index);

/// sum over all permutations pi of g(pi(x)), with pi(x)_m = x_{pi(m)}. n <= 6.
double symmetrize(const std::function<double(std::span<const double>)>& g,
                  std::span<const double> x);

/// 1{x_1 < ... < x_n} sum over all permutations of a_t(pi(x)).
double a_tilde(const LognormalFactorModel& m, double t, double w, std::span<const double> x);

/// Same sum restricted to permutations with pi(rho(i)) = i.
double a_tilde_rho(const LognormalFactorModel& m, const comb::Injection& rho, double t, double w,
                   std::span<const double> x);

struct AAAReport {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t paths = 0;
  bool finite = false;  ///< finite and resolved to 10% relative standard error
};

/// Monte Carlo estimate of E[int_0^{T_max} |u^M_s(tau)| / a_s(tau) d<M,M>_s].
AAAReport check_aAA(const LognormalFactorModel& m, std::size_t n_paths, std::size_t steps,
                    std::uint64_t seed, Exec exec);

}  // namespace enlarge::model
