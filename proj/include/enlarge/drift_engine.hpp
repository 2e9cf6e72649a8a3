// SPDX-License-Identifier: Apache-2.0
//
// Conditional expectations and drifts in the filtrations enlarged with
// tau_rho (progressively), with sigma(tau_rho(T)) (initially) and with the
// k smallest sorted times, for the lognormal factor model.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "enlarge/combinatorics.hpp"
#include "enlarge/density_model.hpp"
#include "enlarge/marginal_integrator.hpp"

namespace enlarge::drift {

enum class Target { initial, progressive, sorted };

struct CondExpQuery {
  Target target = Target::progressive;
  bool left_limit = false;           ///< predictable version at U-
  std::optional<marginal::Box> g;    ///< g = indicator of the box; none means g = 1
  double u_time = 0.0;               ///< deterministic U
  double w = 0.0;                    ///< W_U
  comb::Injection rho;               ///< initial, progressive
  std::vector<std::size_t> t_set;    ///< initial: T as positions in 0..k-1
  std::size_t k = 1;                 ///< sorted
};

/// E[g(tau) | F_U v sigma(tau_rho(T))].
double cond_exp_initial(const model::LognormalFactorModel& m, std::span<const double> tau,
                        const CondExpQuery& q, const marginal::QuadratureConfig& cfg = {});

/// E[g(tau) | F^{tau_rho}_U], or at U- when left_limit is set.
double cond_exp_progressive(const model::LognormalFactorModel& m, std::span<const double> tau,
                            const CondExpQuery& q, const marginal::QuadratureConfig& cfg = {});

/// E[g(tau) | F^{sorted_k}_U], or at U- when left_limit is set.
double cond_exp_sorted(const model::LognormalFactorModel& m, std::span<const double> tau,
                       const CondExpQuery& q, const marginal::QuadratureConfig& cfg = {});

/// N^rho_{v-} = P(tau in D_rho | F^{tau_rho}_{v-}).
double n_rho_minus(const model::LognormalFactorModel& m, std::span<const double> tau,
                   const comb::Injection& rho, double v, double w,
                   const marginal::QuadratureConfig& cfg = {});

/// Number of the k smallest sorted times strictly below v.
std::size_t regime(std::span<const double> sorted, std::size_t k, double v);

struct DriftStep {
  double v = 0.0;
  std::size_t regime = 0;
  std::vector<double> ratio;   ///< per injection (drift_sorted) or the single active ratio
  std::vector<double> weight;  ///< per injection; sums to 1 when any is positive
  double increment = 0.0;
  double cumulative = 0.0;     ///< drift accumulated up to v + dv
  double error = 0.0;
  bool flagged = false;        ///< a zero denominator was replaced by 0
};

struct DriftPath {
  std::vector<comb::Injection> injections;
  std::vector<DriftStep> steps;
  bool flagged = false;
  double max_error = 0.0;
};

struct DriftConfig {
  marginal::QuadratureConfig quad;
  double denominator_floor = 1e-300;
};

/// Left-point discretization of the drift of g(tau) M in F^{tau_rho} on scenario grid.
DriftPath drift_tau_rho(const model::LognormalFactorModel& m, const model::SimulatedScenario& sc,
                        const comb::Injection& rho, const std::optional<marginal::Box>& g,
                        const DriftConfig& cfg = {});

/// Left-point discretization of the F^{sorted_k}-drift of M.
DriftPath drift_sorted(const model::LognormalFactorModel& m, const model::SimulatedScenario& sc,
                       std::size_t k, const DriftConfig& cfg = {});

/// Classical single-time formula (n = k = 1) coded directly from the lognormal density:
/// before tau the ratio int_{x>v} u / int_{x>v} a, after tau u(tau) / a(tau).
DriftPath classical_single_time_drift(const model::ModelParams& p, const model::SimulatedScenario& sc);

/// Precomputed region integrals on a fixed grid for fast repeated drift_sorted evaluation.
///
/// For regime j < k the region integral over the free block only depends on the
/// posterior mean of the factor, so it is tabulated per (grid point, rho, j) as a
/// cubic spline in that mean. Regime k uses closed forms. Queries outside the
/// tabulated range fall back to direct quadrature.
class SortedDriftTables {
 public:
  SortedDriftTables(const model::LognormalFactorModel& m, std::vector<double> grid, std::size_t k,
                    const DriftConfig& cfg = {});
  ~SortedDriftTables();
  SortedDriftTables(const SortedDriftTables&) = delete;
  SortedDriftTables& operator=(const SortedDriftTables&) = delete;

  /// Builds every table up front (otherwise built lazily, thread-safe).
  void build_all();

  /// Same contract as drift_sorted; sc.grid must equal the table grid.
  /// swap_weights replaces each weight a_tilde^rho / a_tilde by 1 (negative control).
  DriftPath evaluate(const model::SimulatedScenario& sc, bool with_weights = true,
                     bool swap_weights = false) const;

  /// Drift rate (ratio times d<M,M>/dv) at grid index g given the regime data.
  double rate(std::size_t g, double w, std::span<const double> sorted_prefix, bool swap_weights = false,
              DriftStep* detail = nullptr) const;

  std::size_t tables_built() const;

 private:
  struct Table;
  const Table& table(std::size_t g, std::size_t r, std::size_t j) const;

  const model::LognormalFactorModel& m_;
  std::vector<double> grid_;
  std::size_t k_;
  DriftConfig cfg_;
  std::vector<comb::Injection> inj_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::unique_ptr<Table>> tables_;
};

}  // namespace enlarge::drift
