// SPDX-License-Identifier: Apache-2.0
#include "enlarge/drift_engine.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "enlarge/error.hpp"
#include "enlarge/quadrature.hpp"

namespace enlarge::drift {

namespace {

constexpr double kTableS = 30.0;    // P(s) tabulated on [-30, 30]
constexpr double kTableM = 15.0;    // posterior means tabulated on [-15, 15]
constexpr double kTableStep = 0.05;
constexpr std::size_t kTableHermite = 64;
constexpr double kLogFloor = -745.0;

using marginal::Integrand;
using marginal::MarginalQuery;

std::vector<double> sorted_copy(std::span<const double> tau) {
  std::vector<double> s(tau.begin(), tau.end());
  std::sort(s.begin(), s.end());
  return s;
}

double guarded_ratio(double num, double den, double floor) { return den > floor ? num / den : 0.0; }

struct RegimeTerm {
  double log_w = -std::numeric_limits<double>::infinity();  ///< log W_rho, -inf when W_rho = 0
  double ratio = 0.0;                                         ///< U_rho / W_rho
  double error = 0.0;                                         ///< relative error of W_rho
};

/// Combines per-injection terms with weights normalized in log space. Terms whose
/// W_rho is below the floor contribute 0 and flag the step.
void combine(std::span<const RegimeTerm> terms, double floor, bool swap, DriftStep& out, double& rate) {
  const double log_floor = std::log(floor);
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) top = std::max(top, t.log_w);
  out.ratio.assign(terms.size(), 0.0);
  out.weight.assign(terms.size(), 0.0);
  rate = 0.0;
  if (!(top > log_floor)) {
    out.flagged = true;
    return;
  }
  double total = 0.0;
  for (const auto& t : terms) total += std::exp(t.log_w - top);
  for (std::size_t r = 0; r < terms.size(); ++r) {
    const auto& t = terms[r];
    out.weight[r] = swap ? 1.0 : std::exp(t.log_w - top) / total;
    if (!(t.log_w > log_floor)) {
      out.flagged = true;
      continue;
    }
    out.ratio[r] = t.ratio;
    rate += out.ratio[r] * out.weight[r];
    out.error = std::max(out.error, t.error * (1.0 + std::abs(t.ratio)));
  }
}

RegimeTerm direct_term(const model::LognormalFactorModel& m, const comb::Injection& rho, std::size_t j,
                       std::span<const double> z, double v, double w, const marginal::QuadratureConfig& q) {
  const auto r = marginal::rho_region(m, rho, j, z, v, v, w, q);
  RegimeTerm t;
  if (r.w_core > 0.0) {
    t.log_w = r.log_lik + std::log(r.w_core);
    t.ratio = r.u_core / r.w_core;
    t.error = r.w_value > 0.0 ? r.error / r.w_value : 0.0;
  }
  return t;
}

}  // namespace

std::size_t regime(std::span<const double> sorted, std::size_t k, double v) {
  std::size_t j = 0;
  while (j < k && j < sorted.size() && sorted[j] < v) ++j;
  return j;
}

// -- conditional expectations -----------------------------------------------

double cond_exp_initial(const model::LognormalFactorModel& m, std::span<const double> tau,
                        const CondExpQuery& q, const marginal::QuadratureConfig& cfg) {
  if (q.target != Target::initial) throw InvalidArgument("cond_exp_initial: wrong target");
  MarginalQuery mq;
  mq.t = q.u_time;
  mq.w = q.w;
  for (std::size_t i : q.t_set) {
    if (i >= q.rho.size()) throw InvalidArgument("cond_exp_initial: T must be a subset of 0..k-1");
    mq.fixed.push_back(q.rho[i]);
    mq.z.push_back(tau[q.rho[i]]);
  }
  const double den = marginal::marginalize(m, mq, cfg).value;
  mq.box = q.g;
  const double num = q.g ? marginal::marginalize(m, mq, cfg).value : den;
  return guarded_ratio(num, den, 1e-300);
}

double cond_exp_progressive(const model::LognormalFactorModel& m, std::span<const double> tau,
                            const CondExpQuery& q, const marginal::QuadratureConfig& cfg) {
  if (q.target != Target::progressive) throw InvalidArgument("cond_exp_progressive: wrong target");
  MarginalQuery mq;
  mq.t = q.u_time;
  mq.w = q.w;
  mq.threshold = q.u_time;
  for (std::size_t c : q.rho) {
    const bool occurred = q.left_limit ? tau[c] < q.u_time : tau[c] <= q.u_time;
    if (occurred) {
      mq.fixed.push_back(c);
      mq.z.push_back(tau[c]);
    } else {
      mq.above.push_back(c);
    }
  }
  const double den = marginal::marginalize(m, mq, cfg).value;
  mq.box = q.g;
  const double num = q.g ? marginal::marginalize(m, mq, cfg).value : den;
  return guarded_ratio(num, den, 1e-300);
}

double cond_exp_sorted(const model::LognormalFactorModel& m, std::span<const double> tau,
                       const CondExpQuery& q, const marginal::QuadratureConfig& cfg) {
  if (q.target != Target::sorted) throw InvalidArgument("cond_exp_sorted: wrong target");
  if (q.k == 0 || q.k > m.n()) throw InvalidArgument("cond_exp_sorted: need 1 <= k <= n");
  const auto sorted = sorted_copy(tau);
  std::size_t j = 0;
  while (j < q.k && (q.left_limit ? sorted[j] < q.u_time : sorted[j] <= q.u_time)) ++j;
  MarginalQuery mq;
  mq.t = q.u_time;
  mq.w = q.w;
  mq.integrand = Integrand::a_tilde;
  for (std::size_t i = 0; i < j; ++i) {
    mq.fixed.push_back(i);
    mq.z.push_back(sorted[i]);
  }
  if (j < q.k) mq.threshold = q.u_time;
  const double den = marginal::marginalize(m, mq, cfg).value;
  mq.box = q.g;
  const double num = q.g ? marginal::marginalize(m, mq, cfg).value : den;
  return guarded_ratio(num, den, 1e-300);
}

double n_rho_minus(const model::LognormalFactorModel& m, std::span<const double> tau,
                   const comb::Injection& rho, double v, double w, const marginal::QuadratureConfig& cfg) {
  const std::size_t k = rho.size();
  std::size_t j = 0;
  while (j < k && tau[rho[j]] < v) ++j;
  for (std::size_t i = j; i < k; ++i) {
    if (tau[rho[i]] < v) return 0.0;  // occurred set is not a prefix of rho
  }
  std::vector<double> z;
  MarginalQuery den;
  den.t = v;
  den.w = w;
  den.threshold = v;
  for (std::size_t i = 0; i < k; ++i) {
    if (i < j) {
      den.fixed.push_back(rho[i]);
      den.z.push_back(tau[rho[i]]);
      z.push_back(tau[rho[i]]);
    } else {
      den.above.push_back(rho[i]);
    }
  }
  const auto num = marginal::rho_region(m, rho, j, z, v, v, w, cfg);
  const double d = marginal::marginalize(m, den, cfg).value;
  return std::clamp(guarded_ratio(num.w_value, d, 1e-300), 0.0, 1.0);
}

// -- drifts -----------------------------------------------------------------

DriftPath drift_tau_rho(const model::LognormalFactorModel& m, const model::SimulatedScenario& sc,
                        const comb::Injection& rho, const std::optional<marginal::Box>& g,
                        const DriftConfig& cfg) {
  DriftPath out;
  out.injections = {rho};
  double cum = 0.0;
  for (std::size_t s = 0; s + 1 < sc.grid.size(); ++s) {
    const double v = sc.grid[s], w = sc.w[s], dv = sc.grid[s + 1] - v;
    MarginalQuery q;
    q.t = v;
    q.w = w;
    q.threshold = v;
    std::size_t occurred = 0;
    for (std::size_t c : rho) {
      if (sc.tau[c] < v) {
        q.fixed.push_back(c);
        q.z.push_back(sc.tau[c]);
        ++occurred;
      } else {
        q.above.push_back(c);
      }
    }
    DriftStep st;
    st.v = v;
    st.regime = occurred;
    const auto den = marginal::marginalize(m, q, cfg.quad);
    q.integrand = Integrand::u;
    q.box = g;
    const auto num = marginal::marginalize(m, q, cfg.quad);
    double ratio = 0.0;
    if (den.value > cfg.denominator_floor) {
      ratio = num.value / den.value;
      st.error = (num.error + std::abs(ratio) * den.error) / den.value;
    } else {
      st.flagged = true;
    }
    st.ratio = {ratio};
    st.weight = {1.0};
    const double hw = m.m_dw(v, w);
    st.increment = ratio * hw * dv;
    st.error *= std::abs(hw) * dv;
    cum += st.increment;
    st.cumulative = cum;
    out.flagged = out.flagged || st.flagged;
    out.max_error = std::max(out.max_error, st.error);
    out.steps.push_back(std::move(st));
  }
  return out;
}

DriftPath drift_sorted(const model::LognormalFactorModel& m, const model::SimulatedScenario& sc,
                       std::size_t k, const DriftConfig& cfg) {
  if (k == 0 || k > m.n()) throw InvalidArgument("drift_sorted: need 1 <= k <= n");
  DriftPath out;
  out.injections = comb::enumerate_injections(k, m.n());
  const auto sorted = sorted_copy(sc.tau);
  double cum = 0.0;
  std::vector<RegimeTerm> terms(out.injections.size());
  for (std::size_t s = 0; s + 1 < sc.grid.size(); ++s) {
    const double v = sc.grid[s], w = sc.w[s], dv = sc.grid[s + 1] - v;
    DriftStep st;
    st.v = v;
    st.regime = regime(sorted, k, v);
    const std::span<const double> z(sorted.data(), st.regime);
    for (std::size_t r = 0; r < out.injections.size(); ++r) {
      terms[r] = direct_term(m, out.injections[r], st.regime, z, v, w, cfg.quad);
    }
    double rate = 0.0;
    combine(terms, cfg.denominator_floor, false, st, rate);
    const double hw = m.m_dw(v, w);
    st.increment = rate * hw * dv;
    st.error *= std::abs(hw) * dv;
    cum += st.increment;
    st.cumulative = cum;
    out.flagged = out.flagged || st.flagged;
    out.max_error = std::max(out.max_error, st.error);
    out.steps.push_back(std::move(st));
  }
  return out;
}

DriftPath classical_single_time_drift(const model::ModelParams& p, const model::SimulatedScenario& sc) {
  if (p.mu.size() != 1) throw InvalidArgument("classical_single_time_drift: needs exactly one time");
  const model::LognormalFactorModel bracket(p);  // only for d<M,M>
  const double b = p.sigma[0] * p.rho[0];
  DriftPath out;
  out.injections = {comb::Injection{0}};
  double cum = 0.0;
  for (std::size_t s = 0; s + 1 < sc.grid.size(); ++s) {
    const double v = sc.grid[s], w = sc.w[s], dv = sc.grid[s + 1] - v;
    const double mean = p.mu[0] + b * w;
    const double sd = p.sigma[0] * std::sqrt(1.0 - p.rho[0] * p.rho[0] * v);
    DriftStep st;
    st.v = v;
    double ratio;
    if (sc.tau[0] < v) {
      st.regime = 1;
      ratio = b * (std::log(sc.tau[0]) - mean) / (sd * sd);
    } else {
      // int_{x>v} a b (ln x - m) / sd^2 dx = (b / sd) phi(z); int_{x>v} a dx = P(Z > z).
      const double z = (std::log(v) - mean) / sd;
      ratio = b / sd * std::exp(-0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - quad::log_normal_sf(z));
    }
    st.ratio = {ratio};
    st.weight = {1.0};
    st.increment = ratio * bracket.m_dw(v, w) * dv;
    cum += st.increment;
    st.cumulative = cum;
    out.steps.push_back(std::move(st));
  }
  return out;
}

// -- tabulated sorted drift -------------------------------------------------

struct SortedDriftTables::Table {
  double var = 0.0;
  std::unique_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> log_f0, r;
};

SortedDriftTables::SortedDriftTables(const model::LognormalFactorModel& m, std::vector<double> grid,
                                     std::size_t k, const DriftConfig& cfg)
    : m_(m), grid_(std::move(grid)), k_(k), cfg_(cfg) {
  if (k == 0 || k > m.n()) throw InvalidArgument("SortedDriftTables: need 1 <= k <= n");
  if (grid_.size() < 2) throw InvalidArgument("SortedDriftTables: grid needs two points");
  inj_ = comb::enumerate_injections(k, m.n());
}

SortedDriftTables::~SortedDriftTables() = default;

std::size_t SortedDriftTables::tables_built() const {
  std::lock_guard<std::mutex> lock(mu_);
  return tables_.size();
}

const SortedDriftTables::Table& SortedDriftTables::table(std::size_t g, std::size_t r, std::size_t j) const {
  const std::size_t key = (g * inj_.size() + r) * k_ + j;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = tables_.find(key);
    if (it != tables_.end()) return *it->second;
  }
  const auto& rho = inj_[r];
  const double v = grid_[g];
  const std::vector<std::size_t> pinned(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(j));
  const std::vector<std::size_t> block(rho.begin() + static_cast<std::ptrdiff_t>(j), rho.end());
  std::vector<char> in_rho(m_.n(), 0);
  for (std::size_t c : rho) in_rho[c] = 1;
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < m_.n(); ++c) {
    if (!in_rho[c]) rest.push_back(c);
  }
  auto t = std::make_unique<Table>();
  // Posterior variance only depends on the pinned coordinate set.
  const std::vector<double> dummy(j, 0.0);
  t->var = m_.posterior(v, 0.0, pinned, dummy).var;

  const std::size_t ns = static_cast<std::size_t>(std::lround(2 * kTableS / kTableStep)) + 1;
  std::vector<double> log_p(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    const double s = -kTableS + kTableStep * static_cast<double>(i);
    const double p = marginal::block_probability(m_, block, rest, std::log(v), s, cfg_.quad);
    log_p[i] = p > 0.0 ? std::max(std::log(p), kLogFloor) : kLogFloor;
  }
  boost::math::interpolators::cardinal_cubic_b_spline<double> lp(log_p.begin(), log_p.end(), -kTableS, kTableStep);
  const auto& gh = quad::gauss_hermite(kTableHermite);
  const double sd = std::sqrt(t->var);
  const std::size_t nm = static_cast<std::size_t>(std::lround(2 * kTableM / kTableStep)) + 1;
  std::vector<double> lf0(nm), rr(nm);
  for (std::size_t i = 0; i < nm; ++i) {
    const double mean = -kTableM + kTableStep * static_cast<double>(i);
    // Scale by the value at the mean to keep the sums in range.
    const double ref = lp(mean);
    double f0 = 0.0, f1 = 0.0;
    for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
      const double x = gh.nodes[q];
      const double val = std::exp(lp(mean + sd * x) - ref);
      f0 += gh.weights[q] * val;
      f1 += gh.weights[q] * val * sd * x;
    }
    lf0[i] = ref + std::log(f0);
    rr[i] = f1 / f0;
  }
  t->log_f0 = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      lf0.begin(), lf0.end(), -kTableM, kTableStep);
  t->r = std::make_unique<boost::math::interpolators::cardinal_cubic_b_spline<double>>(rr.begin(), rr.end(),
                                                                                        -kTableM, kTableStep);
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = tables_.emplace(key, std::move(t));
  return *it->second;
}

void SortedDriftTables::build_all() {
  for (std::size_t g = 0; g + 1 < grid_.size(); ++g) {
    for (std::size_t r = 0; r < inj_.size(); ++r) {
      for (std::size_t j = 0; j < k_; ++j) table(g, r, j);
    }
  }
}

double SortedDriftTables::rate(std::size_t g, double w, std::span<const double> z, bool swap,
                               DriftStep* detail) const {
  const double v = grid_[g];
  const std::size_t j = z.size();
  std::vector<RegimeTerm> terms(inj_.size());
  std::vector<double> logz(z.size());
  for (std::size_t i = 0; i < j; ++i) logz[i] = std::log(z[i]);
  for (std::size_t r = 0; r < inj_.size(); ++r) {
    const auto& rho = inj_[r];
    if (j == k_) {
      terms[r] = direct_term(m_, rho, j, z, v, w, cfg_.quad);
      continue;
    }
    const std::span<const std::size_t> pinned(rho.data(), j);
    const auto post = m_.posterior(v, w, pinned, logz);
    if (std::abs(post.mean) > kTableM - 1.0) {
      terms[r] = direct_term(m_, rho, j, z, v, w, cfg_.quad);
      continue;
    }
    const Table& t = table(g, r, j);
    terms[r].log_w = post.log_lik + (*t.log_f0)(post.mean);
    terms[r].ratio = ((*t.r)(post.mean) + post.mean - w) / (1.0 - v);
  }
  DriftStep local;
  DriftStep& st = detail ? *detail : local;
  double rate = 0.0;
  combine(terms, cfg_.denominator_floor, swap, st, rate);
  return rate * m_.m_dw(v, w);
}

DriftPath SortedDriftTables::evaluate(const model::SimulatedScenario& sc, bool with_weights,
                                      bool swap_weights) const {
  if (sc.grid.size() != grid_.size()) throw InvalidArgument("SortedDriftTables: scenario grid differs");
  DriftPath out;
  out.injections = inj_;
  const auto sorted = sorted_copy(sc.tau);
  double cum = 0.0;
  for (std::size_t g = 0; g + 1 < grid_.size(); ++g) {
    const double v = grid_[g], dv = grid_[g + 1] - v;
    DriftStep st;
    st.v = v;
    st.regime = regime(sorted, k_, v);
    const double r = rate(g, sc.w[g], std::span<const double>(sorted.data(), st.regime), swap_weights, &st);
    st.increment = r * dv;
    cum += st.increment;
    st.cumulative = cum;
    if (!with_weights) {
      st.ratio.clear();
      st.weight.clear();
    }
    out.flagged = out.flagged || st.flagged;
    out.steps.push_back(std::move(st));
  }
  return out;
}

}  // namespace enlarge::drift
