// SPDX-License-Identifier: Apache-2.0
//
// Progressive enlargement of a finite filtration with several random times,
// the direct-sum filtration built from a partition (D_rho), and exact checks
// of the drift identities that relate them.
#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "enlarge/combinatorics.hpp"
#include "enlarge/finite_prob.hpp"

namespace enlarge::oracle {

using comb::ExtendedTime;
using finite::FiniteProbSpace;
using finite::Partition;
using finite::PartitionFiltration;
using finite::Path;

/// Times attached to one atom.
using TimeVector = std::vector<ExtendedTime>;

/// Grid index standing for "never".
inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

/// F_j joined with the level sets of (xi_i cap t_j)_i. times[atom] lists the xi_i.
PartitionFiltration progressive_enlargement(const PartitionFiltration& f,
                                            const std::vector<TimeVector>& times);

/// Blocks {C cap D_r : C block of subs[r] at t}. label[atom] = r.
PartitionFiltration direct_sum_filtration(const std::vector<PartitionFiltration>& subs,
                                          std::span<const std::size_t> label);

class EnlargementSetup {
 public:
  EnlargementSetup(FiniteProbSpace space, PartitionFiltration base, std::vector<TimeVector> times,
                   std::size_t k);

  const FiniteProbSpace& space() const noexcept { return space_; }
  const PartitionFiltration& base() const noexcept { return base_; }
  const std::vector<TimeVector>& times() const noexcept { return times_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t steps() const noexcept { return base_.steps(); }
  std::size_t atoms() const noexcept { return space_.size(); }

  const std::vector<comb::Injection>& injections() const noexcept { return inj_; }
  /// Index into injections() of the label of each atom.
  std::span<const std::size_t> label() const noexcept { return label_; }
  const std::vector<char>& d_set(std::size_t r) const { return d_[r]; }
  std::vector<double> d_indicator(std::size_t r) const;

  /// Enlargement with tau_rho.
  const PartitionFiltration& f_rho(std::size_t r) const { return f_rho_[r]; }
  /// Enlargement with the k smallest sorted times.
  const PartitionFiltration& g() const noexcept { return g_; }
  const PartitionFiltration& fhat() const noexcept { return fhat_; }

 private:
  FiniteProbSpace space_;
  PartitionFiltration base_;
  std::vector<TimeVector> times_;
  std::size_t n_ = 0, k_ = 0;
  std::vector<comb::Injection> inj_;
  std::vector<std::size_t> label_;
  std::vector<std::vector<char>> d_;
  std::vector<PartitionFiltration> f_rho_;
  PartitionFiltration g_, fhat_;
};

struct HypGReport {
  bool f_in_g = false;         ///< G refines F
  bool g_in_fhat = false;      ///< Fhat refines G
  bool f_in_f_rho = false;     ///< every F^rho refines F
  bool coincide_on_d = false;  ///< G_t and F^rho_t induce the same partition of D_rho
  bool stopping_times = false; ///< each tau_i is a stopping time of the F^rho containing it
  bool ok() const { return f_in_g && g_in_fhat && f_in_f_rho && coincide_on_d && stopping_times; }
};

HypGReport check_hyp_g(const EnlargementSetup& s);

/// Max over rho and atoms of |E[eta 1_D | Fhat_j] - 1_D E[eta 1_D | F^rho_j] / P(D | F^rho_j)|.
double lemma_cond_check(const EnlargementSetup& s, std::span<const double> eta, std::size_t j);

/// Max Fhat-conditional increment of (M - (1_D / N_-) . <N, M>) 1_D for an F^rho-martingale M.
double decompminmax_check(const EnlargementSetup& s, std::size_t r, const Path& m_rho);

/// Per-injection pieces of the Fhat-decomposition of an F-martingale.
struct RhoDrift {
  Path k;        ///< drift of M in F^rho
  Path n;        ///< optional projection of 1_D on F^rho
  Path bracket;  ///< <N, M - K> in F^rho
  Path vhat;     ///< K + (1 / N_-) . bracket, with 0/0 := 0
};

RhoDrift rho_drift(const EnlargementSetup& s, std::size_t r, const Path& m);

/// Max Fhat-conditional increment of M - sum_rho 1_D vhat^rho.
double fhat_decomp_check(const EnlargementSetup& s, const Path& m);

/// G-predictable V with V = X on D_rho, built block by block.
/// Throws NotAdapted when X is not constant on (G_{j-1} block) cap D_rho.
Path g_predictable_version(const EnlargementSetup& s, std::size_t r, const Path& x);

struct PsiResult {
  Path ntilde;             ///< optional projection of 1_D on G
  Path v;                  ///< G-predictable version of Vhat
  Path psi;                ///< psi(Vhat) = psi_plus - psi_minus
  Path psi_plus, psi_minus;
  Path m_inc;              ///< increments of the dominating measure m
  Path q_plus, q_minus;    ///< densities of d psi_plus, d psi_minus against m
  std::vector<std::size_t> r_time;               ///< first j with Ntilde_j = 0, per atom
  std::vector<std::vector<std::size_t>> rn_time; ///< rn_time[n-1][atom]: first j with Ntilde_j <= 1/n
};

/// Requires Vhat_0 = 0 and Vhat Fhat-predictable on D_rho.
PsiResult psi_construct(const EnlargementSetup& s, const Path& vhat, std::size_t r);

/// (f_- * psi)_j = sum_{1 <= i <= j} f_{i-1} (q+_i - q-_i) dm_i.
Path psi_integral(const PsiResult& psi, const Path& f);

struct PsiInvariants {
  double on_d_dev = 0;        ///< max |psi - Vhat| on D
  double off_support_dm = 0;  ///< max dm after R
  double bound_excess = 0;    ///< max(psi_pm - sup_D Vhat_pm, 0) on supp m
};

PsiInvariants psi_invariants(const EnlargementSetup& s, const Path& vhat, std::size_t r,
                             const PsiResult& psi);

struct GdeReport {
  double gde_dev = 0;   ///< |sum_rho (b) - G-drift of M|
  double gdel_dev = 0;  ///< max_rho |(a) - (b)|
  double fhat_dev = 0;  ///< Fhat-conditional increments of the Fhat-compensated M
  PsiInvariants psi;    ///< worst case over rho
  Path g_drift;
  std::vector<Path> via_psi;        ///< (a) per rho
  std::vector<Path> via_dual_proj;  ///< (b) per rho
};

/// Throws NotMartingale unless m is an F-martingale.
GdeReport gde_verify(const EnlargementSetup& s, const Path& m);

struct T3Report {
  bool increasing = false;
  bool g_stopping = false;
  bool equal_on_d = false;
  bool claim_i = false;   ///< sup S_n >= R when sup T_n is never
  bool claim_ii = false;  ///< some S_n >= R
  std::vector<std::vector<std::size_t>> s;
  bool ok() const { return increasing && g_stopping && equal_on_d && claim_i && claim_ii; }
};

/// tn[n][atom]: increasing Fhat-stopping times (kNever allowed).
T3Report lemma_t3_check(const EnlargementSetup& s, std::size_t r,
                        const std::vector<std::vector<std::size_t>>& tn);

/// Whether tn is a stopping time of f: {tn <= j} is F_j-measurable for all j.
bool is_stopping_time(const PartitionFiltration& f, std::span<const std::size_t> tn);

}  // namespace enlarge::oracle
