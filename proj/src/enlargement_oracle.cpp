// SPDX-License-Identifier: Apache-2.0
#include "enlarge/enlargement_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enlarge/error.hpp"

namespace enlarge::oracle {

using finite::kExactTol;

namespace {

bool close(double a, double b) {
  return std::abs(a - b) <= kExactTol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

Path one_d_times(const Path& x, const std::vector<double>& ind) { return finite::scale_by(x, ind); }

double jordan_sup(const Path& x, std::span<const char> subset, bool positive) {
  double best = 0.0;
  for (std::size_t w = 0; w < x.atoms(); ++w) {
    if (!subset[w]) continue;
    double acc = 0.0;
    for (std::size_t j = 1; j < x.steps(); ++j) {
      const double d = x(j, w) - x(j - 1, w);
      acc += positive ? std::max(d, 0.0) : std::max(-d, 0.0);
    }
    best = std::max(best, acc);
  }
  return best;
}

}  // namespace

PartitionFiltration progressive_enlargement(const PartitionFiltration& f,
                                            const std::vector<TimeVector>& times) {
  if (times.size() != f.atom_count()) {
    throw GridMismatch("progressive_enlargement: need one time vector per atom");
  }
  std::vector<Partition> parts;
  parts.reserve(f.steps());
  for (std::size_t j = 0; j < f.steps(); ++j) {
    const ExtendedTime t(f.grid()[j]);
    std::vector<std::vector<double>> keys(times.size());
    for (std::size_t w = 0; w < times.size(); ++w) {
      keys[w].push_back(static_cast<double>(f.at(j).block_of(w)));
      for (const ExtendedTime& xi : times[w]) keys[w].push_back(comb::cap(xi, t).value());
    }
    parts.push_back(finite::partition_by(keys));
  }
  return PartitionFiltration(f.grid(), std::move(parts));
}

PartitionFiltration direct_sum_filtration(const std::vector<PartitionFiltration>& subs,
                                          std::span<const std::size_t> label) {
  if (subs.empty()) throw InvalidArgument("direct_sum_filtration: no sub-filtrations");
  for (std::size_t l : label) {
    if (l >= subs.size()) throw InvalidArgument("direct_sum_filtration: label out of range");
  }
  const auto& grid = subs.front().grid();
  for (const auto& f : subs) {
    if (f.grid() != grid || f.atom_count() != label.size()) {
      throw GridMismatch("direct_sum_filtration: sub-filtrations disagree on grid or atoms");
    }
  }
  std::vector<Partition> parts;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    std::vector<std::pair<std::size_t, std::size_t>> keys(label.size());
    for (std::size_t w = 0; w < label.size(); ++w) {
      keys[w] = {label[w], subs[label[w]].at(j).block_of(w)};
    }
    parts.push_back(finite::partition_by(keys));
  }
  return PartitionFiltration(grid, std::move(parts));
}

// -- EnlargementSetup ---------------------------------------------------------

EnlargementSetup::EnlargementSetup(FiniteProbSpace space, PartitionFiltration base,
                                   std::vector<TimeVector> times, std::size_t k)
    : space_(std::move(space)), base_(std::move(base)), times_(std::move(times)), k_(k) {
  if (base_.atom_count() != space_.size() || times_.size() != space_.size()) {
    throw GridMismatch("EnlargementSetup: atom counts disagree");
  }
  n_ = times_.front().size();
  for (const auto& tv : times_) {
    if (tv.size() != n_) throw InvalidArgument("EnlargementSetup: ragged time vectors");
  }
  inj_ = comb::enumerate_injections(k_, n_);
  label_.resize(atoms());
  d_.assign(inj_.size(), std::vector<char>(atoms(), 0));
  for (std::size_t w = 0; w < atoms(); ++w) {
    label_[w] = comb::injection_index(comb::partition_label(times_[w], k_), n_);
    d_[label_[w]][w] = 1;
  }
  for (const auto& rho : inj_) {
    std::vector<TimeVector> sel(atoms());
    for (std::size_t w = 0; w < atoms(); ++w) {
      for (std::size_t i : rho) sel[w].push_back(times_[w][i]);
    }
    f_rho_.push_back(progressive_enlargement(base_, sel));
  }
  std::vector<TimeVector> sorted(atoms());
  for (std::size_t w = 0; w < atoms(); ++w) {
    const auto rs = comb::rank_and_sort(times_[w]);
    sorted[w].assign(rs.sorted.begin(), rs.sorted.begin() + static_cast<std::ptrdiff_t>(k_));
  }
  g_ = progressive_enlargement(base_, sorted);
  fhat_ = direct_sum_filtration(f_rho_, label_);
}

std::vector<double> EnlargementSetup::d_indicator(std::size_t r) const {
  std::vector<double> x(atoms());
  for (std::size_t w = 0; w < atoms(); ++w) x[w] = d_[r][w] ? 1.0 : 0.0;
  return x;
}

bool is_stopping_time(const PartitionFiltration& f, std::span<const std::size_t> tn) {
  std::vector<char> ev(tn.size());
  for (std::size_t j = 0; j < f.steps(); ++j) {
    for (std::size_t w = 0; w < tn.size(); ++w) ev[w] = tn[w] != kNever && tn[w] <= j;
    if (!f.at(j).contains_event(ev)) return false;
  }
  return true;
}

HypGReport check_hyp_g(const EnlargementSetup& s) {
  HypGReport rep;
  rep.f_in_g = s.g().refines(s.base());
  rep.g_in_fhat = s.fhat().refines(s.g());
  rep.f_in_f_rho = rep.coincide_on_d = rep.stopping_times = true;
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    const auto& fr = s.f_rho(r);
    rep.f_in_f_rho = rep.f_in_f_rho && fr.refines(s.base());
    for (std::size_t j = 0; j < s.steps(); ++j) {
      rep.coincide_on_d = rep.coincide_on_d && s.g().at(j).same_on(fr.at(j), s.d_set(r));
      std::vector<char> ev(s.atoms());
      for (std::size_t i : s.injections()[r]) {
        for (std::size_t w = 0; w < s.atoms(); ++w) {
          ev[w] = s.times()[w][i] <= ExtendedTime(s.base().grid()[j]);
        }
        rep.stopping_times = rep.stopping_times && fr.at(j).contains_event(ev);
      }
    }
  }
  return rep;
}

double lemma_cond_check(const EnlargementSetup& s, std::span<const double> eta, std::size_t j) {
  if (eta.size() != s.atoms() || j >= s.steps()) throw GridMismatch("lemma_cond_check");
  double dev = 0.0;
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    const auto& d = s.d_set(r);
    std::vector<double> eta_d(s.atoms());
    for (std::size_t w = 0; w < s.atoms(); ++w) eta_d[w] = d[w] ? eta[w] : 0.0;
    const auto lhs = finite::conditional_expectation(s.space(), eta_d, s.fhat().at(j));
    const auto num = finite::conditional_expectation(s.space(), eta_d, s.f_rho(r).at(j));
    const auto den = finite::conditional_probability(s.space(), d, s.f_rho(r).at(j));
    for (std::size_t w = 0; w < s.atoms(); ++w) {
      const double rhs = d[w] ? num[w] / den[w] : 0.0;
      dev = std::max(dev, std::abs(lhs[w] - rhs));
    }
  }
  return dev;
}

RhoDrift rho_drift(const EnlargementSetup& s, std::size_t r, const Path& m) {
  const auto& fr = s.f_rho(r);
  RhoDrift out;
  out.k = finite::doob_decomposition(s.space(), m, fr).drift;
  out.n = finite::optional_projection(
      s.space(), Path::constant(s.steps(), s.d_indicator(r)), fr);
  out.bracket = finite::predictable_bracket(s.space(), out.n, m - out.k, fr);
  out.vhat = Path(s.steps(), s.atoms());
  for (std::size_t j = 1; j < s.steps(); ++j) {
    for (std::size_t w = 0; w < s.atoms(); ++w) {
      const double nprev = out.n(j - 1, w);
      const double db = out.bracket(j, w) - out.bracket(j - 1, w);
      const double dk = out.k(j, w) - out.k(j - 1, w);
      out.vhat(j, w) = out.vhat(j - 1, w) + dk + (nprev > 0.0 ? db / nprev : 0.0);
    }
  }
  return out;
}

double decompminmax_check(const EnlargementSetup& s, std::size_t r, const Path& m_rho) {
  const auto& fr = s.f_rho(r);
  if (!finite::is_martingale(s.space(), m_rho, fr)) {
    throw NotMartingale("decompminmax_check: input is not an F^rho-martingale");
  }
  const Path n = finite::optional_projection(
      s.space(), Path::constant(s.steps(), s.d_indicator(r)), fr);
  const Path b = finite::predictable_bracket(s.space(), n, m_rho, fr);
  const auto& d = s.d_set(r);
  Path x(s.steps(), s.atoms());
  for (std::size_t w = 0; w < s.atoms(); ++w) {
    if (!d[w]) continue;
    double integral = 0.0;
    x(0, w) = m_rho(0, w);
    for (std::size_t j = 1; j < s.steps(); ++j) {
      integral += (b(j, w) - b(j - 1, w)) / n(j - 1, w);
      x(j, w) = m_rho(j, w) - integral;
    }
  }
  return finite::max_conditional_increment(s.space(), x, s.fhat());
}

double fhat_decomp_check(const EnlargementSetup& s, const Path& m) {
  Path x = m;
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    x -= one_d_times(rho_drift(s, r, m).vhat, s.d_indicator(r));
  }
  return finite::max_conditional_increment(s.space(), x, s.fhat());
}

Path g_predictable_version(const EnlargementSetup& s, std::size_t r, const Path& x) {
  const auto& d = s.d_set(r);
  Path v(s.steps(), s.atoms());
  for (std::size_t j = 0; j < s.steps(); ++j) {
    const Partition& prev = s.g().at(j == 0 ? 0 : j - 1);
    for (const auto& blk : prev.blocks()) {
      bool found = false;
      double val = 0.0;
      for (std::size_t w : blk) {
        if (!d[w]) continue;
        if (!found) {
          val = x(j, w);
          found = true;
        } else if (!close(val, x(j, w))) {
          throw NotAdapted("g_predictable_version: value not constant on a G block within D at step " +
                           std::to_string(j));
        }
      }
      for (std::size_t w : blk) v(j, w) = found ? val : (j == 0 ? 0.0 : v(j - 1, w));
    }
  }
  return v;
}

PsiResult psi_construct(const EnlargementSetup& s, const Path& vhat, std::size_t r) {
  const std::size_t T = s.steps(), A = s.atoms();
  for (std::size_t w = 0; w < A; ++w) {
    if (vhat(0, w) != 0.0) throw InvalidArgument("psi_construct: Vhat_0 must vanish");
  }
  PsiResult out;
  out.ntilde = finite::optional_projection(s.space(), Path::constant(T, s.d_indicator(r)), s.g());
  out.v = g_predictable_version(s, r, vhat);

  double min_pos = 1.0;
  for (double x : out.ntilde.data()) {
    if (x > 0.0) min_pos = std::min(min_pos, x);
  }
  const auto n_max = static_cast<std::size_t>(std::ceil(1.0 / min_pos)) + 1;
  out.r_time.assign(A, kNever);
  out.rn_time.assign(n_max, std::vector<std::size_t>(A, kNever));
  for (std::size_t w = 0; w < A; ++w) {
    for (std::size_t j = 0; j < T && out.r_time[w] == kNever; ++j) {
      if (out.ntilde(j, w) == 0.0) out.r_time[w] = j;
    }
    for (std::size_t n = 1; n <= n_max; ++n) {
      for (std::size_t j = 0; j < T; ++j) {
        if (out.ntilde(j, w) <= 1.0 / static_cast<double>(n)) {
          out.rn_time[n - 1][w] = j;
          break;
        }
      }
    }
  }

  // Three cases: on the union of [0, R_n]; after R when Ntilde_{R-} = 0 (left limit is the
  // last grid value before R); after R when Ntilde_{R-} > 0.
  out.psi = Path(T, A);
  for (std::size_t w = 0; w < A; ++w) {
    const std::size_t R = out.r_time[w];
    const std::size_t reach = out.rn_time[n_max - 1][w];
    for (std::size_t j = 0; j < T; ++j) {
      if (reach == kNever || j <= reach) {
        out.psi(j, w) = out.v(j, w);
      } else if (R != kNever && R > 0 && out.ntilde(R - 1, w) == 0.0) {
        out.psi(j, w) = out.v(R - 1, w);
      } else if (R != kNever && R > 0) {
        out.psi(j, w) = out.v(R, w);
      } else {
        out.psi(j, w) = 0.0;
      }
    }
  }

  out.psi_plus = out.psi_minus = out.m_inc = out.q_plus = out.q_minus = Path(T, A);
  for (std::size_t w = 0; w < A; ++w) {
    for (std::size_t j = 1; j < T; ++j) {
      const double d = out.psi(j, w) - out.psi(j - 1, w);
      const double dp = std::max(d, 0.0), dm = std::max(-d, 0.0);
      out.psi_plus(j, w) = out.psi_plus(j - 1, w) + dp;
      out.psi_minus(j, w) = out.psi_minus(j - 1, w) + dm;
      const double denom = 1.0 + out.psi_plus(j, w) + out.psi_minus(j, w);
      const double mass = (dp + dm) / (denom * denom);
      out.m_inc(j, w) = mass;
      if (mass > 0.0) {
        out.q_plus(j, w) = dp / mass;
        out.q_minus(j, w) = dm / mass;
      }
    }
  }
  return out;
}

Path psi_integral(const PsiResult& psi, const Path& f) {
  Path out(psi.psi.steps(), psi.psi.atoms());
  for (std::size_t w = 0; w < out.atoms(); ++w) {
    for (std::size_t j = 1; j < out.steps(); ++j) {
      out(j, w) = out(j - 1, w) +
                  f(j - 1, w) * (psi.q_plus(j, w) - psi.q_minus(j, w)) * psi.m_inc(j, w);
    }
  }
  return out;
}

PsiInvariants psi_invariants(const EnlargementSetup& s, const Path& vhat, std::size_t r,
                             const PsiResult& psi) {
  PsiInvariants inv;
  const auto& d = s.d_set(r);
  const double sup_p = jordan_sup(vhat, d, true), sup_m = jordan_sup(vhat, d, false);
  for (std::size_t w = 0; w < s.atoms(); ++w) {
    const std::size_t R = psi.r_time[w];
    for (std::size_t j = 0; j < s.steps(); ++j) {
      if (d[w]) inv.on_d_dev = std::max(inv.on_d_dev, std::abs(psi.psi(j, w) - vhat(j, w)));
      if (R != kNever && j > R) inv.off_support_dm = std::max(inv.off_support_dm, psi.m_inc(j, w));
      if (psi.m_inc(j, w) > 0.0) {
        inv.bound_excess = std::max({inv.bound_excess, psi.psi_plus(j, w) - sup_p,
                                     psi.psi_minus(j, w) - sup_m});
      }
    }
  }
  return inv;
}

GdeReport gde_verify(const EnlargementSetup& s, const Path& m) {
  if (!finite::is_martingale(s.space(), m, s.base())) {
    throw NotMartingale("gde_verify: M is not an F-martingale");
  }
  GdeReport rep;
  rep.g_drift = finite::dual_predictable_projection(s.space(), m, s.g());
  Path total(s.steps(), s.atoms());
  Path fhat_comp = m;
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    const RhoDrift rd = rho_drift(s, r, m);
    const Path one_d_vhat = one_d_times(rd.vhat, s.d_indicator(r));
    fhat_comp -= one_d_vhat;
    Path b = finite::dual_predictable_projection(s.space(), one_d_vhat, s.g());
    const PsiResult psi = psi_construct(s, rd.vhat, r);
    Path a = psi_integral(psi, psi.ntilde);
    rep.gdel_dev = std::max(rep.gdel_dev, finite::max_abs_diff(a, b));
    const PsiInvariants inv = psi_invariants(s, rd.vhat, r, psi);
    rep.psi.on_d_dev = std::max(rep.psi.on_d_dev, inv.on_d_dev);
    rep.psi.off_support_dm = std::max(rep.psi.off_support_dm, inv.off_support_dm);
    rep.psi.bound_excess = std::max(rep.psi.bound_excess, inv.bound_excess);
    total += b;
    rep.via_psi.push_back(std::move(a));
    rep.via_dual_proj.push_back(std::move(b));
  }
  rep.gde_dev = finite::max_abs_diff(total, rep.g_drift);
  rep.fhat_dev = finite::max_conditional_increment(s.space(), fhat_comp, s.fhat());
  return rep;
}

T3Report lemma_t3_check(const EnlargementSetup& s, std::size_t r,
                        const std::vector<std::vector<std::size_t>>& tn) {
  const std::size_t T = s.steps(), A = s.atoms();
  for (std::size_t n = 0; n < tn.size(); ++n) {
    if (tn[n].size() != A) throw GridMismatch("lemma_t3_check: stopping time size");
    if (!is_stopping_time(s.fhat(), tn[n])) {
      throw InvalidArgument("lemma_t3_check: T_" + std::to_string(n + 1) +
                            " is not an Fhat-stopping time");
    }
    for (std::size_t w = 0; n > 0 && w < A; ++w) {
      if (tn[n][w] < tn[n - 1][w]) throw InvalidArgument("lemma_t3_check: T_n not increasing");
    }
  }
  const auto& d = s.d_set(r);
  T3Report rep;
  // h[w][j]: running product of H_1..H_n at grid index j + 1.
  std::vector<std::vector<char>> h(A, std::vector<char>(T, 1));
  for (const auto& t : tn) {
    for (std::size_t j = 0; j < T; ++j) {
      for (const auto& blk : s.g().at(j).blocks()) {
        auto hit = [&](std::size_t w) { return t[w] != kNever && t[w] <= j; };
        int on_d = -1;
        bool uniform = true;
        for (std::size_t w : blk) {
          uniform = uniform && hit(w) == hit(blk.front());
          if (!d[w]) continue;
          if (on_d == -1) {
            on_d = hit(w);
          } else if (on_d != static_cast<int>(hit(w))) {
            throw NotAdapted("lemma_t3_check: {T_n <= t} not G-measurable on D");
          }
        }
        const char val = on_d != -1 ? static_cast<char>(on_d) : (uniform ? hit(blk.front()) : 1);
        for (std::size_t w : blk) h[w][j] = h[w][j] && val;
      }
    }
    std::vector<std::size_t> sn(A, kNever);
    for (std::size_t w = 0; w < A; ++w) {
      for (std::size_t j = 0; j < T; ++j) {
        if (h[w][j]) {
          sn[w] = j;
          break;
        }
      }
    }
    rep.s.push_back(std::move(sn));
  }

  const Path ntilde =
      finite::optional_projection(s.space(), Path::constant(T, s.d_indicator(r)), s.g());
  std::vector<std::size_t> R(A, kNever);
  for (std::size_t w = 0; w < A; ++w) {
    for (std::size_t j = 0; j < T; ++j) {
      if (ntilde(j, w) == 0.0) {
        R[w] = j;
        break;
      }
    }
  }

  rep.increasing = rep.g_stopping = rep.equal_on_d = true;
  for (std::size_t n = 0; n < tn.size(); ++n) {
    rep.g_stopping = rep.g_stopping && is_stopping_time(s.g(), rep.s[n]);
    for (std::size_t w = 0; w < A; ++w) {
      if (n > 0) rep.increasing = rep.increasing && rep.s[n][w] >= rep.s[n - 1][w];
      if (d[w]) rep.equal_on_d = rep.equal_on_d && rep.s[n][w] == tn[n][w];
    }
  }
  const bool unbounded = !tn.empty() && std::all_of(tn.back().begin(), tn.back().end(),
                                                    [](std::size_t x) { return x == kNever; });
  rep.claim_i = rep.claim_ii = true;
  for (std::size_t w = 0; w < A; ++w) {
    std::size_t sup = 0;
    for (const auto& sn : rep.s) sup = std::max(sup, sn[w]);
    const bool reached = std::any_of(rep.s.begin(), rep.s.end(),
                                     [&](const auto& sn) { return sn[w] >= R[w]; });
    if (unbounded) {
      rep.claim_i = rep.claim_i && sup >= R[w];
      // On a finite grid R_n = R for large n, so (ii) asks for a single S_n reaching R.
      rep.claim_ii = rep.claim_ii && reached;
    }
  }
  return rep;
}

}  // namespace enlarge::oracle
