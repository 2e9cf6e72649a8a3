// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "enlarge/error.hpp"
#include "enlarge/oracle_suite.hpp"

using namespace enlarge::oracle;
using enlarge::comb::ExtendedTime;
namespace fp = enlarge::finite;

namespace {

const ExtendedTime kInf = ExtendedTime::infinity();

// Depth-3 binary tree, 8 atoms, leaf bits read from the most significant end.
PartitionFiltration tree3() {
  std::vector<Partition> parts;
  for (std::size_t j = 0; j <= 3; ++j) {
    std::vector<long> lab(8);
    for (std::size_t w = 0; w < 8; ++w) lab[w] = static_cast<long>(w >> (3 - j));
    parts.push_back(Partition::from_labels(lab));
  }
  return PartitionFiltration({0, 1, 2, 3}, parts);
}

FiniteProbSpace skewed8() {
  std::vector<double> p{0.05, 0.10, 0.15, 0.20, 0.08, 0.12, 0.18, 0.12};
  return FiniteProbSpace(p);
}

// Independent description of a generated sigma-algebra: atoms share a block iff
// they belong to exactly the same generating events.
Partition from_events(const std::vector<std::vector<char>>& events, std::size_t atoms) {
  std::vector<std::vector<char>> sig(atoms);
  for (const auto& e : events) {
    for (std::size_t w = 0; w < atoms; ++w) sig[w].push_back(e[w]);
  }
  std::vector<long> lab(atoms, -1);
  long next = 0;
  for (std::size_t w = 0; w < atoms; ++w) {
    if (lab[w] != -1) continue;
    lab[w] = next;
    for (std::size_t v = w + 1; v < atoms; ++v) {
      if (sig[v] == sig[w]) lab[v] = next;
    }
    ++next;
  }
  return Partition::from_labels(lab);
}

// Generators of F_j v sigma(xi_i, i in sel, restricted to {xi_i <= t_j}) on the tree.
Partition enlarged_by_events(std::size_t j, const std::vector<TimeVector>& times,
                             const std::vector<std::size_t>& sel) {
  std::vector<std::vector<char>> ev;
  for (std::size_t prefix = 0; prefix < (1u << j); ++prefix) {
    std::vector<char> e(8);
    for (std::size_t w = 0; w < 8; ++w) e[w] = (w >> (3 - j)) == prefix;
    ev.push_back(e);
  }
  for (std::size_t i : sel) {
    for (double s = 0.5; s <= static_cast<double>(j); s += 0.5) {
      std::vector<char> e(8);
      for (std::size_t w = 0; w < 8; ++w) e[w] = times[w][i] == ExtendedTime(s);
      ev.push_back(e);
    }
  }
  return from_events(ev, 8);
}

// Brute-force E[x | block of w] from a partition.
double block_mean(const FiniteProbSpace& sp, const Partition& p, std::span<const double> x,
                  std::size_t w) {
  double num = 0, den = 0;
  for (std::size_t v = 0; v < sp.size(); ++v) {
    if (p.block_of(v) != p.block_of(w)) continue;
    num += sp.prob(v) * x[v];
    den += sp.prob(v);
  }
  return num / den;
}

// n = k = 2 times on the depth-3 tree with a tie on atom 5.
std::vector<TimeVector> times_n2() {
  return {{ExtendedTime(1), ExtendedTime(2)}, {ExtendedTime(3), ExtendedTime(1)},
          {ExtendedTime(2), kInf},            {kInf, ExtendedTime(2)},
          {ExtendedTime(1), ExtendedTime(3)}, {ExtendedTime(2), ExtendedTime(2)},
          {kInf, kInf},                       {ExtendedTime(3), ExtendedTime(1)}};
}

Path leaf_martingale(const FiniteProbSpace& sp, const PartitionFiltration& f) {
  std::vector<double> x{1.0, -2.0, 0.5, 3.0, -1.0, 2.0, 0.0, 4.0};
  return fp::optional_projection(sp, Path::constant(f.steps(), x), f);
}

}  // namespace

TEST(ProgressiveEnlargement, InfiniteTimesLeaveFUnchanged) {
  const auto f = tree3();
  const auto g = progressive_enlargement(f, std::vector<TimeVector>(8, TimeVector{kInf, kInf}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g.at(j), f.at(j));
}

TEST(ProgressiveEnlargement, DeterministicTimesLeaveFUnchanged) {
  const auto f = tree3();
  const auto g = progressive_enlargement(f, std::vector<TimeVector>(8, TimeVector{ExtendedTime(1.5)}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g.at(j), f.at(j));
}

TEST(ProgressiveEnlargement, MatchesGeneratedEventsOnTree) {
  const auto f = tree3();
  const std::vector<TimeVector> tau{{ExtendedTime(1)}, {ExtendedTime(3)}, {ExtendedTime(2)},
                                    {ExtendedTime(1)}, {ExtendedTime(2)}, {ExtendedTime(2)},
                                    {ExtendedTime(3)}, {ExtendedTime(1)}};
  const auto g = progressive_enlargement(f, tau);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(g.at(j), enlarged_by_events(j, tau, {0})) << "t=" << j;
    EXPECT_TRUE(g.at(j).refines(f.at(j)));
  }
  // At t=1 the first-level blocks split off {tau = 1}.
  EXPECT_EQ(g.at(1).block_count(), 4u);
}

TEST(DirectSum, DegenerateCases) {
  const auto f = tree3();
  const std::vector<std::size_t> one(8, 0);
  const auto h = direct_sum_filtration({f}, one);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(h.at(j), f.at(j));
  const std::vector<std::size_t> bad(8, 2);
  EXPECT_THROW(direct_sum_filtration({f, f}, bad), enlarge::InvalidArgument);
}

TEST(DirectSum, SingleTimeSetupIsFTau) {
  const std::vector<TimeVector> tau{{ExtendedTime(1)}, {ExtendedTime(3)}, {ExtendedTime(2)},
                                    {kInf},            {ExtendedTime(2)}, {ExtendedTime(0.5)},
                                    {ExtendedTime(3)}, {ExtendedTime(1)}};
  EnlargementSetup s(skewed8(), tree3(), tau, 1);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(s.fhat().at(j), s.f_rho(0).at(j));
    EXPECT_EQ(s.g().at(j), s.f_rho(0).at(j));
  }
}

TEST(DirectSum, WorkedExampleBlocks) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 2);
  ASSERT_EQ(s.injections().size(), 2u);
  // Atom 1 (tau = (3,1)) and atoms 3, 7 sort the other way round.
  const std::vector<std::size_t> expect_label{0, 1, 0, 1, 0, 0, 0, 1};
  for (std::size_t w = 0; w < 8; ++w) EXPECT_EQ(s.label()[w], expect_label[w]) << w;
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t v = 0; v < 8; ++v) {
      for (std::size_t w = 0; w < 8; ++w) {
        const std::size_t r = s.label()[v];
        const bool same = s.label()[w] == r && s.f_rho(r).at(j).block_of(v) == s.f_rho(r).at(j).block_of(w);
        EXPECT_EQ(s.fhat().at(j).block_of(v) == s.fhat().at(j).block_of(w), same);
      }
    }
    EXPECT_EQ(s.f_rho(0).at(j), enlarged_by_events(j, s.times(), {0, 1}));
    EXPECT_EQ(s.f_rho(1).at(j), enlarged_by_events(j, s.times(), {1, 0}));
  }
}

TEST(HypG, HoldsOnWorkedExampleAndRandomTrees) {
  EXPECT_TRUE(check_hyp_g(EnlargementSetup(skewed8(), tree3(), times_n2(), 1)).ok());
  EXPECT_TRUE(check_hyp_g(EnlargementSetup(skewed8(), tree3(), times_n2(), 2)).ok());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = make_random_instance({4, 2, 3, 1 + seed % 3, seed});
    EXPECT_TRUE(check_hyp_g(inst.setup).ok()) << seed;
  }
}

TEST(Projections, NRhoTableByEnumeration) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    const auto d = s.d_indicator(r);
    const Path n = fp::optional_projection(s.space(), Path::constant(4, d), s.f_rho(r));
    for (std::size_t j = 0; j < 4; ++j) {
      const Partition blocks = enlarged_by_events(j, s.times(), s.injections()[r]);
      for (std::size_t w = 0; w < 8; ++w) {
        EXPECT_NEAR(n(j, w), block_mean(s.space(), blocks, d, w), 1e-15);
      }
    }
  }
}

TEST(Projections, BracketTableByEnumeration) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const Path m = leaf_martingale(s.space(), s.base());
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    const RhoDrift rd = rho_drift(s, r, m);
    const Path mr = m - rd.k;
    for (std::size_t w = 0; w < 8; ++w) {
      double acc = 0.0;
      for (std::size_t j = 1; j < 4; ++j) {
        const Partition prev = enlarged_by_events(j - 1, s.times(), s.injections()[r]);
        std::vector<double> prod(8);
        for (std::size_t v = 0; v < 8; ++v) {
          prod[v] = (rd.n(j, v) - rd.n(j - 1, v)) * (mr(j, v) - mr(j - 1, v));
        }
        acc += block_mean(s.space(), prev, prod, w);
        EXPECT_NEAR(rd.bracket(j, w), acc, 1e-14);
      }
    }
  }
}

TEST(ConditioningIdentity, ConstantAndIndicatorAndRandom) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 2);
  const std::vector<double> one(8, 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<double> eta(8);
  for (auto& v : eta) v = nd(rng);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_LE(lemma_cond_check(s, one, j), 1e-15);
    EXPECT_LE(lemma_cond_check(s, s.d_indicator(0), j), 1e-15);
    EXPECT_LE(lemma_cond_check(s, eta, j), 1e-12);
  }
}

TEST(Decompminmax, SingleInjectionAndConstant) {
  const std::vector<TimeVector> tau(8, TimeVector{ExtendedTime(2)});
  EnlargementSetup s1(skewed8(), tree3(), tau, 1);
  const Path m = leaf_martingale(s1.space(), s1.base());
  EXPECT_LE(decompminmax_check(s1, 0, m), 1e-14);

  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const Path c = Path::constant(4, std::vector<double>(8, 3.0));
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_LE(decompminmax_check(s, r, c), 1e-15);
    EXPECT_LE(decompminmax_check(s, r, m - rho_drift(s, r, m).k), 1e-12);
  }
  EXPECT_THROW(decompminmax_check(s, 0, fp::hadamard(m, m)), enlarge::NotMartingale);
}

TEST(FhatDecomposition, WorkedExample) {
  for (std::size_t k = 1; k <= 2; ++k) {
    EnlargementSetup s(skewed8(), tree3(), times_n2(), k);
    EXPECT_LE(fhat_decomp_check(s, leaf_martingale(s.space(), s.base())), 1e-12);
  }
}

TEST(Psi, WholeSpaceIsIdentity) {
  const std::vector<TimeVector> tau{{ExtendedTime(1)}, {ExtendedTime(3)}, {ExtendedTime(2)},
                                    {kInf},            {ExtendedTime(2)}, {ExtendedTime(0.5)},
                                    {ExtendedTime(3)}, {ExtendedTime(1)}};
  EnlargementSetup s(skewed8(), tree3(), tau, 1);
  const RhoDrift rd = rho_drift(s, 0, leaf_martingale(s.space(), s.base()));
  const PsiResult p = psi_construct(s, rd.vhat, 0);
  EXPECT_LE(fp::max_abs_diff(p.psi, rd.vhat), 1e-15);
  for (std::size_t w = 0; w < 8; ++w) {
    EXPECT_EQ(p.r_time[w], kNever);
    for (std::size_t j = 1; j < 4; ++j) {
      const double dv = rd.vhat(j, w) - rd.vhat(j - 1, w);
      EXPECT_EQ(p.m_inc(j, w) > 0.0, dv != 0.0);
      EXPECT_NEAR((p.q_plus(j, w) - p.q_minus(j, w)) * p.m_inc(j, w), dv, 1e-15);
    }
  }
}

TEST(Psi, ZeroInputGivesZero) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const PsiResult p = psi_construct(s, Path(4, 8), 0);
  EXPECT_EQ(p.psi.max_abs(), 0.0);
  EXPECT_EQ(p.m_inc.max_abs(), 0.0);
}

TEST(Psi, CasesWhenNtildeHitsZero) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const Path m = leaf_martingale(s.space(), s.base());
  for (std::size_t r = 0; r < 2; ++r) {
    const RhoDrift rd = rho_drift(s, r, m);
    const PsiResult p = psi_construct(s, rd.vhat, r);
    bool hit = false;
    for (std::size_t w = 0; w < 8; ++w) {
      const std::size_t R = p.r_time[w];
      if (s.d_set(r)[w]) {
        EXPECT_EQ(R, kNever);
        continue;
      }
      if (R == kNever) continue;
      hit = true;
      ASSERT_GE(R, 1u);
      EXPECT_GT(p.ntilde(R - 1, w), 0.0);
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(p.psi(j, w), j <= R ? p.v(j, w) : p.v(R, w));
        if (j > R) EXPECT_EQ(p.m_inc(j, w), 0.0);
      }
    }
    EXPECT_TRUE(hit) << "example should leave D_rho on some path";
    const auto inv = psi_invariants(s, rd.vhat, r, p);
    EXPECT_LE(inv.on_d_dev, 1e-15);
    EXPECT_EQ(inv.off_support_dm, 0.0);
    EXPECT_LE(inv.bound_excess, 1e-15);
  }
}

TEST(Psi, RejectsNonzeroStart) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  EXPECT_THROW(psi_construct(s, Path(4, 8, 1.0), 0), enlarge::InvalidArgument);
}

TEST(Gde, ConstantMartingaleHasZeroDrifts) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const auto rep = gde_verify(s, Path::constant(4, std::vector<double>(8, 1.5)));
  EXPECT_EQ(rep.g_drift.max_abs(), 0.0);
  for (const auto& a : rep.via_psi) EXPECT_EQ(a.max_abs(), 0.0);
}

TEST(Gde, TimesIndependentOfBase) {
  // Times depend on the hidden state only, so they carry no information about the leaf.
  const auto inst0 = make_random_instance({4, 3, 2, 1, 99});
  const auto& s0 = inst0.setup;
  std::vector<TimeVector> tau(s0.atoms());
  const TimeVector by_hidden[3] = {{ExtendedTime(1), ExtendedTime(2.5)},
                                   {ExtendedTime(3), ExtendedTime(0.5)},
                                   {kInf, ExtendedTime(2)}};
  for (std::size_t w = 0; w < tau.size(); ++w) tau[w] = by_hidden[w % 3];
  EnlargementSetup s(s0.space(), s0.base(), tau, 1);
  const auto rep = gde_verify(s, inst0.m);
  EXPECT_LE(rep.gde_dev, 1e-10);
  EXPECT_LE(rep.gdel_dev, 1e-10);
}

TEST(Gde, RandomDepth4Trees) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = make_random_instance({4, 2 + seed % 2, 2, 1 + seed % 2, seed});
    const auto rep = gde_verify(inst.setup, inst.m);
    ASSERT_LE(rep.gde_dev, 1e-10) << seed;
    ASSERT_LE(rep.gdel_dev, 1e-10) << seed;
    ASSERT_LE(rep.fhat_dev, 1e-10) << seed;
  }
}

TEST(Gde, RejectsNonMartingale) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const Path m = leaf_martingale(s.space(), s.base());
  EXPECT_THROW(gde_verify(s, fp::hadamard(m, m)), enlarge::NotMartingale);
}

TEST(StoppingTimeTransfer, ConstantTimes) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const std::vector<std::vector<std::size_t>> tn{std::vector<std::size_t>(8, 1),
                                                 std::vector<std::size_t>(8, 2)};
  const auto rep = lemma_t3_check(s, 0, tn);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.s[0], tn[0]);
  EXPECT_EQ(rep.s[1], tn[1]);
}

TEST(StoppingTimeTransfer, NeverReachesR) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  const std::vector<std::vector<std::size_t>> tn{std::vector<std::size_t>(8, 2),
                                                 std::vector<std::size_t>(8, kNever)};
  const auto rep = lemma_t3_check(s, 1, tn);
  EXPECT_TRUE(rep.claim_i);
  EXPECT_TRUE(rep.ok());
}

TEST(StoppingTimeTransfer, RandomStoppingTimes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = make_random_instance({3, 2, 2, 1 + seed % 2, seed});
    for (std::size_t r = 0; r < inst.setup.injections().size(); ++r) {
      EXPECT_TRUE(lemma_t3_check(inst.setup, r, inst.stopping[r]).ok()) << seed;
    }
  }
}

TEST(StoppingTimeTransfer, RejectsNonStoppingTime) {
  EnlargementSetup s(skewed8(), tree3(), times_n2(), 1);
  std::vector<std::size_t> t(8, 1);
  t[0] = 0;  // {T <= 0} is not F-hat_0 measurable
  EXPECT_THROW(lemma_t3_check(s, 0, {t}), enlarge::InvalidArgument);
}

TEST(OracleSuite, SerialAndOpenMPAgree) {
  const auto specs = suite_specs({12, 2, 4, 1, 3, 0, 5});
  const auto a = run_oracle_suite(specs, enlarge::Exec::serial);
  const auto b = run_oracle_suite(specs, enlarge::Exec::openmp);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].gde_dev, b[i].gde_dev);
    EXPECT_EQ(a[i].gdel_dev, b[i].gdel_dev);
    EXPECT_EQ(a[i].cond_dev, b[i].cond_dev);
    EXPECT_TRUE(a[i].hyp_g && a[i].psi_ok && a[i].t3_ok);
  }
}
