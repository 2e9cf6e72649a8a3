// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "enlarge/error.hpp"
#include "enlarge/finite_prob.hpp"

using namespace enlarge::finite;

namespace {

// Omega = {-1,+1}^T, uniform; F_j = first j coordinates; grid 0..T.
struct Walk {
  std::size_t T;
  FiniteProbSpace space;
  PartitionFiltration f;
  Path s;  // S_j = sum of first j steps

  explicit Walk(std::size_t steps) : T(steps), space(uniform(1u << steps)), f(build(steps)), s(steps + 1, 1u << steps) {
    for (std::size_t w = 0; w < (1u << T); ++w) {
      for (std::size_t j = 1; j <= T; ++j) s(j, w) = s(j - 1, w) + step(w, j);
    }
  }
  static double step(std::size_t w, std::size_t j) { return (w >> (j - 1)) & 1u ? 1.0 : -1.0; }
  static std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / n); }
  static PartitionFiltration build(std::size_t T) {
    std::vector<double> grid;
    std::vector<Partition> parts;
    const std::size_t n = 1u << T;
    for (std::size_t j = 0; j <= T; ++j) {
      std::vector<long> lab(n);
      for (std::size_t w = 0; w < n; ++w) lab[w] = static_cast<long>(w & ((1u << j) - 1));
      grid.push_back(static_cast<double>(j));
      parts.push_back(Partition::from_labels(lab));
    }
    return PartitionFiltration(grid, parts);
  }
};

std::vector<double> random_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(n);
  double tot = 0;
  for (auto& x : w) tot += (x = u(rng));
  for (auto& x : w) x /= tot;
  return w;
}

}  // namespace

TEST(FiniteProbSpace, RejectsBadWeights) {
  EXPECT_THROW(FiniteProbSpace({0.5, 0.5, 0.0}), enlarge::InvalidArgument);
  EXPECT_THROW(FiniteProbSpace({0.6, 0.6}), enlarge::InvalidArgument);
  EXPECT_NO_THROW(FiniteProbSpace({0.25, 0.75}));
}

TEST(Partition, FromBlocksValidates) {
  EXPECT_THROW(Partition::from_blocks({{0, 1}, {1, 2}}, 3), enlarge::InvalidArgument);
  EXPECT_THROW(Partition::from_blocks({{0, 1}}, 3), enlarge::InvalidArgument);
  const Partition p = Partition::from_blocks({{2}, {0, 1}}, 3);
  EXPECT_EQ(p.block_count(), 2u);
  EXPECT_EQ(p.block_of(0), p.block_of(1));
}

TEST(Partition, JoinAndSameOn) {
  const Partition a = Partition::from_blocks({{0, 1}, {2, 3}}, 4);
  const Partition b = Partition::from_blocks({{0, 2}, {1, 3}}, 4);
  EXPECT_EQ(a.join(b), Partition::discrete(4));
  EXPECT_TRUE(a.join(b).refines(a));
  const std::vector<char> sub{1, 1, 0, 0};
  EXPECT_FALSE(a.same_on(b, sub));
  EXPECT_TRUE(a.same_on(Partition::trivial(4), sub));
}

TEST(ConditionalExpectation, BlockAverages) {
  FiniteProbSpace sp({0.25, 0.25, 0.25, 0.25});
  const std::vector<double> x{1, 3, 2, 6};
  const auto ce = conditional_expectation(sp, x, Partition::from_blocks({{0, 1}, {2, 3}}, 4));
  EXPECT_EQ(ce, (std::vector<double>{2, 2, 4, 4}));
  EXPECT_EQ(conditional_expectation(sp, x, Partition::discrete(4)), x);
  EXPECT_EQ(conditional_expectation(sp, x, Partition::trivial(4)),
            (std::vector<double>{3, 3, 3, 3}));
}

TEST(ConditionalExpectation, TowerPropertyRandomized) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<long> lab(0, 5);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 12;
    FiniteProbSpace sp(random_weights(n, rng));
    std::vector<long> coarse(n), fine(n);
    for (std::size_t w = 0; w < n; ++w) {
      coarse[w] = lab(rng) % 3;
      fine[w] = coarse[w] * 10 + lab(rng);
    }
    const Partition P = Partition::from_labels(coarse), Q = Partition::from_labels(fine);
    ASSERT_TRUE(Q.refines(P));
    std::vector<double> x(n);
    for (auto& v : x) v = nd(rng);
    const auto lhs = conditional_expectation(sp, conditional_expectation(sp, x, Q), P);
    const auto rhs = conditional_expectation(sp, x, P);
    for (std::size_t w = 0; w < n; ++w) EXPECT_NEAR(lhs[w], rhs[w], 1e-12);
  }
}

TEST(Projections, ConstantAndMeasurable) {
  Walk wk(3);
  const std::size_t n = wk.space.size();
  const Path c = Path::constant(4, std::vector<double>(n, 2.5));
  EXPECT_EQ(max_abs_diff(optional_projection(wk.space, c, wk.f), c), 0.0);
  // first step indicator is measurable from t_1 onwards
  std::vector<double> ind(n);
  for (std::size_t w = 0; w < n; ++w) ind[w] = Walk::step(w, 1) > 0 ? 1.0 : 0.0;
  const Path op = optional_projection(wk.space, Path::constant(4, ind), wk.f);
  for (std::size_t w = 0; w < n; ++w) {
    EXPECT_DOUBLE_EQ(op(0, w), 0.5);
    for (std::size_t j = 1; j <= 3; ++j) EXPECT_DOUBLE_EQ(op(j, w), ind[w]);
  }
}

TEST(Projections, PredictableOfMartingaleIsShift) {
  Walk wk(4);
  const Path pp = predictable_projection(wk.space, wk.s, wk.f);
  for (std::size_t w = 0; w < wk.space.size(); ++w) {
    EXPECT_DOUBLE_EQ(pp(0, w), 0.0);
    for (std::size_t j = 1; j <= 4; ++j) EXPECT_DOUBLE_EQ(pp(j, w), wk.s(j - 1, w));
  }
}

TEST(Projections, PredictableOfIndicatorTwoStep) {
  // D = {S_2 = 2}: predictable projection is 0, 1/4 at t_0 and t_1 start, then 1/2 or 0.
  Walk wk(2);
  std::vector<double> d(4);
  for (std::size_t w = 0; w < 4; ++w) d[w] = wk.s(2, w) == 2.0 ? 1.0 : 0.0;
  const Path pp = predictable_projection(wk.space, Path::constant(3, d), wk.f);
  for (std::size_t w = 0; w < 4; ++w) {
    EXPECT_DOUBLE_EQ(pp(0, w), 0.25);
    EXPECT_DOUBLE_EQ(pp(1, w), 0.25);
    EXPECT_DOUBLE_EQ(pp(2, w), Walk::step(w, 1) > 0 ? 0.5 : 0.0);
  }
}

TEST(Projections, GridMismatchThrows) {
  Walk wk(3);
  EXPECT_THROW(optional_projection(wk.space, Path(3, wk.space.size()), wk.f),
               enlarge::GridMismatch);
}

TEST(DualProjection, PredictableInputIsFixed) {
  Walk wk(3);
  Path v(4, wk.space.size());
  for (std::size_t w = 0; w < wk.space.size(); ++w) {
    for (std::size_t j = 1; j <= 3; ++j) v(j, w) = v(j - 1, w) + std::abs(wk.s(j - 1, w)) + 1.0;
  }
  EXPECT_LE(max_abs_diff(dual_predictable_projection(wk.space, v, wk.f), v), 1e-14);
}

TEST(DualProjection, IndependentLastStepGivesMean) {
  Walk wk(3);
  Path v(4, wk.space.size());
  for (std::size_t w = 0; w < wk.space.size(); ++w) v(3, w) = Walk::step(w, 3) > 0 ? 3.0 : 1.0;
  const Path a = dual_predictable_projection(wk.space, v, wk.f);
  for (std::size_t w = 0; w < wk.space.size(); ++w) {
    EXPECT_DOUBLE_EQ(a(2, w), 0.0);
    EXPECT_DOUBLE_EQ(a(3, w), 2.0);
  }
}

TEST(DualProjection, DualityAgainstPredictableBlockIndicators) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Walk wk(4);
  FiniteProbSpace sp(random_weights(wk.space.size(), rng));
  Path v(5, sp.size());
  for (std::size_t w = 0; w < sp.size(); ++w) {
    for (std::size_t j = 1; j <= 4; ++j) v(j, w) = v(j - 1, w) + nd(rng);
  }
  const Path a = dual_predictable_projection(sp, v, wk.f);
  const Path dv = v.increments(), da = a.increments();
  for (std::size_t j = 1; j <= 4; ++j) {
    for (const auto& blk : wk.f.at(j - 1).blocks()) {
      double lhs = 0, rhs = 0;
      for (std::size_t w : blk) {
        lhs += sp.prob(w) * dv(j, w);
        rhs += sp.prob(w) * da(j, w);
      }
      EXPECT_NEAR(lhs, rhs, 1e-14);
    }
  }
}

TEST(Doob, MartingaleHasZeroDrift) {
  Walk wk(4);
  const auto d = doob_decomposition(wk.space, wk.s, wk.f);
  EXPECT_LE(d.drift.max_abs(), 1e-15);
}

TEST(Doob, PredictableIncreasingIsAllDrift) {
  Walk wk(3);
  Path x(4, wk.space.size());
  for (std::size_t w = 0; w < wk.space.size(); ++w) {
    x(0, w) = 5.0;
    for (std::size_t j = 1; j <= 3; ++j) x(j, w) = x(j - 1, w) + 1.0 + (wk.s(j - 1, w) > 0);
  }
  const auto d = doob_decomposition(wk.space, x, wk.f);
  for (double m : d.martingale.data()) EXPECT_DOUBLE_EQ(m, 5.0);
}

TEST(Doob, SquaredWalkDriftIsTime) {
  Walk wk(5);
  const Path sq = hadamard(wk.s, wk.s);
  const auto d = doob_decomposition(wk.space, sq, wk.f);
  for (std::size_t j = 0; j <= 5; ++j) {
    for (std::size_t w = 0; w < wk.space.size(); ++w) {
      EXPECT_NEAR(d.drift(j, w), static_cast<double>(j), 1e-12);
    }
  }
  EXPECT_LE(max_abs_diff(d.martingale + d.drift, sq), 1e-12);
  EXPECT_LE(max_conditional_increment(wk.space, d.martingale, wk.f), 1e-12);
}

TEST(Doob, NotAdaptedThrows) {
  Walk wk(2);
  Path x(3, 4);
  for (std::size_t w = 0; w < 4; ++w) x(1, w) = wk.s(2, w);
  EXPECT_THROW(doob_decomposition(wk.space, x, wk.f), enlarge::NotAdapted);
}

TEST(Bracket, WalkBracketIsTime) {
  Walk wk(4);
  const Path b = predictable_bracket(wk.space, wk.s, wk.s, wk.f);
  for (std::size_t j = 0; j <= 4; ++j) {
    for (std::size_t w = 0; w < wk.space.size(); ++w) EXPECT_NEAR(b(j, w), double(j), 1e-12);
  }
}

TEST(Bracket, IndependentIncrementsGiveZero) {
  // M moves only on odd steps, N only on even steps.
  Walk wk(4);
  Path m(5, 16), n(5, 16);
  for (std::size_t w = 0; w < 16; ++w) {
    for (std::size_t j = 1; j <= 4; ++j) {
      m(j, w) = m(j - 1, w) + (j % 2 ? Walk::step(w, j) : 0.0);
      n(j, w) = n(j - 1, w) + (j % 2 ? 0.0 : Walk::step(w, j));
    }
  }
  EXPECT_LE(predictable_bracket(wk.space, m, n, wk.f).max_abs(), 1e-15);
}

TEST(Bracket, NondecreasingSymmetricBilinear) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Walk wk(4);
  FiniteProbSpace sp(random_weights(16, rng));
  auto random_martingale = [&]() {
    std::vector<double> xi(16);
    for (auto& v : xi) v = nd(rng);
    return optional_projection(sp, Path::constant(5, xi), wk.f);
  };
  const Path m = random_martingale(), n = random_martingale();
  const Path bmm = predictable_bracket(sp, m, m, wk.f);
  for (std::size_t j = 1; j <= 4; ++j) {
    for (std::size_t w = 0; w < 16; ++w) EXPECT_GE(bmm(j, w), bmm(j - 1, w) - 1e-15);
  }
  EXPECT_LE(max_abs_diff(predictable_bracket(sp, m, n, wk.f), predictable_bracket(sp, n, m, wk.f)), 1e-14);
  const Path lhs = predictable_bracket(sp, m + n, m, wk.f);
  EXPECT_LE(max_abs_diff(lhs, bmm + predictable_bracket(sp, n, m, wk.f)), 1e-12);
}

TEST(Bracket, NonMartingaleThrows) {
  Walk wk(3);
  const Path sq = hadamard(wk.s, wk.s);
  EXPECT_THROW(predictable_bracket(wk.space, sq, wk.s, wk.f), enlarge::NotMartingale);
}
