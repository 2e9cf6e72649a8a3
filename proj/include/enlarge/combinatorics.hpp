// SPDX-License-Identifier: Apache-2.0
//
// Ordering and selection of several random times. Indices are 0-based
// throughout: an injection of {0..k-1} into {0..n-1} is stored as its image
// sequence.
#pragma once

#include <compare>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace enlarge::comb {

/// A time in [0, inf]; infinity is a distinguished state, not a large double.
class ExtendedTime {
 public:
  constexpr ExtendedTime() = default;
  constexpr explicit ExtendedTime(double v) : v_(v), inf_(false) {}
  static constexpr ExtendedTime infinity() {
    ExtendedTime t;
    t.inf_ = true;
    return t;
  }

  constexpr bool is_infinite() const noexcept { return inf_; }
  /// Finite value; +inf as a double when infinite (never use it in arithmetic).
  constexpr double value() const noexcept {
    return inf_ ? std::numeric_limits<double>::infinity() : v_;
  }

  friend constexpr bool operator==(const ExtendedTime& a, const ExtendedTime& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.v_ == b.v_);
  }
  friend constexpr std::partial_ordering operator<=>(const ExtendedTime& a,
                                                     const ExtendedTime& b) {
    if (a.inf_ || b.inf_) return a.inf_ <=> b.inf_;
    return a.v_ <=> b.v_;
  }

  std::string str() const;

 private:
  double v_ = 0.0;
  bool inf_ = false;
};

/// a if a <= b, infinity otherwise.
constexpr ExtendedTime cap(ExtendedTime a, ExtendedTime b) {
  return a <= b ? a : ExtendedTime::infinity();
}

struct RankResult {
  std::vector<std::size_t> ranks;    ///< ranks[i]: position of a_i in the sorted order
  std::vector<std::size_t> inverse;  ///< inverse[r]: index holding rank r
  std::vector<ExtendedTime> sorted;  ///< nondecreasing; ties broken by index
};

/// rank(i) = #{j : a_j < a_i} + #{j < i : a_j = a_i}.
RankResult rank_and_sort(std::span<const ExtendedTime> a);

using Injection = std::vector<std::size_t>;
using Permutation = std::vector<std::size_t>;  ///< p[x] = image of x

/// All n!/(n-k)! injections {0..k-1} -> {0..n-1}, lexicographic in their images.
std::vector<Injection> enumerate_injections(std::size_t k, std::size_t n);

/// All n! permutations, lexicographic.
std::vector<Permutation> enumerate_permutations(std::size_t n);

/// Position of `rho` in enumerate_injections(k, n).
std::size_t injection_index(const Injection& rho, std::size_t n);

/// True if the k smallest times equal (tau_{rho(0)}, ..., tau_{rho(k-1)}).
bool in_d_rho(std::span<const ExtendedTime> tau, const Injection& rho);

/// The lexicographically first injection satisfying in_d_rho.
Injection partition_label(std::span<const ExtendedTime> tau, std::size_t k);

/// Permutations p of {0..n-1} with p[rho[i]] = i for every i < k.
std::vector<Permutation> fixing_permutations(const Injection& rho, std::size_t n);

/// y with y[m] = x[p[m]].
template <class T>
std::vector<T> permute(const Permutation& p, std::span<const T> x) {
  std::vector<T> y(x.size());
  for (std::size_t m = 0; m < x.size(); ++m) y[m] = x[p[m]];
  return y;
}

std::string to_string(const Injection& rho);

}  // namespace enlarge::comb
