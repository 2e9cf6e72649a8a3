// SPDX-License-Identifier: Apache-2.0
#include "enlarge/combinatorics.hpp"

#include <algorithm>
#include <numeric>

#include "enlarge/error.hpp"

namespace enlarge::comb {

std::string ExtendedTime::str() const { return inf_ ? "inf" : std::to_string(v_); }

RankResult rank_and_sort(std::span<const ExtendedTime> a) {
  const std::size_t k = a.size();
  RankResult r;
  r.ranks.resize(k);
  r.inverse.resize(k);
  r.sorted.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t rank = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (a[j] < a[i] || (j < i && a[j] == a[i])) ++rank;
    }
    r.ranks[i] = rank;
  }
  for (std::size_t i = 0; i < k; ++i) {
    r.inverse[r.ranks[i]] = i;
  }
  for (std::size_t p = 0; p < k; ++p) r.sorted[p] = a[r.inverse[p]];
  return r;
}

std::vector<Injection> enumerate_injections(std::size_t k, std::size_t n) {
  if (k == 0 || k > n) {
    throw InvalidArgument("enumerate_injections: need 1 <= k <= n, got k=" + std::to_string(k) +
                          " n=" + std::to_string(n));
  }
  std::vector<Injection> out;
  Injection cur;
  std::vector<char> used(n, 0);
  auto rec = [&](auto&& self) -> void {
    if (cur.size() == k) {
      out.push_back(cur);
      return;
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (used[x]) continue;
      used[x] = 1;
      cur.push_back(x);
      self(self);
      cur.pop_back();
      used[x] = 0;
    }
  };
  rec(rec);
  return out;
}

std::vector<Permutation> enumerate_permutations(std::size_t n) {
  std::vector<Permutation> out;
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::size_t injection_index(const Injection& rho, std::size_t n) {
  // Mixed-radix rank: position i has n - i choices.
  std::vector<char> used(n, 0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] >= n || used[rho[i]]) throw InvalidArgument("injection_index: not an injection");
    std::size_t smaller = 0;
    for (std::size_t x = 0; x < rho[i]; ++x) smaller += used[x] ? 0 : 1;
    std::size_t block = 1;
    for (std::size_t m = i + 1; m < rho.size(); ++m) block *= n - m;
    idx += smaller * block;
    used[rho[i]] = 1;
  }
  return idx;
}

bool in_d_rho(std::span<const ExtendedTime> tau, const Injection& rho) {
  const RankResult r = rank_and_sort(tau);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!(tau[rho[i]] == r.sorted[i])) return false;
  }
  return true;
}

Injection partition_label(std::span<const ExtendedTime> tau, std::size_t k) {
  if (k == 0 || k > tau.size()) throw InvalidArgument("partition_label: need 1 <= k <= n");
  // Among equal values the smallest unused index comes first, which is both the
  // rank tie-break and the lexicographically first admissible injection.
  const RankResult r = rank_and_sort(tau);
  return Injection(r.inverse.begin(), r.inverse.begin() + static_cast<std::ptrdiff_t>(k));
}

std::vector<Permutation> fixing_permutations(const Injection& rho, std::size_t n) {
  const std::size_t k = rho.size();
  if (k > n) throw InvalidArgument("fixing_permutations: k > n");
  std::vector<char> in_image(n, 0);
  for (std::size_t x : rho) {
    if (x >= n || in_image[x]) throw InvalidArgument("fixing_permutations: not an injection");
    in_image[x] = 1;
  }
  std::vector<std::size_t> rest;
  for (std::size_t x = 0; x < n; ++x) {
    if (!in_image[x]) rest.push_back(x);
  }
  std::vector<std::size_t> targets(n - k);
  std::iota(targets.begin(), targets.end(), k);
  std::vector<Permutation> out;
  do {
    Permutation p(n);
    for (std::size_t i = 0; i < k; ++i) p[rho[i]] = i;
    for (std::size_t m = 0; m < rest.size(); ++m) p[rest[m]] = targets[m];
    out.push_back(std::move(p));
  } while (std::next_permutation(targets.begin(), targets.end()));
  return out;
}

std::string to_string(const Injection& rho) {
  std::string s = "(";
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(rho[i] + 1);
  }
  return s + ")";
}

}  // namespace enlarge::comb
