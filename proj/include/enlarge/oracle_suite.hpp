// SPDX-License-Identifier: Apache-2.0
//
// Randomized finite trees for the exact enlargement checks. Atoms are
// (leaf, hidden state) pairs: the base filtration reveals the leaf path one
// branch per step and never the hidden state, so the random times are not
// base-adapted and ties between them are common.
#pragma once

#include <cstdint>
#include <vector>

#include "enlarge/enlargement_oracle.hpp"
#include "enlarge/parallel.hpp"

namespace enlarge::oracle {

struct TreeSpec {
  std::size_t depth = 3;   ///< binary tree depth, grid 0..depth
  std::size_t hidden = 2;  ///< hidden states per leaf
  std::size_t n = 2;
  std::size_t k = 1;
  std::uint64_t seed = 0;
};

struct RandomInstance {
  EnlargementSetup setup;
  Path m;                     ///< F-martingale E[X | F_j]
  std::vector<double> eta;    ///< random variable for the conditioning identity
  std::vector<Path> m_rho;    ///< one extra F^rho-martingale per injection
  std::vector<std::vector<std::vector<std::size_t>>> stopping;  ///< per rho: increasing Fhat-stopping times
};

RandomInstance make_random_instance(const TreeSpec& spec);

struct InstanceResult {
  TreeSpec spec;
  std::size_t atoms = 0;
  double gde_dev = 0;
  double gdel_dev = 0;
  double fhat_dev = 0;
  double decompminmax_dev = 0;
  double cond_dev = 0;
  bool hyp_g = false;
  bool psi_ok = false;
  bool t3_ok = false;
};

InstanceResult run_instance(const TreeSpec& spec);

struct SuiteConfig {
  std::size_t seeds = 50;
  std::size_t depth_lo = 2, depth_hi = 5;
  std::size_t n_lo = 1, n_hi = 3;
  std::size_t k = 0;  ///< 0: drawn uniformly from 1..n per instance
  std::uint64_t master_seed = 1;
};

/// Instance i draws depth, hidden-state count, n and k from a stream keyed by (master_seed, i).
std::vector<TreeSpec> suite_specs(const SuiteConfig& cfg);

std::vector<InstanceResult> run_oracle_suite(const std::vector<TreeSpec>& specs, Exec exec);

}  // namespace enlarge::oracle
