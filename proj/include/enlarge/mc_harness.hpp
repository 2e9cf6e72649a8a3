// SPDX-License-Identifier: Apache-2.0
//
// Binned conditional-mean tests of the martingale property. For each
// checkpoint pair (s, t) paths are grouped by events known at s and the mean
// of X_t - X_s in every group is tested against zero with a Sidak correction
// over all groups and checkpoints.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enlarge/density_model.hpp"
#include "enlarge/parallel.hpp"

namespace enlarge::mc {

struct Checkpoint {
  std::size_t s = 0;  ///< grid index
  std::size_t t = 0;  ///< grid index, t > s
};

struct MartingaleTestConfig {
  std::size_t n_paths = 100000;
  std::size_t steps = 200;
  std::vector<Checkpoint> checkpoints{{0, 50}, {50, 100}, {100, 150}, {150, 200}};
  std::size_t w_bins = 4;     ///< W_s quantile bins
  std::size_t time_bins = 2;  ///< quantile bins of the last occurred sorted time
  std::size_t min_bin = 200;  ///< smaller bins are merged into a neighbour
  double alpha = 0.01;        ///< family-wise level
  std::uint64_t seed = 1;
  Exec exec = Exec::openmp;
};

struct BinResult {
  std::size_t checkpoint = 0;
  std::string label;  ///< e.g. "w0-3/j1/t0-1" after merging
  std::size_t count = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
};

struct TestReport {
  std::string name;
  std::vector<BinResult> bins;
  double max_abs_z = 0.0;
  double z_critical = 0.0;  ///< two-sided Sidak-corrected critical value
  bool pass = false;
  // metadata
  std::uint64_t seed = 0;
  std::size_t n_paths = 0;
  std::size_t steps = 0;
  double alpha = 0.0;
  double t_max = 0.0;
};

enum class DriftProducer {
  sorted,          ///< drift_sorted (tabulated)
  zero,            ///< no compensator (negative control when loadings are nonzero)
  weight_swapped,  ///< drift_sorted with every weight a_tilde^rho / a_tilde replaced by 1
  tau_rho,         ///< drift_tau_rho for rho = (0, ..., k-1), tested on F^{tau_rho} bins
};

DriftProducer parse_producer(const std::string& s);
std::string to_string(DriftProducer p);

/// Tests that M - drift is a martingale in the enlarged filtration. Throws
/// InvalidArgument if bin merging leaves no testable bin.
TestReport martingale_test(const model::LognormalFactorModel& m, std::size_t k, DriftProducer producer,
                           const MartingaleTestConfig& cfg);

enum class DensityVariant {
  exact,              ///< the model's conditional density
  product_form,       ///< product of the marginal lognormals
  constant_variance,  ///< s_i^2(t) replaced by sigma_i^2 (negative control)
};

struct DensityTestConfig {
  std::size_t n_paths = 100000;
  std::size_t n_points = 6;  ///< random evaluation points x
  std::vector<std::pair<double, double>> times{{0.0, 0.3}, {0.3, 0.6}, {0.6, 0.9}};
  std::size_t w_bins = 4;
  double alpha = 0.01;
  /// Fixed per-bin |z| bound; when unset the Sidak value for alpha is used.
  std::optional<double> z_threshold;
  std::uint64_t seed = 1;
  Exec exec = Exec::openmp;
};

/// Tests E[a_t(x) | F_s] = a_s(x) by simulating W_s and W_t - W_s.
TestReport density_martingale_test(const model::LognormalFactorModel& m, DensityVariant variant,
                                   const DensityTestConfig& cfg);

/// Two-sided Sidak critical value for `tests` simultaneous tests at family level alpha.
double sidak_critical(double alpha, std::size_t tests);

}  // namespace enlarge::mc
