// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner behind the `run` executable. Configuration is an INI file
// with one section per module; every key has a default, unknown keys are
// rejected, and `--set section.key=value` overrides are applied on top.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enlarge/density_model.hpp"
#include "enlarge/marginal_integrator.hpp"
#include "enlarge/mc_harness.hpp"
#include "enlarge/oracle_suite.hpp"

namespace enlarge::cli {

enum class Mode { oracle, drift, mctest, reduce, checkaAA };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kUsage = 2, kNumeric = 3 };

struct DriftSection {
  std::size_t k = 1;
  std::size_t scenarios = 3;
  bool tabulated = false;
  double denominator_floor = 1e-300;
};

struct ReduceSection {
  double mu = -0.5;
  double sigma = 0.4;
  double rho = 0.5;
  std::size_t scenarios = 5;
  double tol = 1e-6;
};

struct MctestSection {
  std::size_t n_paths = 100000;
  std::size_t windows = 4;  ///< equal checkpoint windows over the grid
  std::size_t w_bins = 4;
  std::size_t time_bins = 2;
  std::size_t min_bin = 200;
  double alpha = 0.01;
  mc::DriftProducer producer = mc::DriftProducer::sorted;
};

struct OracleSection {
  std::size_t seeds = 50;
  std::size_t depth_lo = 2, depth_hi = 5;
  std::size_t n_lo = 1, n_hi = 3;
  std::size_t k = 0;
  double tol = 1e-10;       ///< drift and decomposition deviations
  double cond_tol = 1e-12;  ///< conditioning identity
};

struct AAASection {
  std::size_t n_paths = 20000;
};

struct RunConfig {
  Mode mode = Mode::oracle;
  model::ModelParams model{{-0.5, -0.3}, {0.4, 0.4}, {0.5, 0.5}, 0.9};
  std::size_t steps = 200;  ///< grid intervals on [0, T_max]
  marginal::QuadratureConfig quad;
  DriftSection drift;
  ReduceSection reduce;
  MctestSection mctest;
  OracleSection oracle;
  AAASection aaa;
  Exec exec = Exec::openmp;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

/// Applies one `section.key=value` assignment. Throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& dotted_key, const std::string& value, long line = 0);

/// Reads an INI file into cfg. Throws ConfigError with the offending key and line.
void load_config_file(RunConfig& cfg, const std::string& path);

/// Runs the configured mode, writing artifacts into cfg.out_dir. Returns an ExitCode.
int run(const RunConfig& cfg);

/// Full command line entry point, including error-to-exit-code mapping.
int main(int argc, char** argv);

}  // namespace enlarge::cli
