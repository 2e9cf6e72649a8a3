// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts. The argument
// selects the kernel: 0 serial, 1 OpenMP.
#include <benchmark/benchmark.h>

#include "enlarge/density_model.hpp"
#include "enlarge/drift_engine.hpp"
#include "enlarge/mc_harness.hpp"
#include "enlarge/oracle_suite.hpp"

using namespace enlarge;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::openmp; }

const model::LognormalFactorModel& default_model() {
  static const model::LognormalFactorModel m({{-0.5, -0.3}, {0.4, 0.4}, {0.5, 0.5}, 0.9});
  return m;
}

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp threads=" + std::to_string(max_threads()));
}

void BM_OracleSuite(benchmark::State& state) {
  const auto specs = oracle::suite_specs({20, 3, 4, 2, 3, 0, 1});
  for (auto _ : state) benchmark::DoNotOptimize(oracle::run_oracle_suite(specs, exec_of(state)));
  label(state);
}

void BM_MartingaleTestSorted(benchmark::State& state) {
  mc::MartingaleTestConfig cfg;
  cfg.n_paths = 5000;
  cfg.steps = 50;
  cfg.checkpoints = {{0, 25}, {25, 50}};
  cfg.exec = exec_of(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc::martingale_test(default_model(), 1, mc::DriftProducer::sorted, cfg));
  }
  label(state);
}

void BM_DensityMartingale(benchmark::State& state) {
  mc::DensityTestConfig cfg;
  cfg.n_paths = 20000;
  cfg.n_points = 2;
  cfg.exec = exec_of(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc::density_martingale_test(default_model(), mc::DensityVariant::exact, cfg));
  }
  label(state);
}

void BM_CheckAAA(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(model::check_aAA(default_model(), 5000, 100, 1, exec_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_OracleSuite)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MartingaleTestSorted)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DensityMartingale)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CheckAAA)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
