#include <benchmark/benchmark.h>

#include "phasewalk/recovery.hpp"

using namespace phasewalk;

namespace {

StepSpec referenceStep() {
  StepSpec step;
  step.foot = {1.2, 0.0, 0.0};
  step.surface = {0.0, 0.0, 1.0};
  step.apex_speed = 0.6;
  return step;
}

DpParams miniatureParams() {
  DpParams p;
  p.stage_min = 1.1;
  p.stage_max = 1.3;
  p.stage_res = 0.01;
  p.state_min = 0.3;
  p.state_max = 1.0;
  p.state_res = 0.01;
  p.omega_count = 5;
  p.tau_count = 5;
  return p;
}

}  // namespace

static void BM_DpBuildMiniature(benchmark::State& state) {
  const DpParams params = miniatureParams();
  const StepSpec step = referenceStep();
  const BundleSpec bundle;
  const RobotParams robot;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpBuild(params, step, bundle, robot));
  }
}
BENCHMARK(BM_DpBuildMiniature)->Unit(benchmark::kMillisecond);

static void BM_DpBuildFull(benchmark::State& state) {
  const DpParams params;  // full reference grid
  const StepSpec step = referenceStep();
  const BundleSpec bundle;
  const RobotParams robot;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpBuild(params, step, bundle, robot));
  }
}
BENCHMARK(BM_DpBuildFull)->Unit(benchmark::kMillisecond)->Iterations(3);

static void BM_DpLookup(benchmark::State& state) {
  const PolicyTable table =
      dpBuild(miniatureParams(), referenceStep(), BundleSpec{}, RobotParams{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpLookup(table, 1.17, 0.62));
  }
}
BENCHMARK(BM_DpLookup);

static void BM_PolicyRollout(benchmark::State& state) {
  const PolicyTable table =
      dpBuild(DpParams{}, referenceStep(), BundleSpec{}, RobotParams{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(policyRollout(table, 1.1, 0.7));
  }
}
BENCHMARK(BM_PolicyRollout);
