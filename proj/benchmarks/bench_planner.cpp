#include <benchmark/benchmark.h>

#include "phasewalk/planner.hpp"
#include "phasewalk/scenario.hpp"

using namespace phasewalk;

namespace {

std::vector<StepSpec> flatWalk(int n) {
  std::vector<StepSpec> steps(n);
  for (int q = 0; q < n; ++q) {
    steps[q].foot = {0.5 * q, (q % 2 == 0) ? 0.28 : -0.28, 0.0};
    steps[q].surface = {0.0, 0.0, 1.0};
    steps[q].apex_speed = 0.6;
  }
  return steps;
}

}  // namespace

static void BM_GenerateNominal(benchmark::State& state) {
  const auto steps = flatWalk(static_cast<int>(state.range(0)));
  const RobotParams robot;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generateNominal(steps, robot));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateNominal)->Arg(5)->Arg(25)->Unit(benchmark::kMillisecond);

static void BM_FindStepTransition(benchmark::State& state) {
  const auto a = ManifoldParams::apex(1.2, 0.6, 3.132);
  const auto b = ManifoldParams::apex(1.7, 0.6, 3.132);
  for (auto _ : state) {
    benchmark::DoNotOptimize(findStepTransition(a, b));
  }
}
BENCHMARK(BM_FindStepTransition);

static void BM_SearchLateralFoot(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        searchLateralFoot(0.05, 0.2, 3.132, 0.35, -0.6, 0.6, 1e-4, 30));
  }
}
BENCHMARK(BM_SearchLateralFoot);

static void BM_SampleTerrain(benchmark::State& state) {
  TerrainSpec spec;
  spec.kind = TerrainKind::kStochasticStairs;
  spec.seed = 9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampleTerrain(spec, 100, 0.56, 1.0));
  }
}
BENCHMARK(BM_SampleTerrain);
