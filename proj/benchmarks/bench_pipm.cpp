#include <benchmark/benchmark.h>

#include "phasewalk/pipm.hpp"

using namespace phasewalk;

namespace {

const RobotParams kRobot{1.0, 9.81};
const ComSurface kSurface{0.0, 0.0, 1.0};

ControlInput nominalInput() {
  ControlInput u;
  u.foot = {1.0, 0.0, 0.0};
  u.omega = omegaFromSurface(kSurface, u.foot, kRobot);
  return u;
}

}  // namespace

static void BM_PipmDerivative(benchmark::State& state) {
  const ControlInput u = nominalInput();
  PhaseState s;
  s.x = 0.9;
  s.xd = 0.7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        pipmDerivative(s, u, kSurface, kRobot, OmegaMode::kFree));
  }
}
BENCHMARK(BM_PipmDerivative);

static void BM_IntegrateStep(benchmark::State& state) {
  const ControlInput u = nominalInput();
  PhaseState s;
  s.x = 0.9;
  s.xd = 0.7;
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  IntegrateOptions opts;
  opts.dt = 1e-3;
  for (auto _ : state) {
    std::size_t count = 0;
    benchmark::DoNotOptimize(integrate(
        s, u, kSurface, kRobot, opts,
        [&count, n](const PhaseState&) { return count++ >= n; }));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_IntegrateStep)->Arg(100)->Arg(1000);

static void BM_AnalyticFlow(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(analyticFlow(0.9, 0.7, 1.0, 3.132, 0.25));
  }
}
BENCHMARK(BM_AnalyticFlow);
