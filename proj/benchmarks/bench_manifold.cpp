#include <benchmark/benchmark.h>

#include "phasewalk/manifold.hpp"

using namespace phasewalk;

static void BM_SigmaApex(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(sigmaApex(1.05, 0.82, 0.6, 1.2, 3.132));
  }
}
BENCHMARK(BM_SigmaApex);

static void BM_Zeta(benchmark::State& state) {
  const ManifoldParams p{1.2 + 0.6 / 3.132, 0.6, 1.2, 3.132};
  for (auto _ : state) {
    benchmark::DoNotOptimize(zeta(1.05, 0.82, p, 1.0));
  }
}
BENCHMARK(BM_Zeta);

static void BM_ClassifyDisturbance(benchmark::State& state) {
  const auto p = ManifoldParams::apex(1.2, 0.6, 3.132);
  PhaseState pre;
  pre.x = 1.05;
  pre.xd = 0.82;
  PhaseState post = pre;
  post.xd = 1.22;
  for (auto _ : state) {
    benchmark::DoNotOptimize(classifyDisturbance(pre, post, p));
  }
}
BENCHMARK(BM_ClassifyDisturbance);
