#include <benchmark/benchmark.h>

#include <numbers>

#include "einop/curvature.hpp"
#include "einop/operators.hpp"
#include "einop/solver.hpp"
#include "einop/spectral.hpp"
#include "einop/tensor_algebra.hpp"

using namespace einop;

namespace {
const double kTwoPi = 2.0 * std::numbers::pi;

Background flat_bg(int dim, int n, double lambda) {
  return make_background(
      make_euclidean_metric(GridSpec::make_uniform(dim, n, kTwoPi)), 0.0, lambda);
}
}  // namespace

static void BM_RiemannRicci2d(benchmark::State& state) {
  GridSpec grid = GridSpec::make_uniform(2, static_cast<int>(state.range(0)), kTwoPi);
  MetricField g = make_conformal_metric(make_sin_field(grid, 0, 0.1));
  for (auto _ : state) benchmark::DoNotOptimize(riemann_ricci_scalar(g));
}
BENCHMARK(BM_RiemannRicci2d)->Arg(32)->Arg(64);

static void BM_RiemannRicci3d(benchmark::State& state) {
  GridSpec grid = GridSpec::make_uniform(3, static_cast<int>(state.range(0)), kTwoPi);
  MetricField g = make_conformal_metric(make_sin_field(grid, 0, 0.1));
  for (auto _ : state) benchmark::DoNotOptimize(riemann_ricci_scalar(g));
}
BENCHMARK(BM_RiemannRicci3d)->Arg(16);

static void BM_LichnerowiczApply(benchmark::State& state) {
  Background bg = flat_bg(2, static_cast<int>(state.range(0)), 1.0);
  SymTensorField h = random_trig_sym(bg.grid(), 1, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(lichnerowicz_laplacian(bg, h));
}
BENCHMARK(BM_LichnerowiczApply)->Arg(32)->Arg(64);

static void BM_GaugedResidual(benchmark::State& state) {
  Background bg = flat_bg(2, static_cast<int>(state.range(0)), 1.0);
  S2KernelProjector pi;
  SymTensorField h = random_trig_sym(bg.grid(), 2, 1e-3);
  SymTensorField e = random_trig_sym(bg.grid(), 3, 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(residual_F(bg, h, e, pi));
}
BENCHMARK(BM_GaugedResidual)->Arg(32);

static void BM_NewtonSolve(benchmark::State& state) {
  Background bg = flat_bg(2, static_cast<int>(state.range(0)), 1.0);
  S2KernelProjector pi = build_projector(bg);
  HypothesisReport license = hypothesis_report(bg);
  SymTensorField e = scalar_times_metric(make_sin_field(bg.grid(), 0, 1e-3), bg.g);
  for (auto _ : state)
    benchmark::DoNotOptimize(newton_solve(bg, e, pi, license));
}
BENCHMARK(BM_NewtonSolve)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
