// SPDX-License-Identifier: Apache-2.0
// Throughput of the hot kernels on the twisted product model at N^2 points.
#include <benchmark/benchmark.h>

#include "krf/flow.hpp"
#include "krf/ma_operator.hpp"
#include "krf/static_solver.hpp"
#include "krf/verification.hpp"
#include "models.hpp"

namespace {

using namespace krf;

ScalarField initial(const FlowProblem& p) {
  return sample_expression(p.grid, Expression::parse(testing::product_phi0()));
}

void BM_DiscreteHessian(benchmark::State& state) {
  const FlowProblem p = testing::product_problem(static_cast<int>(state.range(0)));
  const ScalarField phi = initial(p);
  for (auto _ : state) benchmark::DoNotOptimize(discrete_hessian(phi));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(p.grid.node_count()));
}

void BM_MaDensity(benchmark::State& state) {
  const FlowProblem p = testing::product_problem(static_cast<int>(state.range(0)));
  const ScalarField phi = initial(p);
  const HessianStencil stencil =
      state.range(1) ? HessianStencil::wide(p.grid, 1) : HessianStencil::central();
  for (auto _ : state) benchmark::DoNotOptimize(ma_density(p, 1.0, phi, stencil));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(p.grid.node_count()));
}

void BM_FlowStep(benchmark::State& state) {
  const FlowProblem p = testing::product_problem(static_cast<int>(state.range(0)));
  StepOptions o;
  o.scheme = state.range(1) ? TimeScheme::kExplicit : TimeScheme::kLinearlyImplicit;
  FlowStepper stepper(p, o);
  const FlowState s0 = initial_state(p, initial(p));
  for (auto _ : state) benchmark::DoNotOptimize(stepper.step(s0, 1e-3));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(p.grid.node_count()));
}

void BM_StaticSolve(benchmark::State& state) {
  const FlowProblem p = testing::product_problem(static_cast<int>(state.range(0)));
  const SemiFlatField sf = semiflat_solve(p, 1e-12);
  for (auto _ : state) benchmark::DoNotOptimize(solve_static(p, StaticMethod::kDampedNewton, 1e-12, 100, &sf));
}

void BM_SemiflatSolve(benchmark::State& state) {
  const FlowProblem p = testing::product_problem(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(semiflat_solve(p, 1e-12));
}

}  // namespace

BENCHMARK(BM_DiscreteHessian)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaDensity)->Args({64, 0})->Args({64, 1})->Args({128, 0})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FlowStep)->Args({64, 0})->Args({64, 1})->Args({128, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StaticSolve)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SemiflatSolve)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
