#include <benchmark/benchmark.h>

#include "nsvfp/linear_mode.hpp"
#include "nsvfp/nonlinear.hpp"

namespace {

using namespace nsvfp;

void BM_ApplyGenerator(benchmark::State& state) {
  const int order = int(state.range(0));
  const Vec3 xi{0.3, -0.7, 1.1};
  Eigen::VectorXcd x = Eigen::VectorXcd::Random(Eigen::Index(mode_dimension(order)));
  for (auto _ : state) benchmark::DoNotOptimize(apply_generator(xi, order, x));
}
BENCHMARK(BM_ApplyGenerator)->Arg(4)->Arg(8)->Arg(12);

void BM_ModePropagator(benchmark::State& state) {
  const int order = int(state.range(0));
  const Vec3 xi{0.3, -0.7, 1.1};
  for (auto _ : state) benchmark::DoNotOptimize(ModePropagator(xi, order));
}
BENCHMARK(BM_ModePropagator)->Arg(4)->Unit(benchmark::kMillisecond);

SolverConfig solver_config(int grid) {
  SolverConfig c;
  c.grid = grid;
  c.order = 4;
  c.dt = 1e-3;
  return c;
}

void BM_NonlinearRhs(benchmark::State& state) {
  const NonlinearSolver solver(solver_config(int(state.range(0))));
  const FieldState s = random_small_state(solver, 1e-3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(solver.rhs(s));
}
BENCHMARK(BM_NonlinearRhs)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_NonlinearStep(benchmark::State& state) {
  const NonlinearSolver solver(solver_config(int(state.range(0))));
  FieldState s = random_small_state(solver, 1e-3, 1);
  for (auto _ : state) solver.step_rk4(s, 1e-3);
}
BENCHMARK(BM_NonlinearStep)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Functionals(benchmark::State& state) {
  const NonlinearSolver solver(solver_config(8));
  const FunctionalEvaluator ev(4, FunctionalConfig{});
  const FieldState s = random_small_state(solver, 1e-3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ev.field(solver, s));
}
BENCHMARK(BM_Functionals)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
