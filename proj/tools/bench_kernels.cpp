#include <benchmark/benchmark.h>

#include "sgdboot/bootstrap.hpp"
#include "sgdboot/experiments.hpp"
#include "sgdboot/linearization.hpp"
#include "sgdboot/sgd_core.hpp"

namespace {

using namespace sgdboot;

const BuiltProblem& quadratic() {
  static const BuiltProblem bp = [] {
    ProblemSetup s;
    s.theta0_offset = {1.0};
    s.estimation_draws = 1L << 14;
    return build_problem(s, 42);
  }();
  return bp;
}

void BM_SgdRun(benchmark::State& state) {
  const auto& bp = quadratic();
  const StepSchedule s(0.5, 1.0, 0.75);
  for (auto _ : state) {
    auto run = run_sgd(bp.problem, bp.noise, s, state.range(0), bp.theta0, 7);
    benchmark::DoNotOptimize(run.theta_bar.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SgdRun)->Arg(4096);

void BM_EnsembleSerial(benchmark::State& state) {
  const auto& bp = quadratic();
  const StepSchedule s(0.5, 1.0, 0.75);
  const auto law = make_weight_law(0.5, 2.0);
  for (auto _ : state) {
    auto e = build_ensemble_serial(bp.problem, bp.noise, s, 1024, bp.theta0, 7, law, 11, state.range(0));
    benchmark::DoNotOptimize(e.roots.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1024);
}
BENCHMARK(BM_EnsembleSerial)->Arg(64);

void BM_EnsembleOpenMP(benchmark::State& state) {
  const auto& bp = quadratic();
  const StepSchedule s(0.5, 1.0, 0.75);
  const auto law = make_weight_law(0.5, 2.0);
  for (auto _ : state) {
    auto e = build_ensemble(bp.problem, bp.noise, s, 1024, bp.theta0, 7, law, 11, state.range(0), 0);
    benchmark::DoNotOptimize(e.roots.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1024);
}
BENCHMARK(BM_EnsembleOpenMP)->Arg(64);

void BM_QFamily(benchmark::State& state) {
  const MatrixXd g = Eigen::Vector3d(1.0, 0.5, 0.2).asDiagonal();
  const StepSchedule s(0.5, 1.0, 0.75);
  for (auto _ : state) {
    auto qf = compute_q_family(g, s, state.range(0));
    benchmark::DoNotOptimize(qf.q.data());
  }
}
BENCHMARK(BM_QFamily)->Arg(4096);

void BM_ScalarSigma2(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(scalar_sigma2(state.range(0), 0.7, 1.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScalarSigma2)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
