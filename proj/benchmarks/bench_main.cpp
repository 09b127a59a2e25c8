#include <benchmark/benchmark.h>

#include "dpc/gridlab.hpp"
#include "dpc/hinf.hpp"
#include "dpc/linsys.hpp"
#include "dpc/observability.hpp"
#include "dpc/privacy.hpp"
#include "dpc/rng.hpp"

using namespace dpc;

namespace {

StateSpace random_system(Rng& rng, Eigen::Index n, Eigen::Index m, Eigen::Index q) {
  auto mat = [&](Eigen::Index r, Eigen::Index c) {
    Matrix M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) M(i, j) = rng.next_normal();
    return M;
  };
  Matrix A = mat(n, n);
  A *= 0.8 / A.eigenvalues().cwiseAbs().maxCoeff();
  return StateSpace(A, mat(n, m), mat(q, n), mat(q, m));
}

const StateSpace& microgrid_plant() {
  static const StateSpace plant = [] {
    const auto params = MicrogridParams::paper_preset();
    return zoh_discretize(build_microgrid(params), params.dt);
  }();
  return plant;
}

}  // namespace

static void BM_Expm(benchmark::State& state) {
  Rng rng(1);
  Matrix A(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) A(i, j) = rng.next_normal();
  for (auto _ : state) benchmark::DoNotOptimize(expm(A));
}
BENCHMARK(BM_Expm);

static void BM_Dare(benchmark::State& state) {
  const auto& plant = microgrid_plant();
  const Matrix Q = Matrix::Identity(5, 5), R = Matrix::Identity(2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dare(plant.A, plant.B, Q, R));
}
BENCHMARK(BM_Dare);

static void BM_WeightedGramian(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const auto& plant = microgrid_plant();
  for (auto _ : state)
    benchmark::DoNotOptimize(weighted_gramian_iid(plant, t, 5));
}
BENCHMARK(BM_WeightedGramian)->Arg(10)->Arg(20)->Arg(40);

static void BM_HinfSweep(benchmark::State& state) {
  Rng rng(2);
  const StateSpace sys = random_system(rng, 6, 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(hinf_norm(sys));
}
BENCHMARK(BM_HinfSweep);

static void BM_ObserverLmiSolve(benchmark::State& state) {
  const auto& plant = microgrid_plant();
  const Matrix G1 = -dare(plant.A, plant.B, Matrix::Identity(5, 5),
                          Matrix::Identity(2, 2)).K;
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_observer_hinf_design(plant, G1, 0.365));
}
BENCHMARK(BM_ObserverLmiSolve);

static void BM_TrackingStep(benchmark::State& state) {
  const auto pp = build_paper_pipeline();
  ExperimentConfig cfg;
  cfg.initial_deviation = Vector::Zero(5);
  cfg.initial_deviation(0) = -4.0;
  cfg.horizon_steps = 1000;
  cfg.plan = ExperimentConfig::NoisePlan::input_gaussian;
  cfg.a = 15.8;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_tracking_experiment(
        pp.plant, pp.controller, pp.exo, microgrid_reference(pp.params),
        microgrid_steady_state(pp.params), pp.design, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.horizon_steps);
}
BENCHMARK(BM_TrackingStep);

BENCHMARK_MAIN();
