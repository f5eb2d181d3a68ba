// Microbenchmarks for the hot paths: spectral sums, dense TV evaluation,
// endpoint sampling, and the closed-form linear algebra helpers.

#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cutofflab/bounds.hpp"
#include "cutofflab/montecarlo.hpp"
#include "cutofflab/spectral.hpp"
#include "cutofflab/walks.hpp"

namespace {

using namespace cutofflab;

void BM_l2_bound(benchmark::State& state) {
  const WalkSpec walk = make_dg_1xn(static_cast<int>(state.range(0)), 11);
  double t = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(l2_bound(walk, t));
    t += 1e-6;  // defeat any caching without changing the workload
  }
}
BENCHMARK(BM_l2_bound)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_exact_tv_oneshot(benchmark::State& state) {
  const WalkSpec walk = make_dg_1xn(4, 7);
  double t = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_tv(walk, t));
    t += 1e-6;
  }
}
BENCHMARK(BM_exact_tv_oneshot)->Unit(benchmark::kMillisecond);

void BM_dense_evaluator_point(benchmark::State& state) {
  const WalkSpec walk = make_dg_1xn(static_cast<int>(state.range(0)),
                                    2 * state.range(0));
  DenseTvEvaluator evaluator(walk);
  double t = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluator.evaluate(t));
    t += 1e-6;
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(evaluator.states()));
}
BENCHMARK(BM_dense_evaluator_point)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_endpoint_sampler(benchmark::State& state) {
  const WalkSpec walk = make_dg_1xn(3, 5);
  EndpointSampler sampler(walk);
  std::uint64_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler.sample(4.0, 99, index++));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_endpoint_sampler);

void BM_quadratic_decomposed(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<double> y(static_cast<std::size_t>(n - 1));
  for (double& v : y) v = unif(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(quadratic_form_decomposed(n, y));
  }
}
BENCHMARK(BM_quadratic_decomposed)->Arg(8)->Arg(64);

void BM_schur_sequence(benchmark::State& state) {
  const Eigen::MatrixXd psi =
      correlation_model(make_dg_nxn(static_cast<int>(state.range(0)), 5)).psi;
  for (auto _ : state) {
    benchmark::DoNotOptimize(schur_sequence(psi));
  }
}
BENCHMARK(BM_schur_sequence)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_gaussian_comb_argmax(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(gaussian_comb_argmax(50.0, 10, 1e-3));
  }
}
BENCHMARK(BM_gaussian_comb_argmax)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
