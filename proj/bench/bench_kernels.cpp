// Serial reference vs OpenMP backend on the hot estimator kernels.

#include <benchmark/benchmark.h>

#include "ellpos/bodies.hpp"
#include "ellpos/estimators.hpp"
#include "ellpos/sections.hpp"

namespace {

ellpos::parallel::Execution backend(std::int64_t which) {
  return {0, which == 0 ? ellpos::parallel::Backend::SerialReference : ellpos::parallel::Backend::OpenMP};
}

void BM_NormMoments(benchmark::State& state) {
  const auto body = ellpos::BodySpec::cube(static_cast<std::size_t>(state.range(1)));
  const auto exec = backend(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ellpos::norm_moments(body, 1.0, 20000, {1, 0}, exec).mean_1.value);
  }
  state.SetItemsProcessed(state.iterations() * 20000);
}
BENCHMARK(BM_NormMoments)->ArgsProduct({{0, 1}, {64, 1024}})->Unit(benchmark::kMillisecond);

void BM_BalanceResiduals(benchmark::State& state) {
  const auto body = ellpos::BodySpec::lp_ball(64, 3.0);
  const auto exec = backend(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ellpos::balance_residuals(body, 20000, {2, 0}, exec).ell_squared.value);
  }
  state.SetItemsProcessed(state.iterations() * 20000);
}
BENCHMARK(BM_BalanceResiduals)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SphericityNet(benchmark::State& state) {
  const auto body = ellpos::BodySpec::cylinder_john(4096, 14);
  const auto basis = ellpos::haar_subspace({3, 0}, 4096, 2);
  const auto exec = backend(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ellpos::sphericity_ratio(body, basis, ellpos::SphericityMethod::net_default(), {3, 1}, exec).ratio);
  }
}
BENCHMARK(BM_SphericityNet)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
