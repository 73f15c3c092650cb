#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "margint/experiments.hpp"

using namespace margint;

namespace {

std::shared_ptr<const SamplePath> default_path(double horizon) {
  const Scenario s = Scenario::default_scenario();
  return std::make_shared<const SamplePath>(simulate_path(s.process, s.model, s.delta, horizon, 1));
}

}  // namespace

static void BM_KernelOrder6(benchmark::State& state) {
  const Kernel1D k = raise_kernel_order(make_base_kernel(BaseKernel::epanechnikov), 6);
  double u = -0.99;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k(u));
    u = u > 0.99 ? -0.99 : u + 0.0137;
  }
}
BENCHMARK(BM_KernelOrder6);

static void BM_SimulatePath(benchmark::State& state) {
  const Scenario s = Scenario::default_scenario();
  const double T = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_path(s.process, s.model, s.delta, T, 3));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(T / s.delta));
}
BENCHMARK(BM_SimulatePath)->Arg(1024)->Arg(8192)->Unit(benchmark::kMillisecond);

static void BM_DensityAtDataPoints(benchmark::State& state) {
  const Scenario s = Scenario::default_scenario();
  const EstimationKit kit(s);
  const auto path = default_path(static_cast<double>(state.range(0)));
  const DensityEstimate de = fit_density(s, kit, path);
  for (auto _ : state) benchmark::DoNotOptimize(de.at_data_points());
}
BENCHMARK(BM_DensityAtDataPoints)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_RegressionPoint(benchmark::State& state) {
  const Scenario s = Scenario::default_scenario();
  const EstimationKit kit(s);
  const RegressionEstimate re = fit_regression(s, kit, default_path(4096), DensityMode::known_f);
  const std::vector<double> x{0.5, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(re(x));
}
BENCHMARK(BM_RegressionPoint)->Unit(benchmark::kMicrosecond);

static void BM_ComponentAtPoint(benchmark::State& state) {
  const Scenario s = Scenario::default_scenario();
  const EstimationKit kit(s);
  const RegressionEstimate re = fit_regression(s, kit, default_path(4096), DensityMode::known_f);
  const std::vector<double> grid{0.5};
  const auto route = state.range(0) == 0 ? QuadratureRoute::factored : QuadratureRoute::tensor;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_component(re, kit.q, 0, grid, 32, std::nullopt, route));
}
BENCHMARK(BM_ComponentAtPoint)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Replication(benchmark::State& state) {
  StudyConfig c;
  const EstimationKit kit(c.scenario);
  const double T = static_cast<double>(state.range(0));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_replication(c, kit, T, i++));
}
BENCHMARK(BM_Replication)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void BM_DensityModeReplication(benchmark::State& state) {
  // estimated-f replica as used by the density-mode study
  const Scenario s = Scenario::default_scenario();
  const EstimationKit kit(s);
  const auto path = default_path(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    const DensityEstimate de = fit_density(s, kit, path);
    const RegressionEstimate re = fit_regression(s, kit, path, DensityMode::estimated_f, &de);
    benchmark::DoNotOptimize(re.densities().floor);
  }
}
BENCHMARK(BM_DensityModeReplication)->Arg(4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
