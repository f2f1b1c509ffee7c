// Serial reference vs OpenMP Monte-Carlo driver on the bundled scenarios.

#include "robustloc/config.hpp"
#include "robustloc/experiments.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>

using namespace robustloc;

namespace {

ExperimentSpec spec_for(const std::string& name, int runs) {
  ExperimentSpec spec =
      load_config(std::filesystem::path(ROBUSTLOC_SCENARIOS) / (name + ".json")).experiment_spec();
  spec.runs = runs;
  return spec;
}

const char* const kScenarios[] = {"toa", "tdoa", "tdst"};

void BM_Serial(benchmark::State& state) {
  const ExperimentSpec spec = spec_for(kScenarios[state.range(0)], 16);
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo_serial(spec));
  state.SetLabel(kScenarios[state.range(0)]);
  state.SetItemsProcessed(state.iterations() * spec.runs);
}

void BM_Parallel(benchmark::State& state) {
  ExperimentSpec spec = spec_for(kScenarios[state.range(0)], 16);
  spec.jobs = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(spec));
  state.SetLabel(kScenarios[state.range(0)]);
  state.SetItemsProcessed(state.iterations() * spec.runs);
}

}  // namespace

BENCHMARK(BM_Serial)->DenseRange(0, 2)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Parallel)
    ->ArgsProduct({{0, 1, 2}, {1, 2, 4, 0}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
