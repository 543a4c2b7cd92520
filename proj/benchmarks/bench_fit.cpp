#include <benchmark/benchmark.h>

#include "dlreg/primary.hpp"
#include "dlreg/simulation.hpp"

using namespace dlreg;

namespace {

SimulatedData design(const char* name, std::size_t n) {
  ScenarioConfig cfg = preset(name);
  cfg.n = n;
  return generate(cfg, 0);
}

void BM_TruncatedNormalFit(benchmark::State& state) {
  const SimulatedData sim = design("table1", static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_truncated_normal(sim.data));
}
BENCHMARK(BM_TruncatedNormalFit)->Arg(200)->Arg(500)->Arg(2000);

void BM_GehanAft(benchmark::State& state) {
  const SimulatedData sim = design("table2", static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_aft_gehan(sim.data, Transform::neg_exp));
}
BENCHMARK(BM_GehanAft)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_GeeTheorem1(benchmark::State& state) {
  const ScenarioConfig cfg = preset("table1");
  const SimulatedData sim = design("table1", static_cast<std::size_t>(state.range(0)));
  const FitConfig fc = scenario_fit_config(cfg, McMethod::semi_para, 0);
  for (auto _ : state) benchmark::DoNotOptimize(fit_two_component(sim.data, fc, VarianceMethod::theorem1));
}
BENCHMARK(BM_GeeTheorem1)->Arg(200)->Arg(500)->Arg(2000);

void BM_McRep(benchmark::State& state) {
  const ScenarioConfig cfg = preset("table2");
  const auto method = static_cast<McMethod>(state.range(0));
  std::size_t rep = 0;
  for (auto _ : state) {
    const SimulatedData sim = generate(cfg, rep++);
    benchmark::DoNotOptimize(fit_method(sim, cfg, method, rep));
  }
  state.SetLabel(to_string(method));
}
BENCHMARK(BM_McRep)
    ->Arg(static_cast<int>(McMethod::complete_case))
    ->Arg(static_cast<int>(McMethod::semi_para))
    ->Arg(static_cast<int>(McMethod::semi_semi))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
