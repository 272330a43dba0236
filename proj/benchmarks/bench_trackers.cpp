#include <benchmark/benchmark.h>

#include "gbtrack/baseline.hpp"
#include "gbtrack/evaluation.hpp"
#include "gbtrack/kalman.hpp"
#include "gbtrack/particle_filter.hpp"
#include "gbtrack/scenarios.hpp"
#include "gbtrack/simulator.hpp"

namespace gbtrack {
namespace {

// 415x24x1000 noisy volume with patchy snow, shared by every benchmark.
const Simulation& volume_1000() {
  static const Simulation sim = [] {
    SimConfig cfg = snow_scenario(1);
    cfg.n_scans = 1000;
    cfg.snow->last_scan = cfg.n_scans - 1;
    return simulate(cfg);
  }();
  return sim;
}

void set_cells(benchmark::State& state, const GprVolume& v) {
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(v.n_channels() * v.n_scans()));
}

void BM_GlobalMax(benchmark::State& state) {
  const auto& v = volume_1000().volume;
  for (auto _ : state) benchmark::DoNotOptimize(track_global_max(v));
  set_cells(state, v);
}
BENCHMARK(BM_GlobalMax)->Unit(benchmark::kMillisecond);

void BM_ConstrainedMax(benchmark::State& state) {
  const auto& v = volume_1000().volume;
  for (auto _ : state) benchmark::DoNotOptimize(track_constrained_max(v, ConstrainedMaxConfig{}));
  set_cells(state, v);
}
BENCHMARK(BM_ConstrainedMax)->Unit(benchmark::kMillisecond);

void BM_Kalman(benchmark::State& state) {
  const auto& v = volume_1000().volume;
  for (auto _ : state) benchmark::DoNotOptimize(track_kalman(v, KfConfig{}));
  set_cells(state, v);
}
BENCHMARK(BM_Kalman)->Unit(benchmark::kMillisecond);

void BM_ParticleFilter(benchmark::State& state) {
  const auto& v = volume_1000().volume;
  PfConfig cfg;
  cfg.n_particles = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(track_pf(v, cfg));
  set_cells(state, v);
}
BENCHMARK(BM_ParticleFilter)->Arg(50)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Prescreen(benchmark::State& state) {
  const auto& sim = volume_1000();
  for (auto _ : state) benchmark::DoNotOptimize(prescreen(sim.volume, sim.truth, PrescreenConfig{}));
  set_cells(state, sim.volume);
}
BENCHMARK(BM_Prescreen)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  SimConfig cfg = snow_scenario(2);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(cfg.n_channels * cfg.n_scans));
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_LikelihoodUpdate(benchmark::State& state) {
  const auto& sim = volume_1000();
  const auto tpl = normalize_min_max(default_wavelet());
  std::vector<double> states(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = sim.truth(5, 100) - 5.0 + 10.0 * i / states.size();
  const AScanView z(sim.volume, 5, 100);
  for (auto _ : state) {
    auto set = ParticleSet::uniform(states);
    benchmark::DoNotOptimize(update_weights(set, z, tpl, 1.0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LikelihoodUpdate)->Arg(50)->Arg(2000);

}  // namespace
}  // namespace gbtrack

BENCHMARK_MAIN();
