#include <benchmark/benchmark.h>

#include "reglab/parallel.hpp"
#include "reglab/reguidance.hpp"

namespace {

using namespace reglab;

// One projection-style trial: prior draw, latent extraction, guided ODE.
double trial(std::size_t i) {
    const ModelSpec model = ModelSpec::hypercube(3.0, 8);
    RngStream rng(derive_seed(7, i));
    const State x = sample_prior(model, rng);
    State z(8);
    for (int k = 0; k < 8; ++k) z[k] = rng.coin() ? 3.0 : -3.0;
    const Measurement meas = make_measurement(Inpainting{{0, 1, 2}}, model, z, 0.1);
    GuidanceConfig cfg;
    cfg.steps = 256;
    return run_reguidance(model, meas, x, cfg, false).final_distance_to_projection;
}

void BM_TrialsSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(map_trials_serial(n, trial));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrialsParallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(map_trials(n, trial, 0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
    state.counters["workers"] = resolve_workers(0);
}

BENCHMARK(BM_TrialsSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrialsParallel)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
