#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sapf/analysis.hpp"
#include "sapf/engine.hpp"
#include "sapf/plant.hpp"
#include "sapf/scenarios.hpp"

namespace {

using namespace sapf;

void BM_DftSpectrum(benchmark::State& state) {
    const double fs = 200000.0;
    const std::size_t n = 5 * 4000;
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double wt = 2 * std::numbers::pi * 50.0 * static_cast<double>(k) / fs;
        x[k] = std::sin(wt) + 0.2 * std::sin(5 * wt) + 0.14 * std::sin(7 * wt);
    }
    for (auto _ : state) benchmark::DoNotOptimize(analysis::dft_spectrum(x, 50.0, fs));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_DftSpectrum)->Unit(benchmark::kMillisecond);

void BM_PvCurrent(benchmark::State& state) {
    const plant::PVArray pv;
    double v = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(plant::pv_current(pv, v));
        v = v < 390.0 ? v + 1.0 : 0.0;
    }
}
BENCHMARK(BM_PvCurrent);

void BM_EngineStep(benchmark::State& state) {
    engine::Scenario sc = scenarios::demo();
    sc.events.clear();
    sc.system.sapf->enabled = true;
    if (state.range(0) == 1) sc.system.sapf->mode = engine::InjectionMode::switched;
    const engine::Scenario r = engine::resolve(sc);
    engine::SimState s = engine::initial_state(r);
    engine::Frame f{};
    for (auto _ : state) {
        engine::step(s, r, &f);
        benchmark::DoNotOptimize(f);
    }
}
BENCHMARK(BM_EngineStep)->Arg(0)->Arg(1)->ArgNames({"switched"});

}  // namespace
BENCHMARK_MAIN();
