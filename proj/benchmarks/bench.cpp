#include <benchmark/benchmark.h>

#include "cvqkd/fading.hpp"
#include "cvqkd/monte_carlo.hpp"
#include "cvqkd/optimize.hpp"

using namespace cvqkd;

namespace {

const SourceSpec kSource{0.5, 10.0, 10.0, 0.0, 0.05};
const ChannelSpec kChannel = ChannelSpec::fixed(0.5, 0.05);

void SymplecticSpectrumThreeMode(benchmark::State& state) {
    const CovarianceMatrix cm = build_cm_homodyne(kSource, kChannel);
    for (auto _ : state) {
        benchmark::DoNotOptimize(symplectic_eigenvalues(cm));
    }
}
BENCHMARK(SymplecticSpectrumThreeMode);

void SymplecticSpectrumFourMode(benchmark::State& state) {
    const CovarianceMatrix cm = build_cm_heterodyne(kSource, kChannel, 0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(symplectic_eigenvalues(cm));
    }
}
BENCHMARK(SymplecticSpectrumFourMode);

void HolevoBoundHomodyne(benchmark::State& state) {
    const CovarianceMatrix cm = build_cm_homodyne(kSource, kChannel);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            holevo_bound(cm, MeasurementScheme::homodyne_x(), ReconciliationSide::Reverse));
    }
}
BENCHMARK(HolevoBoundHomodyne);

void AsymptoticKeyRate(benchmark::State& state) {
    const MeasurementScheme scheme = MeasurementScheme::biased_homodyne(0.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            key_rate_asymptotic(kSource, kChannel, scheme, ReconciliationSide::Reverse, 0.95));
    }
}
BENCHMARK(AsymptoticKeyRate);

void FiniteSizeKeyRate(benchmark::State& state) {
    const MeasurementScheme scheme = MeasurementScheme::biased_homodyne(0.5);
    BlockAllocation alloc;
    alloc.N = 1e7;
    alloc.m = 2.5e6;
    alloc.n = 2.5e6;
    alloc.n_k = 1e7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(key_rate_finite(kSource, kChannel, scheme,
                                                 ReconciliationSide::Reverse, 0.95, alloc));
    }
}
BENCHMARK(FiniteSizeKeyRate);

void FadingKeyRate(benchmark::State& state) {
    const FadingMoments mom = FadingMoments::from_mean_and_variance(0.5, 0.02);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            key_rate_fading(kSource, mom, 0.05, ReconciliationSide::Reverse, 0.95));
    }
}
BENCHMARK(FadingKeyRate);

void MonteCarloBlocks(benchmark::State& state) {
    SimConfig cfg;
    cfg.src = kSource;
    cfg.T = 0.5;
    cfg.eps = 0.05;
    cfg.scheme = MeasurementScheme::biased_homodyne(0.5);
    cfg.m = 1000;
    cfg.n = 1000;
    cfg.repetitions = 256;
    cfg.seed = 1;
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_block(cfg, threads));
    }
    state.SetItemsProcessed(state.iterations() * cfg.repetitions);
}
BENCHMARK(MonteCarloBlocks)->Arg(1)->Arg(8);

void OptimizeModulation(benchmark::State& state) {
    OptimizationProblem problem;
    problem.base.src = kSource;
    problem.base.ch = kChannel;
    problem.base.scheme = MeasurementScheme::biased_homodyne(0.5);
    problem.params = {FreeParam::Vx};
    for (auto _ : state) {
        benchmark::DoNotOptimize(maximize_key(problem));
    }
}
BENCHMARK(OptimizeModulation);

} // namespace

BENCHMARK_MAIN();
