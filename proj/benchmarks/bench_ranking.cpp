#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "regopt/ranking.hpp"

namespace {

void BM_rank_cover_all(benchmark::State& state) {
    const auto regression = synthetic_regression(
        static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 42);
    for (auto _ : state) {
        auto selection = regopt::rank(regression, regopt::RankObjective::cover_all());
        benchmark::DoNotOptimize(selection);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_coverage_percent(benchmark::State& state) {
    const auto regression = synthetic_regression(
        static_cast<std::size_t>(state.range(0)), 256, 7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(regopt::coverage_percent(regression));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_rank_cover_all)->Args({260, 64})->Args({1024, 256})->Args({4096, 512});
BENCHMARK(BM_coverage_percent)->Arg(260)->Arg(4096);
