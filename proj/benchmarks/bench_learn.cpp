#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "regopt/learn.hpp"

namespace {

void BM_train(benchmark::State& state) {
    const auto regression = synthetic_regression(
        static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 11);
    regopt::TrainConfig config;
    config.epochs = 50;
    for (auto _ : state) {
        auto models = regopt::train(regression, config);
        benchmark::DoNotOptimize(models);
    }
}

void BM_predict(benchmark::State& state) {
    const auto regression = synthetic_regression(300, 64, 12);
    regopt::TrainConfig config;
    config.epochs = 50;
    const auto models = regopt::train(regression, config);
    const std::map<std::string, regopt::ControlValue> controls{
        {"x", 0.9}, {"mode", std::string("m2")}};
    for (auto _ : state) {
        auto p = regopt::predict(models, "t3", controls);
        benchmark::DoNotOptimize(p);
    }
    state.SetItemsProcessed(state.iterations() * 64);
}

} // namespace

BENCHMARK(BM_train)->Args({300, 32})->Args({300, 128});
BENCHMARK(BM_predict);
