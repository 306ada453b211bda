#include <benchmark/benchmark.h>

#include "regopt/synthdut.hpp"

namespace {

regopt::DutSpec bench_dut() {
    regopt::DutSpec dut;
    dut.declarations.push_back({"x", regopt::NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"y", regopt::NumericRange{0.0, 1.0}});
    dut.declarations.push_back(
        {"mode", regopt::CategoricalDomain{{"m0", "m1", "m2", "m3"}}});
    for (int b = 0; b < 64; ++b) {
        regopt::PredicateAtom atom;
        atom.kind = regopt::PredicateAtom::Kind::numeric_ge;
        atom.cp = b % 2 ? "x" : "y";
        atom.a = static_cast<double>(b) / 80.0;
        dut.bins.push_back({{"b" + std::to_string(b), "g", 1, 1}, {{atom}}, false});
    }
    for (int t = 0; t < 26; ++t)
        dut.tests.push_back({"t" + std::to_string(t), {}, std::nullopt, 1.0, 0.2});
    return dut;
}

void BM_simulate_archive(benchmark::State& state) {
    const regopt::DutSpec dut = bench_dut();
    const auto seeds = static_cast<std::uint32_t>(state.range(0));
    for (auto _ : state) {
        auto archive = regopt::generate_archive(dut, seeds, 1);
        benchmark::DoNotOptimize(archive);
    }
    state.SetItemsProcessed(state.iterations() * 26 * seeds);
}

} // namespace

BENCHMARK(BM_simulate_archive)->Arg(10)->Arg(100);
