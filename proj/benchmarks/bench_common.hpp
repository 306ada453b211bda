// Shared synthetic workloads for the microbenchmarks.
#pragma once

#include <string>

#include "regopt/coverage.hpp"
#include "regopt/prng.hpp"

// n_runs runs over n_bins unit-weight bins, each run hitting roughly a third
// of the bins.
inline regopt::Regression synthetic_regression(std::size_t n_runs, std::size_t n_bins,
                                               std::uint64_t seed) {
    std::vector<regopt::CoverageBin> bins;
    bins.reserve(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b)
        bins.push_back({"b" + std::to_string(b), "g", 1, 1});

    regopt::Regression r;
    r.space = regopt::CoverageSpace(std::move(bins));
    r.declarations.push_back({"x", regopt::NumericRange{0.0, 1.0}});
    r.declarations.push_back(
        {"mode", regopt::CategoricalDomain{{"m0", "m1", "m2", "m3"}}});

    regopt::SplitMix64 rng(seed);
    r.runs.reserve(n_runs);
    for (std::size_t i = 0; i < n_runs; ++i) {
        regopt::RunRecord run;
        run.test = "t" + std::to_string(i % 16);
        run.seed = i;
        run.cpu_seconds = 0.5 + rng.next_unit();
        run.controls["x"] = rng.next_unit();
        run.controls["mode"] = "m" + std::to_string(rng.next_index(4));
        for (std::size_t b = 0; b < n_bins; ++b)
            if (rng.next_index(3) == 0) run.bins_hit["b" + std::to_string(b)] = 1;
        r.runs.push_back(std::move(run));
    }
    return r;
}
