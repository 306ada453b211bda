#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "regopt/coverage.hpp"
#include "regopt/generate.hpp"

namespace regopt {

// One conjunct of a bin predicate.
struct PredicateAtom {
    enum class Kind {
        numeric_lt,
        numeric_le,
        numeric_gt,
        numeric_ge,
        numeric_between, // inclusive [a, b]
        categorical_eq,
        categorical_in,
        test_eq,
    };

    Kind kind = Kind::numeric_ge;
    std::string cp;                  // control point (unused for test_eq)
    double a = 0.0, b = 0.0;         // numeric bounds
    std::vector<std::string> values; // categorical_eq uses values[0]
    std::string test;                // test_eq

    bool operator==(const PredicateAtom&) const = default;
};

// Conjunction of atoms; an empty conjunction is always true.
struct BinPredicate {
    std::vector<PredicateAtom> atoms;

    bool eval(std::string_view test, const std::map<std::string, ControlValue>& controls) const;
    bool operator==(const BinPredicate&) const = default;
};

struct DutBin {
    CoverageBin bin;
    BinPredicate predicate;
    bool buggy = false; // hitting a buggy bin fails the run

    bool operator==(const DutBin&) const = default;
};

struct DutTest {
    std::string name;
    std::map<std::string, ControlValue> overrides; // fixed values, win over sampling
    std::optional<std::vector<std::string>> gates; // reachable bins; nullopt = all
    double base_cpu_seconds = 1.0;
    double cpu_jitter_fraction = 0.0;

    bool operator==(const DutTest&) const = default;
};

// A synthetic constrained-random testbench with exactly computable ground
// truth: which bins a run hits is a pure function of (test, seed, constraints).
struct DutSpec {
    std::vector<ControlPointDecl> declarations;
    std::vector<DutTest> tests;
    std::vector<DutBin> bins;

    CoverageSpace space() const;
    const DutTest* find_test(std::string_view name) const;
    bool gated(const DutTest& test, std::string_view bin_id) const;
    void validate() const;

    bool operator==(const DutSpec&) const = default;
};

// Samples control values from per-control-point SplitMix64 streams. Stream
// seeds are drawn in declaration order (then one CPU stream) from a root
// generator seeded with stable_hash(test) ^ seed, so a run is bit-identical
// for identical (spec, test, seed, constraints). Numeric sampling maps the
// top 53 bits uniformly onto the effective interval; categorical sampling
// uses masked-rejection indices over the effective subset. Per-test
// overrides take precedence over both sampling and constraints.
RunRecord simulate_run(const DutSpec& dut, std::string_view test, std::uint64_t seed,
                       const ConstraintSet& constraints = {});

// Runs every declared test seeds_per_test times, test-major; the run with
// ordinal k uses seed base_seed + k.
Regression generate_archive(const DutSpec& dut, std::uint32_t seeds_per_test,
                            std::uint64_t base_seed);

// Executes each planned run through simulate_run with its constraints.
Regression replay_plan(const DutSpec& dut, const OptimizedRegression& plan);

} // namespace regopt
