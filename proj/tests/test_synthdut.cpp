#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "regopt/errors.hpp"
#include "regopt/synthdut.hpp"

using namespace regopt;

namespace {

DutSpec small_dut() {
    DutSpec dut;
    dut.declarations.push_back({"x", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"mode", CategoricalDomain{{"A", "B", "C"}}});

    PredicateAtom ge0;
    ge0.kind = PredicateAtom::Kind::numeric_ge;
    ge0.cp = "x";
    ge0.a = 0.0;
    PredicateAtom gt08;
    gt08.kind = PredicateAtom::Kind::numeric_gt;
    gt08.cp = "x";
    gt08.a = 0.8;
    PredicateAtom isC;
    isC.kind = PredicateAtom::Kind::categorical_eq;
    isC.cp = "mode";
    isC.values = {"C"};

    dut.bins.push_back({oracle::bin("tautology"), {{ge0}}, false});
    dut.bins.push_back({oracle::bin("tail"), {{gt08}}, false});
    dut.bins.push_back({oracle::bin("modeC"), {{isC}}, false});

    dut.tests.push_back({"t0", {}, std::nullopt, 1.0, 0.5});
    dut.tests.push_back({"t1", {{"mode", std::string("A")}}, std::nullopt, 2.0, 0.0});
    return dut;
}

} // namespace

TEST_CASE("simulation is a pure function of spec, test, seed and constraints") {
    const DutSpec dut = small_dut();
    const RunRecord a = simulate_run(dut, "t0", 42);
    const RunRecord b = simulate_run(dut, "t0", 42);
    CHECK(a == b);
    CHECK(simulate_run(dut, "t0", 43) != a);
}

TEST_CASE("a tautological predicate fires in every gated run") {
    const DutSpec dut = small_dut();
    for (std::uint64_t seed = 0; seed < 200; ++seed)
        CHECK(simulate_run(dut, "t0", seed).bins_hit.contains("tautology"));
}

TEST_CASE("constraining onto the predicate tail makes it near-certain") {
    const DutSpec dut = small_dut();
    ConstraintSet constraints;
    constraints.narrowings["x"] = NumericConstraint{0.8, 1.0};

    // Exact mass: the open bound has measure zero under the narrowed uniform.
    const double exact =
        oracle::exact_hit_probability(dut, dut.tests[0], dut.bins[1], constraints);
    CHECK(exact == doctest::Approx(1.0));

    int hits = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const RunRecord run = simulate_run(dut, "t0", seed, constraints);
        const double x = std::get<double>(run.controls.at("x"));
        CHECK(x >= 0.8);
        CHECK(x <= 1.0);
        if (run.bins_hit.contains("tail")) ++hits;
    }
    CHECK(hits >= 950);
}

TEST_CASE("empirical hit rates track the exact probabilities") {
    SplitMix64 rng(501);
    for (int trial = 0; trial < 5; ++trial) {
        const DutSpec dut = oracle::random_dut(rng);
        const DutTest& test = dut.tests[rng.next_index(dut.tests.size())];
        const DutBin& bin = dut.bins[rng.next_index(dut.bins.size())];
        const double exact = oracle::exact_hit_probability(dut, test, bin);

        int hits = 0;
        const int n = 2000;
        for (int i = 0; i < n; ++i)
            if (simulate_run(dut, test.name, 10'000 + i).bins_hit.contains(bin.bin.id))
                ++hits;
        const double empirical = static_cast<double>(hits) / n;
        CHECK(std::abs(empirical - exact) < 0.05);
    }
}

TEST_CASE("per-test overrides pin the control value") {
    const DutSpec dut = small_dut();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const RunRecord run = simulate_run(dut, "t1", seed);
        CHECK(std::get<std::string>(run.controls.at("mode")) == "A");
        CHECK(!run.bins_hit.contains("modeC"));
    }
}

TEST_CASE("cpu time follows base and jitter") {
    const DutSpec dut = small_dut();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RunRecord jittered = simulate_run(dut, "t0", seed);
        CHECK(jittered.cpu_seconds >= 1.0);
        CHECK(jittered.cpu_seconds < 1.5);
        const RunRecord flat = simulate_run(dut, "t1", seed);
        CHECK(flat.cpu_seconds == 2.0);
    }
}

TEST_CASE("gate sets bound what a test can hit") {
    DutSpec dut = small_dut();
    dut.tests[0].gates = std::vector<std::string>{"tautology"};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const RunRecord run = simulate_run(dut, "t0", seed);
        CHECK(run.bins_hit.size() == 1);
        CHECK(run.bins_hit.contains("tautology"));
    }
}

TEST_CASE("buggy bins fail the runs that hit them") {
    DutSpec dut = small_dut();
    dut.bins[1].buggy = true; // "tail"
    int failures = 0, tail_hits = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const RunRecord run = simulate_run(dut, "t0", seed);
        const bool hit = run.bins_hit.contains("tail");
        tail_hits += hit;
        failures += run.status == RunStatus::fail;
        CHECK((run.status == RunStatus::fail) == hit);
    }
    CHECK(tail_hits > 0);
    CHECK(failures == tail_hits);
}

TEST_CASE("archive generation enumerates test-major with sequential seeds") {
    DutSpec dut = small_dut();
    const Regression archive = generate_archive(dut, 10, 100);
    REQUIRE(archive.runs.size() == 20);
    CHECK(archive.runs[0].test == "t0");
    CHECK(archive.runs[0].seed == 100);
    CHECK(archive.runs[9].seed == 109);
    CHECK(archive.runs[10].test == "t1");
    CHECK(archive.runs[10].seed == 110);

    SUBCASE("single test single seed") {
        dut.tests.resize(1);
        const Regression one = generate_archive(dut, 1, 5);
        REQUIRE(one.runs.size() == 1);
        CHECK(one.runs[0].seed == 5);
    }
}

TEST_CASE("26 tests x 10 seeds gives the 260-run shape") {
    DutSpec dut = small_dut();
    dut.tests.clear();
    for (int t = 0; t < 26; ++t)
        dut.tests.push_back({"t" + std::to_string(t), {}, std::nullopt, 1.0, 0.1});
    const Regression archive = generate_archive(dut, 10, 1);
    CHECK(archive.runs.size() == 260);
}

TEST_CASE("archive coverage dominates its prefixes") {
    SplitMix64 rng(88);
    const DutSpec dut = oracle::random_dut(rng);
    const Regression archive = generate_archive(dut, 30, 9);
    const double full = coverage_percent(archive);
    const double prefix = coverage_percent(
        std::span(archive.runs.data(), archive.runs.size() / 3), archive.space);
    CHECK(full >= prefix);
}

TEST_CASE("recorded hits always re-derive from the recorded control values") {
    SplitMix64 rng(89);
    for (int trial = 0; trial < 8; ++trial) {
        const DutSpec dut = oracle::random_dut(rng);
        const Regression archive = generate_archive(dut, 5, 40);
        for (const RunRecord& run : archive.runs) {
            const DutTest* test = dut.find_test(run.test);
            for (const DutBin& bin : dut.bins) {
                const bool expected = dut.gated(*test, bin.bin.id) &&
                                      bin.predicate.eval(run.test, run.controls);
                CHECK(run.bins_hit.contains(bin.bin.id) == expected);
            }
        }
    }
}

TEST_CASE("replaying pinned runs reproduces them exactly") {
    const DutSpec dut = small_dut();
    const Regression original = generate_archive(dut, 25, 7);

    OptimizedRegression pin_plan;
    pin_plan.declarations = dut.declarations;
    for (std::size_t i = 0; i < original.runs.size(); i += 3) {
        const RunRecord& run = original.runs[i];
        PlannedRun planned;
        planned.test = run.test;
        planned.seed = run.seed;
        planned.phase = PlanPhase::core;
        planned.expected_gain = 1.0;
        planned.targeted_bins = {"tautology"};
        for (const auto& [name, value] : run.controls) {
            if (const double* v = std::get_if<double>(&value))
                planned.constraints.narrowings[name] = NumericConstraint{*v, *v};
            else
                planned.constraints.narrowings[name] =
                    CategoricalConstraint{{std::get<std::string>(value)}};
        }
        pin_plan.runs.push_back(std::move(planned));
    }

    const Regression replayed = replay_plan(dut, pin_plan);
    REQUIRE(replayed.runs.size() == pin_plan.runs.size());
    for (std::size_t i = 0; i < replayed.runs.size(); ++i) {
        const RunRecord& expected = original.runs[i * 3];
        CHECK(replayed.runs[i].controls == expected.controls);
        CHECK(replayed.runs[i].bins_hit == expected.bins_hit);
        CHECK(replayed.runs[i].cpu_seconds == expected.cpu_seconds);
    }

    SUBCASE("an empty plan replays to an empty regression") {
        OptimizedRegression empty;
        empty.declarations = dut.declarations;
        const Regression out = replay_plan(dut, empty);
        CHECK(out.runs.empty());
        CHECK(coverage_percent(out) == 0.0);
    }
}

TEST_CASE("simulation rejects unknown tests and bad constraints") {
    const DutSpec dut = small_dut();
    CHECK_THROWS_AS(simulate_run(dut, "missing", 1), ValidationError);

    ConstraintSet outside;
    outside.narrowings["x"] = NumericConstraint{0.5, 2.0};
    CHECK_THROWS_AS(simulate_run(dut, "t0", 1, outside), ValidationError);

    ConstraintSet unknown_value;
    unknown_value.narrowings["mode"] = CategoricalConstraint{{"Z"}};
    CHECK_THROWS_AS(simulate_run(dut, "t0", 1, unknown_value), ValidationError);
}

TEST_CASE("spec validation catches cross-reference mistakes") {
    DutSpec dut = small_dut();
    dut.tests[0].gates = std::vector<std::string>{"nope"};
    CHECK_THROWS_AS(dut.validate(), ValidationError);

    DutSpec bad_override = small_dut();
    bad_override.tests[1].overrides["mode"] = std::string("Z");
    CHECK_THROWS_AS(bad_override.validate(), ValidationError);

    DutSpec bad_atom = small_dut();
    bad_atom.bins[0].predicate.atoms[0].cp = "ghost";
    CHECK_THROWS_AS(bad_atom.validate(), ValidationError);
}
