#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "regopt/errors.hpp"
#include "regopt/io.hpp"

using namespace regopt;

namespace {

Regression sample_regression() {
    Regression r;
    r.space = CoverageSpace({oracle::bin("b1", 2), oracle::bin("b2", 1, 2)});
    r.declarations.push_back({"x", NumericRange{0.0, 10.0}});
    r.declarations.push_back({"mode", CategoricalDomain{{"A", "B", "C"}}});

    RunRecord run = oracle::run("smoke", 7, 1.5, {{"b1", 1}, {"b2", 2}});
    run.controls["x"] = 2.5;
    run.controls["mode"] = std::string("B");
    r.runs.push_back(run);

    RunRecord second = oracle::run("stress", 8, 0.25, {{"b2", 1}}, RunStatus::fail);
    second.controls["x"] = 9.875;
    second.controls["mode"] = std::string("A");
    r.runs.push_back(second);
    return r;
}

} // namespace

TEST_CASE("archive round-trips structurally and byte-identically") {
    const Regression r = sample_regression();
    const std::string bytes = regression_to_string(r);
    const Regression loaded = regression_from_string(bytes);
    CHECK(loaded == r);
    CHECK(regression_to_string(loaded) == bytes);
    // Deterministic serialization: same value, same bytes.
    CHECK(regression_to_string(r) == bytes);
}

TEST_CASE("archive files preserve run order") {
    const auto dir = oracle::scratch_dir("io_order");
    Regression r = sample_regression();
    r.runs.push_back(oracle::run("smoke", 9, 0.5, {{"b1", 1}}));
    r.runs.back().controls["x"] = 1.0;
    r.runs.back().controls["mode"] = std::string("C");

    save_regression(r, dir / "a.jsonl");
    const Regression loaded = load_regression(dir / "a.jsonl");
    REQUIRE(loaded.runs.size() == 3);
    CHECK(loaded.runs[0].test == "smoke");
    CHECK(loaded.runs[1].test == "stress");
    CHECK(loaded.runs[2].seed == 9);
}

TEST_CASE("empty runs list stays a valid archive") {
    Regression r = sample_regression();
    r.runs.clear();
    const std::string bytes = regression_to_string(r);
    CHECK(regression_from_string(bytes).runs.empty());
}

TEST_CASE("out-of-domain control value reports the control point and line") {
    Regression r = sample_regression();
    std::string bytes = regression_to_string(r);
    // Corrupt the second record (file line 3).
    std::string bad = bytes;
    const auto pos = bad.find("\"mode\":\"A\"");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 10, "\"mode\":\"D\"");
    CHECK_THROWS_WITH_AS(regression_from_string(bad, "bad"), doctest::Contains("mode"),
                         ValidationError);
    CHECK_THROWS_WITH_AS(regression_from_string(bad, "bad"), doctest::Contains("line 3"),
                         ValidationError);
}

TEST_CASE("malformed record cites its line number") {
    std::string bytes = regression_to_string(sample_regression());
    bytes += "{not json\n";
    CHECK_THROWS_WITH_AS(regression_from_string(bytes, "bad"), doctest::Contains("line 4"),
                         ParseError);
}

TEST_CASE("unsupported format_version is rejected") {
    std::string bytes = regression_to_string(sample_regression());
    const auto pos = bytes.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, 18, "\"format_version\":2");
    CHECK_THROWS_WITH_AS(regression_from_string(bytes, "bad"),
                         doctest::Contains("format_version"), ParseError);
}

TEST_CASE("merge concatenates runs in input order") {
    Regression a = sample_regression();
    Regression b = sample_regression();
    b.runs.resize(1);
    b.runs[0].seed = 99;

    const Regression merged = merge_regressions(std::vector<Regression>{a, b});
    REQUIRE(merged.runs.size() == 3);
    CHECK(merged.runs[0].seed == 7);
    CHECK(merged.runs[2].seed == 99);
}

TEST_CASE("merging two stages doubles the run count") {
    // 260-run stage plus a 260-run rerun gives the 520-run follow-up shape.
    Regression stage1 = sample_regression();
    stage1.runs.clear();
    for (int i = 0; i < 260; ++i) {
        RunRecord run = oracle::run("t" + std::to_string(i % 26), 1000 + i, 0.1, {{"b1", 1}});
        run.controls["x"] = 5.0;
        run.controls["mode"] = std::string("A");
        stage1.runs.push_back(std::move(run));
    }
    Regression stage2 = stage1;
    for (auto& run : stage2.runs) run.seed += 260;
    const Regression merged = merge_regressions(std::vector<Regression>{stage1, stage2});
    CHECK(merged.runs.size() == 520);
}

TEST_CASE("merge rejects mismatched spaces listing the symmetric difference") {
    Regression a = sample_regression();
    Regression b = sample_regression();
    b.space = CoverageSpace({oracle::bin("b1", 2), oracle::bin("b3")});
    b.runs.clear();
    CHECK_THROWS_WITH_AS(merge_regressions(std::vector<Regression>{a, b}),
                         doctest::Contains("b2"), ValidationError);
    CHECK_THROWS_WITH_AS(merge_regressions(std::vector<Regression>{a, b}),
                         doctest::Contains("b3"), ValidationError);
}

TEST_CASE("merge rejects mismatched declarations") {
    Regression a = sample_regression();
    Regression b = sample_regression();
    b.declarations[0].name = "y";
    b.runs.clear();
    for (auto& run : a.runs) run.controls.clear();
    CHECK_THROWS_WITH_AS(merge_regressions(std::vector<Regression>{a, b}),
                         doctest::Contains("y"), ValidationError);
}

TEST_CASE("random archives round-trip structurally and byte-exactly") {
    SplitMix64 rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        const DutSpec dut = oracle::random_dut(rng);
        const Regression archive =
            generate_archive(dut, 1 + static_cast<std::uint32_t>(rng.next_index(8)),
                             9000 + trial);
        const std::string bytes = regression_to_string(archive);
        const Regression loaded = regression_from_string(bytes);
        CHECK(loaded == archive);
        CHECK(regression_to_string(loaded) == bytes);
    }
}

TEST_CASE("golden fixtures: load then save reproduces the exact bytes") {
    namespace fs = std::filesystem;
    const fs::path fixtures = oracle::env_or("REGOPT_FIXTURES", "tests/fixtures");

    SUBCASE("archive") {
        const auto path = fixtures / "golden.archive.jsonl";
        REQUIRE(fs::exists(path));
        const std::string bytes = read_file(path);
        CHECK(regression_to_string(load_regression(path)) == bytes);
    }
    SUBCASE("model set") {
        const auto path = fixtures / "golden.models.json";
        REQUIRE(fs::exists(path));
        const std::string bytes = read_file(path);
        CHECK(model_set_to_string(load_model_set(path)) == bytes);
    }
    SUBCASE("plan") {
        const auto path = fixtures / "golden.plan.json";
        REQUIRE(fs::exists(path));
        const std::string bytes = read_file(path);
        CHECK(plan_to_string(load_plan(path)) == bytes);
    }
    SUBCASE("testbench spec") {
        const auto path = fixtures / "golden.dut.json";
        REQUIRE(fs::exists(path));
        const std::string bytes = read_file(path);
        CHECK(dut_spec_to_string(load_dut_spec(path)) == bytes);
    }
}
