// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Oracles are either published table arithmetic or exact
// probabilities computed from the synthetic testbench semantics.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "regopt/coverage.hpp"
#include "regopt/generate.hpp"
#include "regopt/io.hpp"
#include "regopt/learn.hpp"
#include "regopt/methodology.hpp"
#include "regopt/prng.hpp"
#include "regopt/ranking.hpp"
#include "regopt/synthdut.hpp"

using namespace regopt;

namespace {

struct Check {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& message) {
        if (!ok) failures.push_back(message);
    }
    template <typename T>
    void equal(const T& got, const T& want, const std::string& what) {
        if (!(got == want)) failures.push_back(what + " mismatch");
    }
};

// ---------------------------------------------------------------------------
// 1. Published compression arithmetic.
// ---------------------------------------------------------------------------

struct TableEntry {
    const char* label;
    std::uint64_t original_runs;
    double original_cpu_hours;
    std::uint64_t optimized_runs;
    double optimized_cpu_hours;
    double printed_runs_factor;
    int runs_decimals;
    double printed_cpu_factor;
    int cpu_decimals;
};

// Every compression figure derivable from the published run/CPU columns.
const TableEntry kTables[] = {
    // Microprocessor, generated regressions.
    {"uP generated stage I", 260, 12.0, 26, 0.7, 10.0, 0, 17.14, 2},
    {"uP generated stage II", 520, 48.0, 29, 5.2, 17.93, 2, 9.23, 2},
    // Microprocessor, ranked regressions.
    {"uP ranked stage I", 260, 12.0, 8, 1.1, 32.5, 1, 10.91, 2},
    {"uP ranked stage II", 520, 48.0, 9, 1.4, 57.77, 2, 34.29, 2},
    // Mixed-signal SoC, generated.
    {"ms generated P1", 297, 0.200, 110, 0.151, 2.70, 2, 1.32, 2},
    {"ms generated P2", 415, 0.562, 188, 0.337, 2.20, 2, 1.66, 2},
    {"ms generated P3", 2959, 2.813, 786, 0.785, 3.76, 2, 3.58, 2},
    {"ms generated P4", 140, 0.213, 116, 0.133, 1.20, 2, 1.60, 2},
    {"ms generated P5", 1193, 1.336, 318, 0.356, 3.75, 2, 3.75, 2},
    {"ms generated P6", 10, 0.007, 3, 0.003, 3.33, 2, 2.33, 2},
    {"ms generated P7", 110, 0.074, 84, 0.070, 1.30, 2, 1.05, 2},
    {"ms generated total", 5124, 5.205, 1605, 1.835, 3.19, 2, 2.83, 2},
    // Mixed-signal SoC, ranked.
    {"ms ranked P1", 297, 0.200, 87, 0.057, 3.41, 2, 3.51, 2},
    {"ms ranked P2", 415, 0.562, 115, 0.189, 3.60, 2, 2.97, 2},
    {"ms ranked P3", 2959, 2.813, 624, 0.630, 4.74, 2, 4.47, 2},
    {"ms ranked P4", 140, 0.213, 73, 0.129, 1.91, 2, 1.65, 2},
    {"ms ranked P5", 1193, 1.336, 217, 0.232, 5.49, 2, 5.76, 2},
    {"ms ranked P6", 10, 0.007, 10, 0.007, 1.0, 0, 1.0, 0},
    {"ms ranked P7", 110, 0.074, 78, 0.062, 1.41, 2, 1.19, 2},
    {"ms ranked total", 5124, 5.205, 1204, 1.312, 4.25, 2, 3.97, 2},
    // Radar SoC, generated.
    {"radar generated stage I", 271, 0.162, 117, 0.070, 2.31, 2, 2.3, 1},
    {"radar generated stage II", 301, 0.243, 112, 0.079, 2.68, 2, 3.07, 2},
    // Radar SoC, ranked.
    {"radar ranked stage I", 271, 0.162, 91, 0.063, 2.97, 2, 2.57, 2},
    {"radar ranked stage II", 301, 0.243, 101, 0.074, 2.98, 2, 3.28, 2},
};

Regression runs_with_cpu(std::uint64_t runs, double cpu_hours, const CoverageSpace& space) {
    Regression r;
    r.space = space;
    r.runs.reserve(runs);
    for (std::uint64_t i = 0; i < runs; ++i)
        r.runs.push_back(oracle::run("t", i, i == 0 ? cpu_hours * 3600.0 : 0.0, {{"b", 1}}));
    return r;
}

void criterion_metric_arithmetic(Check& check) {
    const CoverageSpace space({oracle::bin("b")});
    for (const TableEntry& entry : kTables) {
        const Regression original =
            runs_with_cpu(entry.original_runs, entry.original_cpu_hours, space);
        const Regression optimized =
            runs_with_cpu(entry.optimized_runs, entry.optimized_cpu_hours, space);
        const ComparisonMetrics m = compare(original, optimized);

        // Published figures are rounded to their printed precision; accept
        // the stated +/-0.01 or half a printed unit, whichever is larger.
        const auto tolerance = [](int decimals) {
            return std::max(0.01, 0.5 * std::pow(10.0, -decimals));
        };
        check.require(m.compression_runs.has_value() && m.compression_cpu.has_value(),
                      std::string(entry.label) + ": factors undefined");
        if (!m.compression_runs || !m.compression_cpu) continue;
        check.require(std::abs(*m.compression_runs - entry.printed_runs_factor) <=
                          tolerance(entry.runs_decimals),
                      std::string(entry.label) + ": run factor " +
                          std::to_string(*m.compression_runs) + " vs printed " +
                          std::to_string(entry.printed_runs_factor));
        check.require(std::abs(*m.compression_cpu - entry.printed_cpu_factor) <=
                          tolerance(entry.cpu_decimals),
                      std::string(entry.label) + ": cpu factor " +
                          std::to_string(*m.compression_cpu) + " vs printed " +
                          std::to_string(entry.printed_cpu_factor));
    }
}

// ---------------------------------------------------------------------------
// 2. Ranking regains exactly 100% on seeded random testbenches.
// ---------------------------------------------------------------------------

void criterion_ranking_regain(Check& check) {
    SplitMix64 rng(202401);
    for (int trial = 0; trial < 50; ++trial) {
        const DutSpec dut = oracle::random_dut(rng);
        const std::uint32_t seeds = 5 + static_cast<std::uint32_t>(rng.next_index(20));
        const Regression archive = generate_archive(dut, seeds, 1000 + trial);

        const RankedSelection sel = rank(archive, RankObjective::cover_all());
        const Regression ranked = selection_to_regression(archive, sel.indices());
        const ComparisonMetrics m = compare(archive, ranked);

        check.require(coverage_percent(ranked) == coverage_percent(archive),
                      "trial " + std::to_string(trial) + ": regain not exactly 100%");
        check.require(m.coverage_regain_percent && *m.coverage_regain_percent == 100.0,
                      "trial " + std::to_string(trial) + ": regain metric not 100");
        check.require(m.compression_runs && *m.compression_runs >= 1.0,
                      "trial " + std::to_string(trial) + ": compression below 1");
    }
}

// ---------------------------------------------------------------------------
// 3. Greedy withstands the exhaustive (1 - 1/e) oracle.
// ---------------------------------------------------------------------------

void criterion_greedy_bound(Check& check) {
    SplitMix64 rng(202402);
    constexpr double kBound = 1.0 - 1.0 / 2.718281828459045;
    for (int trial = 0; trial < 200; ++trial) {
        const Regression instance = oracle::random_cover_instance(rng);
        for (std::size_t k = 1; k <= instance.runs.size(); ++k) {
            const RankedSelection sel = rank(instance, RankObjective::top_k(k));
            const double greedy = sel.steps.empty()
                                      ? 0.0
                                      : sel.steps.back().cumulative_coverage_percent;
            const double optimal = oracle::best_k_subset_coverage(instance, k);
            check.require(greedy >= kBound * optimal - 1e-9,
                          "instance " + std::to_string(trial) + " k=" + std::to_string(k) +
                              ": greedy " + std::to_string(greedy) + " < bound of optimal " +
                              std::to_string(optimal));
        }
    }
}

// ---------------------------------------------------------------------------
// 4. Redundancy-heavy 26x10 benchmark.
// ---------------------------------------------------------------------------

PredicateAtom atom_ge(const char* cp, double a) {
    PredicateAtom atom;
    atom.kind = PredicateAtom::Kind::numeric_ge;
    atom.cp = cp;
    atom.a = a;
    return atom;
}
PredicateAtom atom_le(const char* cp, double a) {
    PredicateAtom atom;
    atom.kind = PredicateAtom::Kind::numeric_le;
    atom.cp = cp;
    atom.a = a;
    return atom;
}
PredicateAtom atom_between(const char* cp, double a, double b) {
    PredicateAtom atom;
    atom.kind = PredicateAtom::Kind::numeric_between;
    atom.cp = cp;
    atom.a = a;
    atom.b = b;
    return atom;
}
PredicateAtom atom_eq(const char* cp, const std::string& v) {
    PredicateAtom atom;
    atom.kind = PredicateAtom::Kind::categorical_eq;
    atom.cp = cp;
    atom.values = {v};
    return atom;
}

DutSpec redundancy_dut() {
    DutSpec dut;
    dut.declarations.push_back({"x0", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"x1", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"mode", CategoricalDomain{{"m0", "m1", "m2", "m3"}}});

    dut.bins.push_back({oracle::bin("always"), {{atom_ge("x0", 0.0)}}, false});
    for (int m = 0; m < 4; ++m)
        dut.bins.push_back(
            {oracle::bin("mode_m" + std::to_string(m)), {{atom_eq("mode", "m" + std::to_string(m))}},
             false});

    std::vector<std::string> shared{"always", "mode_m0", "mode_m1", "mode_m2", "mode_m3"};
    for (int t = 0; t < 26; ++t) {
        const std::string name = "t" + std::to_string(t);
        std::vector<std::string> gates = shared;
        for (int b = 0; b < 3; ++b) {
            const std::string id = name + "_b" + std::to_string(b);
            BinPredicate predicate;
            predicate.atoms.push_back(b == 0   ? atom_ge("x0", 0.1)
                                      : b == 1 ? atom_le("x1", 0.9)
                                               : atom_ge("x1", 0.15));
            dut.bins.push_back({oracle::bin(id), predicate, false});
            gates.push_back(id);
        }
        dut.tests.push_back({name, {}, gates, 1.0 + 0.05 * t, 0.2});
    }
    return dut;
}

void criterion_redundancy_benchmark(Check& check) {
    const DutSpec dut = redundancy_dut();
    const Regression archive = generate_archive(dut, 10, 77000);
    check.require(archive.runs.size() == 260, "expected the 26x10 run shape");

    // The benchmark premise: at least 80% of runs add no new bins in order.
    std::set<std::string> seen;
    std::size_t contributing = 0;
    for (const RunRecord& run : archive.runs) {
        bool added = false;
        for (const auto& [id, count] : run.bins_hit)
            if (count > 0 && seen.insert(id).second) added = true;
        contributing += added;
    }
    check.require(260 - contributing >= 208,
                  "only " + std::to_string(260 - contributing) + " redundant runs");

    const RankedSelection sel = rank(archive, RankObjective::cover_all());
    const Regression ranked = selection_to_regression(archive, sel.indices());
    const ComparisonMetrics ranked_m = compare(archive, ranked);
    check.require(ranked_m.compression_runs && *ranked_m.compression_runs >= 5.0,
                  "ranking compression " +
                      std::to_string(ranked_m.compression_runs.value_or(0.0)) + " < 5");
    check.require(ranked_m.coverage_regain_percent.value_or(0.0) == 100.0,
                  "ranking regain not 100%");

    const ModelSet models = train(archive, TrainConfig{});
    const OptimizedRegression planned = plan(models, Goal::target_coverage(99.0), archive, 4242);
    const Regression replayed = replay_plan(dut, planned);
    const ComparisonMetrics plan_m = compare(archive, replayed);
    check.require(plan_m.compression_runs && *plan_m.compression_runs >= 3.0,
                  "plan compression " + std::to_string(plan_m.compression_runs.value_or(0.0)) +
                      " < 3");
    check.require(plan_m.coverage_regain_percent.value_or(0.0) >= 99.0,
                  "replayed regain " +
                      std::to_string(plan_m.coverage_regain_percent.value_or(0.0)) + " < 99");
}

// ---------------------------------------------------------------------------
// 5. A never-hit gated corner bin is regained through exploration.
// ---------------------------------------------------------------------------

DutSpec corner_dut() {
    DutSpec dut;
    dut.declarations.push_back({"x", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"y", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"z", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"mode", CategoricalDomain{{"A", "B", "C", "D"}}});
    dut.declarations.push_back({"speed", CategoricalDomain{{"s0", "s1", "s2"}}});
    {
        CategoricalDomain bursts;
        for (int b = 0; b < 12; ++b) bursts.values.push_back("b" + std::to_string(b));
        dut.declarations.push_back({"burst", bursts});
    }

    // Body bins keep the original coverage broad.
    dut.bins.push_back({oracle::bin("always"), {{atom_ge("x", 0.0)}}, false});
    for (int q = 0; q < 4; ++q)
        dut.bins.push_back({oracle::bin("xq" + std::to_string(q)),
                            {{atom_between("x", q * 0.25, q * 0.25 + 0.25)}},
                            false});
    for (const char* m : {"A", "B", "C", "D"})
        dut.bins.push_back({oracle::bin(std::string("mode_") + m), {{atom_eq("mode", m)}}, false});
    for (const char* s : {"s0", "s1", "s2"})
        dut.bins.push_back({oracle::bin(std::string("speed_") + s), {{atom_eq("speed", s)}}, false});

    // Corner siblings, reachable only by the corner tests: a ladder of
    // (x, y) threshold pairs. The z-interval conjunct cannot be expressed
    // by the linear models, which keeps their positives unsaturated and the
    // x/y weights pointed at the upper corner.
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            BinPredicate predicate;
            predicate.atoms = {atom_eq("mode", "C"), atom_eq("speed", "s2"),
                               atom_eq("burst", "b7"), atom_ge("x", 0.2 + 0.05 * i),
                               atom_ge("y", 0.2 + 0.05 * j),
                               atom_between("z", 0.3, 0.7)};
            dut.bins.push_back(
                {oracle::bin("corner_s" + std::to_string(4 * i + j)), predicate, false});
        }

    // The target: the same corner with both tails deep enough that the
    // original corner runs never reach it.
    BinPredicate rare;
    rare.atoms = {atom_eq("mode", "C"), atom_eq("speed", "s2"), atom_eq("burst", "b7"),
                  atom_ge("x", 0.88), atom_ge("y", 0.88)};
    dut.bins.push_back({oracle::bin("corner_rare"), rare, false});

    for (int t = 0; t < 28; ++t)
        dut.tests.push_back({"t" + std::to_string(t), {}, std::nullopt, 1.0, 0.1});
    for (const char* corner_name : {"t_cornerA", "t_cornerB"}) {
        DutTest corner;
        corner.name = corner_name;
        corner.overrides = {{"mode", std::string("C")},
                            {"speed", std::string("s2")},
                            {"burst", std::string("b7")}};
        corner.base_cpu_seconds = 1.0;
        corner.cpu_jitter_fraction = 0.1;
        dut.tests.push_back(corner);
    }

    for (DutTest& test : dut.tests) {
        std::vector<std::string> gates;
        for (const DutBin& bin : dut.bins)
            if (bin.bin.id.rfind("corner_", 0) != 0) gates.push_back(bin.bin.id);
        if (test.name.rfind("t_corner", 0) == 0)
            for (const DutBin& bin : dut.bins)
                if (bin.bin.id.rfind("corner_", 0) == 0) gates.push_back(bin.bin.id);
        test.gates = gates;
    }
    return dut;
}

void criterion_regain_above_100(Check& check) {
    const DutSpec dut = corner_dut();

    // Exact rarity under plain domain sampling (no overrides, no gate).
    DutTest plain;
    plain.name = "t0";
    const DutBin& rare_bin = dut.bins.back();
    const double unconstrained =
        oracle::exact_hit_probability(dut, plain, rare_bin);
    check.require(unconstrained <= 0.001,
                  "unconstrained hit probability " + std::to_string(unconstrained) +
                      " above 0.001");

    const Regression archive = generate_archive(dut, 10, 520001);
    check.require(archive.runs.size() == 300, "expected the 300-run original");
    check.require(!hit_set(archive.runs, archive.space).contains("corner_rare"),
                  "the rare bin was already hit in the original");

    const ModelSet models = train(archive, TrainConfig{});
    for (int k = 0; k < 16; ++k) {
        const BinModel* sibling = models.find("corner_s" + std::to_string(k));
        check.require(sibling && sibling->kind == BinModelKind::learned,
                      "sibling " + std::to_string(k) + " not learned");
    }

    int hits = 0;
    bool regain_above_100 = false;
    for (std::uint64_t plan_seed = 1; plan_seed <= 20; ++plan_seed) {
        const OptimizedRegression planned = plan(models, Goal::max_runs(120), archive, plan_seed);
        const Regression replayed = replay_plan(dut, planned);
        if (hit_set(replayed.runs, replayed.space).contains("corner_rare")) {
            ++hits;
            const ComparisonMetrics m = compare(archive, replayed);
            if (m.coverage_regain_percent.value_or(0.0) > 100.0) regain_above_100 = true;
        }
    }
    check.require(hits >= 18, "rare bin hit in only " + std::to_string(hits) + "/20 replays");
    check.require(regain_above_100, "no replay regained more than 100%");
}

// ---------------------------------------------------------------------------
// 6. Model quality on the threshold rule plus the gradient check.
// ---------------------------------------------------------------------------

Regression threshold_rule_runs(std::size_t n, std::uint64_t seed) {
    Regression r;
    r.space = CoverageSpace({oracle::bin("xhigh")});
    r.declarations.push_back({"x", NumericRange{0.0, 1.0}});
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        RunRecord run;
        run.test = i % 2 ? "t1" : "t0";
        run.seed = i;
        run.cpu_seconds = 1.0;
        const double x = rng.next_unit();
        run.controls["x"] = x;
        if (x > 0.8) run.bins_hit["xhigh"] = 1;
        r.runs.push_back(std::move(run));
    }
    return r;
}

double rank_auc(const std::vector<std::pair<double, bool>>& scored) {
    double correct = 0.0;
    std::uint64_t pairs = 0;
    for (const auto& [pa, ya] : scored)
        for (const auto& [pb, yb] : scored) {
            if (!(ya && !yb)) continue;
            ++pairs;
            if (pa > pb) correct += 1.0;
            else if (pa == pb) correct += 0.5;
        }
    return pairs == 0 ? 0.0 : correct / static_cast<double>(pairs);
}

void criterion_model_quality(Check& check) {
    const Regression all = threshold_rule_runs(700, 424242);
    Regression training = all;
    training.runs.resize(500);

    const ModelSet models = train(training, TrainConfig{});
    const BinModel* model = models.find("xhigh");
    check.require(model && model->kind == BinModelKind::learned, "threshold bin not learned");
    check.require(model && model->heldout_auc.has_value() && *model->heldout_auc >= 0.95,
                  "internal held-out AUC below 0.95");

    // 200 evaluation runs the model never saw; labels from the rule itself.
    std::vector<std::pair<double, bool>> scored;
    for (std::size_t i = 500; i < 700; ++i) {
        const RunRecord& run = all.runs[i];
        const Prediction pred = predict(models, run.test, run.controls);
        scored.emplace_back(pred.probability.at("xhigh"),
                            std::get<double>(run.controls.at("x")) > 0.8);
    }
    const double auc = rank_auc(scored);
    check.require(auc >= 0.95, "external AUC " + std::to_string(auc) + " below 0.95");

    // Analytic gradient vs central differences at 100 seeded points.
    const EncodedDataset ds = encode(training);
    for (std::uint32_t hidden : {0u, 4u}) {
        TrainConfig config;
        config.hidden_width = hidden;
        BinTrainer trainer(ds.rows, ds.labels[0], config, 20240606);
        SplitMix64 rng(900 + hidden);
        for (int point = 0; point < 100; ++point) {
            std::vector<double> params(trainer.param_count());
            for (double& p : params) p = 2.0 * rng.next_unit() - 1.0;
            const std::vector<double> grad = trainer.gradient(params);
            const std::size_t j = rng.next_index(trainer.param_count());
            const double h = 1e-6;
            std::vector<double> plus = params, minus = params;
            plus[j] += h;
            minus[j] -= h;
            const double fd = (trainer.loss(plus) - trainer.loss(minus)) / (2.0 * h);
            const double denom = std::max({1.0, std::abs(grad[j]), std::abs(fd)});
            check.require(std::abs(grad[j] - fd) / denom <= 1e-4,
                          "gradient check failed at hidden=" + std::to_string(hidden) +
                              " point " + std::to_string(point));
        }
    }
}

// ---------------------------------------------------------------------------
// 7. Byte determinism of every subcommand across reruns and thread counts.
// ---------------------------------------------------------------------------

int run_tool(const std::string& args) {
    const std::string bin = oracle::env_or("REGOPT_BIN", "regopt");
    const std::string cmd = bin + " --quiet " + args;
    return std::system(cmd.c_str()) == 0 ? 0 : 1;
}

void criterion_determinism(Check& check) {
    namespace fs = std::filesystem;
    const fs::path base = oracle::scratch_dir("acceptance_determinism");

    DutSpec dut = redundancy_dut();
    dut.tests.resize(6); // keep the sweep quick; six tests, full pipeline
    for (DutTest& t : dut.tests) {
        auto& gates = *t.gates;
        std::vector<std::string> kept;
        for (const std::string& g : gates)
            if (g.rfind("t2", 0) != 0 || g.rfind("t1", 0) == 0) kept.push_back(g);
        t.gates = kept;
    }
    const fs::path spec_path = base / "dut.json";
    save_dut_spec(dut, spec_path);

    regopt::write_file(base / "plot.json", R"({
 "scenarios": ["stage1", "stage2"],
 "series": [
  {"method": "ranking", "regain": [100, 100],
   "compression_runs": [32.5, 57.77], "compression_cpu": [10.91, 34.29]},
  {"method": "generated", "regain": [99.9, 99.89],
   "compression_runs": [10, 17.93], "compression_cpu": [17.14, 9.23]}
 ]
})");

    const std::vector<std::string> variants = {"one_a", "one_b", "eight_a", "eight_b"};
    for (const std::string& variant : variants) {
        const fs::path dir = base / variant;
        fs::create_directories(dir);
        const std::string threads =
            variant.rfind("one", 0) == 0 ? "--threads 1 " : "--threads 8 ";
        const std::string spec = spec_path.string();
        const auto at = [&](const char* name) { return (dir / name).string(); };

        bool ok = true;
        ok &= run_tool(threads + "synth --spec " + spec +
                       " --seeds-per-test 10 --base-seed 5 --out " + at("arch.jsonl")) == 0;
        ok &= run_tool(threads + "ingest --input " + at("arch.jsonl") + " --input " +
                       at("arch.jsonl") + " --out " + at("merged.jsonl")) == 0;
        ok &= run_tool(threads + "rank --input " + at("arch.jsonl") +
                       " --objective cover_all --out " + at("ranked.jsonl") + " --report " +
                       at("rank.csv")) == 0;
        ok &= run_tool(threads + "train --input " + at("arch.jsonl") + " --seed 3 --out " +
                       at("models.json")) == 0;
        ok &= run_tool(threads + "analyze --models " + at("models.json") + " --out " +
                       at("influence.csv")) == 0;
        ok &= run_tool(threads + "generate --input " + at("arch.jsonl") + " --models " +
                       at("models.json") + " --goal cov=99 --plan-seed 11 --out " +
                       at("plan.json")) == 0;
        ok &= run_tool(threads + "replay --spec " + spec + " --plan " + at("plan.json") +
                       " --out " + at("replayed.jsonl")) == 0;
        ok &= run_tool(threads + "metrics --original " + at("arch.jsonl") + " --optimized " +
                       at("replayed.jsonl") + " --out " + at("metrics.csv") + " --bins " +
                       at("bins.csv")) == 0;
        ok &= run_tool(threads + "loop --input " + at("arch.jsonl") + " --spec " + spec +
                       " --goal cov=99 --threshold 99 --max-iter 2 --plan-seed 7 --state " +
                       at("state")) == 0;
        ok &= run_tool(threads + "report --data " + (base / "plot.json").string() +
                       " --out-dir " + at("charts")) == 0;
        check.require(ok, variant + ": a subcommand failed");
    }

    const char* files[] = {"arch.jsonl",    "merged.jsonl",      "ranked.jsonl",
                           "rank.csv",      "models.json",       "influence.csv",
                           "plan.json",     "replayed.jsonl",    "metrics.csv",
                           "bins.csv",      "state/outcome.json", "state/models.json",
                           "charts/regain.csv", "charts/regain.svg",
                           "charts/compression_runs.csv", "charts/compression_cpu.svg"};
    const std::string reference = variants[0];
    for (const char* file : files) {
        const std::string want = read_file(base / reference / file);
        for (std::size_t v = 1; v < variants.size(); ++v) {
            const std::string got = read_file(base / variants[v] / file);
            check.require(got == want,
                          std::string(file) + " differs between " + reference + " and " +
                              variants[v]);
        }
    }
}

// ---------------------------------------------------------------------------
// 8. Methodology loop scenarios.
// ---------------------------------------------------------------------------

DutSpec loop_easy_dut() {
    DutSpec dut;
    dut.declarations.push_back({"x", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"mode", CategoricalDomain{{"A", "B", "C"}}});
    dut.bins.push_back({oracle::bin("low"), {{atom_le("x", 0.5)}}, false});
    dut.bins.push_back({oracle::bin("high"), {{atom_ge("x", 0.5)}}, false});
    dut.bins.push_back({oracle::bin("modeC"), {{atom_eq("mode", "C")}}, false});
    dut.tests.push_back({"t0", {}, std::nullopt, 1.0, 0.1});
    dut.tests.push_back({"t1", {}, std::nullopt, 1.5, 0.1});
    return dut;
}

DutSpec loop_banded_dut() {
    DutSpec dut;
    dut.declarations.push_back({"x", NumericRange{0.0, 1.0}});
    dut.declarations.push_back({"mode", CategoricalDomain{{"A", "B", "C", "D"}}});
    for (int band = 0; band < 5; ++band)
        dut.bins.push_back({oracle::bin("band" + std::to_string(band)),
                            {{atom_between("x", band * 0.2, band * 0.2 + 0.2)}},
                            false});
    for (const char* m : {"A", "B", "C", "D"})
        dut.bins.push_back({oracle::bin(std::string("mode") + m), {{atom_eq("mode", m)}}, false});
    dut.tests.push_back({"t0", {}, std::nullopt, 1.0, 0.1});
    dut.tests.push_back({"t1", {}, std::nullopt, 1.5, 0.1});
    return dut;
}

void criterion_methodology_loop(Check& check) {
    // Immediate accept: the ranked core regains everything.
    {
        const DutSpec dut = loop_easy_dut();
        const Regression archive = generate_archive(dut, 20, 3);
        LoopConfig config;
        const LoopOutcome outcome = run_loop(archive, dut, Goal::target_coverage(99.0), config);
        check.require(outcome.status == LoopOutcome::Status::accepted, "easy loop not accepted");
        check.require(outcome.iterations.size() == 1, "easy loop took several iterations");
    }
    // Tightening: an undersized run budget is accepted by iteration 3.
    {
        const DutSpec dut = loop_banded_dut();
        const Regression archive = generate_archive(dut, 40, 11);
        LoopConfig config;
        const LoopOutcome outcome = run_loop(archive, dut, Goal::max_runs(2), config);
        check.require(outcome.status == LoopOutcome::Status::accepted, "banded loop not accepted");
        check.require(outcome.iterations.size() >= 2 && outcome.iterations.size() <= 3,
                      "banded loop iterations " + std::to_string(outcome.iterations.size()));
        check.require(outcome.iterations.back().regain_percent >= 99.0,
                      "banded loop regain below 99");
    }
    // Exhausted: the archive covers a bin the bench can no longer hit.
    {
        const DutSpec dut = loop_easy_dut();
        const Regression archive = generate_archive(dut, 20, 3);
        DutSpec changed = loop_easy_dut();
        changed.bins[2].predicate.atoms[0] = atom_ge("x", 1.5);
        LoopConfig config;
        config.regain_threshold_percent = 100.0;
        config.max_iterations = 3;
        const LoopOutcome outcome =
            run_loop(archive, changed, Goal::target_coverage(100.0), config);
        check.require(outcome.status == LoopOutcome::Status::exhausted,
                      "impossible loop not exhausted");
        check.require(outcome.iterations.size() == 3, "exhausted loop iteration count");
    }
    // Idempotence: an accepted outcome is served from state without retraining.
    {
        const DutSpec dut = loop_easy_dut();
        const Regression archive = generate_archive(dut, 20, 3);
        LoopConfig config;
        config.state_dir = oracle::scratch_dir("acceptance_loop_state");
        const LoopOutcome first = run_loop(archive, dut, Goal::target_coverage(99.0), config);
        const LoopOutcome second = run_loop(archive, dut, Goal::target_coverage(99.0), config);
        check.require(first.retrain_count == 1, "first loop did not train once");
        check.require(second.loaded_from_cache && second.retrain_count == 0,
                      "re-run retrained or missed the cache");
        check.require(second.iterations.size() == first.iterations.size() &&
                          second.recommendation == first.recommendation,
                      "cached outcome differs");
    }
}

// ---------------------------------------------------------------------------
// 9. Round-trip identities on the golden fixtures.
// ---------------------------------------------------------------------------

void criterion_round_trip(Check& check) {
    namespace fs = std::filesystem;
    const fs::path fixtures = oracle::env_or("REGOPT_FIXTURES", "tests/fixtures");

    {
        const fs::path path = fixtures / "golden.archive.jsonl";
        const std::string bytes = read_file(path);
        const Regression loaded = load_regression(path);
        check.require(regression_to_string(loaded) == bytes, "archive bytes changed");
        check.require(regression_from_string(regression_to_string(loaded)) == loaded,
                      "archive structure changed");
    }
    {
        const fs::path path = fixtures / "golden.models.json";
        const std::string bytes = read_file(path);
        const ModelSet loaded = load_model_set(path);
        check.require(model_set_to_string(loaded) == bytes, "model bytes changed");
        check.require(model_set_from_string(model_set_to_string(loaded)) == loaded,
                      "model structure changed");
    }
    {
        const fs::path path = fixtures / "golden.plan.json";
        const std::string bytes = read_file(path);
        const OptimizedRegression loaded = load_plan(path);
        check.require(plan_to_string(loaded) == bytes, "plan bytes changed");
        check.require(plan_from_string(plan_to_string(loaded)) == loaded,
                      "plan structure changed");
    }
    {
        const fs::path path = fixtures / "golden.dut.json";
        const std::string bytes = read_file(path);
        const DutSpec loaded = load_dut_spec(path);
        check.require(dut_spec_to_string(loaded) == bytes, "spec bytes changed");
        check.require(dut_spec_from_string(dut_spec_to_string(loaded)) == loaded,
                      "spec structure changed");
    }
}

struct Criterion {
    int number;
    const char* name;
    double budget_seconds;
    std::function<void(Check&)> body;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "published compression arithmetic", 1.0, criterion_metric_arithmetic},
        {2, "ranking regains exactly 100% on seeded benches", 30.0, criterion_ranking_regain},
        {3, "greedy meets the exhaustive (1-1/e) bound", 60.0, criterion_greedy_bound},
        {4, "redundancy benchmark compresses and regains", 60.0, criterion_redundancy_benchmark},
        {5, "never-hit corner bin regained above 100%", 60.0, criterion_regain_above_100},
        {6, "threshold-rule model quality and gradient check", 30.0, criterion_model_quality},
        {7, "byte-deterministic subcommands across threads", 60.0, criterion_determinism},
        {8, "methodology loop scenarios", 60.0, criterion_methodology_loop},
        {9, "round-trip identities on golden fixtures", 5.0, criterion_round_trip},
    };

    int failed = 0;
    for (const Criterion& criterion : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.body(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > criterion.budget_seconds)
            check.failures.push_back("runtime " + std::to_string(elapsed) + "s over the " +
                                     std::to_string(criterion.budget_seconds) + "s budget");

        if (check.failures.empty()) {
            std::printf("criterion %d (%s): PASS (%.2fs)\n", criterion.number, criterion.name,
                        elapsed);
        } else {
            ++failed;
            std::printf("criterion %d (%s): FAIL (%.2fs)\n", criterion.number, criterion.name,
                        elapsed);
            for (const std::string& failure : check.failures)
                std::printf("    - %s\n", failure.c_str());
        }
    }
    return failed == 0 ? 0 : 1;
}
