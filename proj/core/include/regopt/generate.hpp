#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "regopt/learn.hpp"

namespace regopt {

// Exactly one bound drives the plan; the safety cap limits total planned
// runs to a multiple of the original run count regardless of the goal.
struct Goal {
    enum class Kind { target_coverage, max_runs, max_cpu_seconds };

    Kind kind = Kind::target_coverage;
    double value = 100.0;
    double safety_cap_multiplier = 4.0;

    static Goal target_coverage(double percent) { return {Kind::target_coverage, percent, 4.0}; }
    static Goal max_runs(std::uint64_t runs) {
        return {Kind::max_runs, static_cast<double>(runs), 4.0};
    }
    static Goal max_cpu_seconds(double seconds) { return {Kind::max_cpu_seconds, seconds, 4.0}; }

    bool operator==(const Goal&) const = default;
};

struct NumericConstraint {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const NumericConstraint&) const = default;
};

struct CategoricalConstraint {
    std::vector<std::string> values; // subset of declared values, declared order
    bool operator==(const CategoricalConstraint&) const = default;
};

// Per-control-point narrowing of the sampling domain. Absent entries leave
// the declared domain untouched; present entries must stay inside it.
struct ConstraintSet {
    std::map<std::string, std::variant<NumericConstraint, CategoricalConstraint>> narrowings;

    bool empty() const { return narrowings.empty(); }
    bool operator==(const ConstraintSet&) const = default;
};

void validate_constraints(const ConstraintSet& constraints,
                          std::span<const ControlPointDecl> declarations);

enum class PlanPhase { core, explore };

struct PlannedRun {
    std::string test;
    std::uint64_t seed = 0;
    ConstraintSet constraints;
    std::vector<std::string> targeted_bins;
    double expected_gain = 0.0;
    PlanPhase phase = PlanPhase::core;

    bool operator==(const PlannedRun&) const = default;
};

struct OptimizedRegression {
    int format_version = 1;
    std::vector<ControlPointDecl> declarations; // domains the constraints narrow
    std::vector<PlannedRun> runs;
    std::string archive_digest;
    std::string model_digest;
    Goal goal;
    std::uint64_t plan_seed = 0;
    std::vector<std::string> shortfall_bins; // bins the plan does not expect to cover
    double expected_coverage_percent = 0.0;

    bool operator==(const OptimizedRegression&) const = default;
};

struct GenerateConfig {
    std::uint32_t grid_points = 17;    // numeric sweep resolution
    double narrow_fraction = 0.5;      // narrowed interval width / declared width
    double explore_threshold = 0.9;    // expected per-bin probability that counts as covered

    bool operator==(const GenerateConfig&) const = default;
};

struct ConstraintProposal {
    std::string test;
    ConstraintSet constraints;
    double probability = 0.0;       // model estimate at the proposal point
    std::vector<double> features;   // representative feature vector
};

// Coordinate ascent on the bin's model: choose the best test one-hot, then
// per control point in declaration order narrow numerics to a centered
// half-width window around the grid argmax and pin categoricals to the top
// value, in both cases only when the best strictly beats the domain average.
// Two sweeps; deterministic.
ConstraintProposal propose_constraints(const ModelSet& models, const BinModel& model,
                                       const GenerateConfig& config = {});

// Two-phase plan: a replay core that pins each greedily-ranked original run
// to its exact test/seed/control values, then model-driven exploration runs
// for bins whose accumulated expected probability is still below the
// explore threshold. Deterministic given plan_seed.
OptimizedRegression plan(const ModelSet& models, const Goal& goal,
                         const Regression& original, std::uint64_t plan_seed,
                         const GenerateConfig& config = {});

struct ComparisonMetrics {
    std::uint64_t original_runs = 0;
    std::uint64_t optimized_runs = 0;
    double original_cpu_seconds = 0.0;
    double optimized_cpu_seconds = 0.0;
    double original_coverage_percent = 0.0;
    double optimized_coverage_percent = 0.0;
    // Undefined when the corresponding denominator is zero.
    std::optional<double> coverage_regain_percent;
    std::optional<double> compression_runs;
    std::optional<double> compression_cpu;
};

// regain = 100 * optimized coverage / original coverage;
// compression_runs = |original| / |optimized|; compression_cpu likewise.
ComparisonMetrics compare(const Regression& original, const Regression& optimized);

// CSV, one "name,value" row per metric; undefined fields print "undefined".
void write_metrics_csv(const ComparisonMetrics& metrics, std::ostream& out);

} // namespace regopt
