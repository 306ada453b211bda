#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "regopt/coverage.hpp"

namespace regopt {

// Stop rule for greedy run selection.
struct RankObjective {
    enum class Kind { cover_all, top_k, until_coverage };

    Kind kind = Kind::cover_all;
    std::uint64_t k = 0;     // top_k
    double coverage = 0.0;   // until_coverage, percent

    static RankObjective cover_all() { return {Kind::cover_all, 0, 0.0}; }
    static RankObjective top_k(std::uint64_t k) { return {Kind::top_k, k, 0.0}; }
    static RankObjective until_coverage(double percent) {
        return {Kind::until_coverage, 0, percent};
    }
};

struct RankStep {
    std::size_t run_index = 0;
    // Weighted progress toward bin thresholds contributed by this pick.
    // Equals the newly satisfied bin weight when every at_least is 1.
    double marginal_gain = 0.0;
    double cumulative_coverage_percent = 0.0;
};

struct RankedSelection {
    std::vector<RankStep> steps;
    double original_coverage_percent = 0.0;
    double selected_coverage_percent = 0.0;

    std::vector<std::size_t> indices() const;
};

// Greedy weighted maximum coverage over the recorded runs. Each iteration
// picks the run with the largest remaining-threshold gain; ties break on
// lower cpu_seconds, then lower run index. Never selects a zero-gain run.
RankedSelection rank(const Regression& regression, const RankObjective& objective);

// New regression containing exactly the selected runs, in selection order.
Regression selection_to_regression(const Regression& regression,
                                   std::span<const std::size_t> indices);

// CSV: step,run_index,test,seed,cpu_seconds,marginal_gain,cumulative_coverage_percent
void write_rank_report_csv(const Regression& regression, const RankedSelection& selection,
                           std::ostream& out);

} // namespace regopt
