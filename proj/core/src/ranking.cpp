#include "regopt/ranking.hpp"

#include <algorithm>
#include <ostream>

#include "regopt/errors.hpp"
#include "regopt/format.hpp"
#include "regopt/parallel.hpp"

namespace regopt {

namespace {

struct RunHits {
    // (bin index, hit count), sorted by bin index so gain sums are
    // evaluated in a fixed order regardless of scheduling.
    std::vector<std::pair<std::size_t, std::uint64_t>> hits;
    double cpu_seconds = 0.0;
};

struct Candidate {
    double gain = 0.0;
    double cpu = 0.0;
    std::size_t index = 0;

    // Total order: higher gain first, then cheaper, then earlier in file.
    bool better_than(const Candidate& other) const {
        if (gain != other.gain) return gain > other.gain;
        if (cpu != other.cpu) return cpu < other.cpu;
        return index < other.index;
    }
};

} // namespace

std::vector<std::size_t> RankedSelection::indices() const {
    std::vector<std::size_t> out;
    out.reserve(steps.size());
    for (const RankStep& s : steps) out.push_back(s.run_index);
    return out;
}

RankedSelection rank(const Regression& regression, const RankObjective& objective) {
    if (regression.runs.empty())
        throw ValidationError("cannot rank a regression with no runs");

    const auto& bins = regression.space.bins();
    const std::size_t n_runs = regression.runs.size();

    std::vector<RunHits> runs(n_runs);
    for (std::size_t i = 0; i < n_runs; ++i) {
        runs[i].cpu_seconds = regression.runs[i].cpu_seconds;
        for (const auto& [id, count] : regression.runs[i].bins_hit) {
            auto idx = regression.space.index_of(id);
            if (!idx) throw ValidationError("unknown bin id '" + id + "'");
            runs[i].hits.emplace_back(*idx, count);
        }
        std::sort(runs[i].hits.begin(), runs[i].hits.end());
    }

    // Full-regression satisfied weight is the cover_all target.
    std::vector<std::uint64_t> full_counts(bins.size(), 0);
    for (const RunHits& r : runs)
        for (const auto& [b, c] : r.hits) full_counts[b] += c;
    std::uint64_t full_satisfied_weight = 0;
    for (std::size_t b = 0; b < bins.size(); ++b)
        if (full_counts[b] >= bins[b].at_least) full_satisfied_weight += bins[b].weight;

    const std::uint64_t total_weight = regression.space.total_weight();
    const auto percent_of = [&](std::uint64_t satisfied) {
        return 100.0 * static_cast<double>(satisfied) / static_cast<double>(total_weight);
    };

    RankedSelection result;
    result.original_coverage_percent = percent_of(full_satisfied_weight);

    std::vector<std::uint64_t> acc(bins.size(), 0);
    std::vector<char> selected(n_runs, 0);
    std::uint64_t satisfied_weight = 0;

    const auto gain_of = [&](std::size_t i) {
        double gain = 0.0;
        for (const auto& [b, c] : runs[i].hits) {
            if (acc[b] >= bins[b].at_least) continue;
            const std::uint64_t remaining = bins[b].at_least - acc[b];
            const std::uint64_t progress = std::min<std::uint64_t>(c, remaining);
            gain += static_cast<double>(bins[b].weight) * static_cast<double>(progress) /
                    static_cast<double>(bins[b].at_least);
        }
        return gain;
    };

    std::vector<double> gains(n_runs, 0.0);
    for (;;) {
        if (objective.kind == RankObjective::Kind::top_k &&
            result.steps.size() >= objective.k)
            break;
        if (objective.kind == RankObjective::Kind::cover_all &&
            satisfied_weight >= full_satisfied_weight)
            break;
        if (objective.kind == RankObjective::Kind::until_coverage &&
            percent_of(satisfied_weight) >= objective.coverage)
            break;

        parallel_for(n_runs, [&](std::size_t i) {
            gains[i] = selected[i] ? 0.0 : gain_of(i);
        });

        Candidate best{0.0, 0.0, n_runs};
        for (std::size_t i = 0; i < n_runs; ++i) {
            if (selected[i] || gains[i] <= 0.0) continue;
            Candidate c{gains[i], runs[i].cpu_seconds, i};
            if (best.index == n_runs || c.better_than(best)) best = c;
        }
        if (best.index == n_runs) break; // no run adds progress

        selected[best.index] = 1;
        for (const auto& [b, c] : runs[best.index].hits) {
            const bool was_satisfied = acc[b] >= bins[b].at_least;
            acc[b] += c;
            if (!was_satisfied && acc[b] >= bins[b].at_least)
                satisfied_weight += bins[b].weight;
        }
        result.steps.push_back(
            {best.index, best.gain, percent_of(satisfied_weight)});
    }

    result.selected_coverage_percent = percent_of(satisfied_weight);
    return result;
}

Regression selection_to_regression(const Regression& regression,
                                   std::span<const std::size_t> indices) {
    Regression out;
    out.space = regression.space;
    out.declarations = regression.declarations;
    out.runs.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= regression.runs.size())
            throw ValidationError("selection index " + std::to_string(idx) +
                                  " out of range (regression has " +
                                  std::to_string(regression.runs.size()) + " runs)");
        out.runs.push_back(regression.runs[idx]);
    }
    return out;
}

void write_rank_report_csv(const Regression& regression, const RankedSelection& selection,
                           std::ostream& out) {
    out << "step,run_index,test,seed,cpu_seconds,marginal_gain,cumulative_coverage_percent\n";
    std::size_t step = 0;
    for (const RankStep& s : selection.steps) {
        const RunRecord& run = regression.runs[s.run_index];
        out << step++ << ',' << s.run_index << ',' << run.test << ',' << run.seed << ','
            << format_double(run.cpu_seconds) << ',' << format_double(s.marginal_gain) << ','
            << format_double(s.cumulative_coverage_percent) << '\n';
    }
}

} // namespace regopt
