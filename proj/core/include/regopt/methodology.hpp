#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "regopt/generate.hpp"
#include "regopt/synthdut.hpp"

namespace regopt {

struct LoopConfig {
    double regain_threshold_percent = 99.0;
    std::uint32_t max_iterations = 5;
    TrainConfig train;
    GenerateConfig generate;
    std::uint64_t plan_seed = 1; // iteration k plans with plan_seed + k - 1
    // When set, persists models, plans, digests and the outcome record;
    // an accepted outcome with unchanged inputs is returned from cache.
    std::optional<std::filesystem::path> state_dir;
};

struct IterationRecord {
    std::uint32_t iteration = 0; // 1-based
    Goal goal;
    std::string plan_digest;
    std::uint64_t plan_runs = 0;
    double regain_percent = 0.0;
    ComparisonMetrics metrics;
};

struct LoopOutcome {
    enum class Status { accepted, exhausted };

    std::vector<IterationRecord> iterations;
    Status status = Status::exhausted;
    std::uint32_t best_iteration = 0; // 1-based; highest regain, earliest on ties
    std::string recommendation;
    std::uint32_t retrain_count = 0;
    bool loaded_from_cache = false;
};

// One tightening step: run budgets grow by 1.5x (rounded up), coverage
// targets halve the remaining gap to 100, CPU budgets grow by 1.5x.
// Never loosens a goal.
Goal tighten_goal(const Goal& goal);

// True iff either content digest changed since the recorded state.
bool needs_refresh(std::string_view previous_archive_digest,
                   std::string_view previous_dut_digest, const Regression& archive,
                   const DutSpec& dut);

// Train (once) -> plan -> replay -> compare; accept when the replayed regain
// meets the threshold, otherwise tighten the goal and repeat up to
// max_iterations. Stage failures propagate.
LoopOutcome run_loop(const Regression& archive, const DutSpec& dut, const Goal& initial_goal,
                     const LoopConfig& config);

} // namespace regopt
