#include "regopt/methodology.hpp"

#include <cmath>

#include <json.hpp>

#include "regopt/errors.hpp"
#include "regopt/io.hpp"
#include "regopt/prng.hpp"

namespace regopt {

using nlohmann::json;

Goal tighten_goal(const Goal& goal) {
    Goal next = goal;
    switch (goal.kind) {
    case Goal::Kind::max_runs:
        next.value = std::ceil(goal.value * 1.5);
        break;
    case Goal::Kind::target_coverage:
        next.value = std::min(100.0, goal.value + (100.0 - goal.value) / 2.0);
        break;
    case Goal::Kind::max_cpu_seconds:
        next.value = goal.value * 1.5;
        break;
    }
    return next;
}

bool needs_refresh(std::string_view previous_archive_digest,
                   std::string_view previous_dut_digest, const Regression& archive,
                   const DutSpec& dut) {
    return digest_string(regression_to_string(archive)) != previous_archive_digest ||
           digest_string(dut_spec_to_string(dut)) != previous_dut_digest;
}

namespace {

json goal_record(const Goal& goal) {
    const char* kind = goal.kind == Goal::Kind::target_coverage ? "target_coverage"
                       : goal.kind == Goal::Kind::max_runs      ? "max_runs"
                                                                : "max_cpu_seconds";
    return json{{"kind", kind},
                {"safety_cap_multiplier", goal.safety_cap_multiplier},
                {"value", goal.value}};
}

Goal goal_from_record(const json& j) {
    Goal goal;
    const std::string kind = j.at("kind").get<std::string>();
    goal.kind = kind == "target_coverage" ? Goal::Kind::target_coverage
                : kind == "max_runs"      ? Goal::Kind::max_runs
                                          : Goal::Kind::max_cpu_seconds;
    goal.value = j.at("value").get<double>();
    goal.safety_cap_multiplier = j.at("safety_cap_multiplier").get<double>();
    return goal;
}

json optional_metric(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_metric_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json metrics_record(const ComparisonMetrics& m) {
    return json{{"compression_cpu", optional_metric(m.compression_cpu)},
                {"compression_runs", optional_metric(m.compression_runs)},
                {"coverage_regain_percent", optional_metric(m.coverage_regain_percent)},
                {"optimized_coverage_percent", m.optimized_coverage_percent},
                {"optimized_cpu_seconds", m.optimized_cpu_seconds},
                {"optimized_runs", m.optimized_runs},
                {"original_coverage_percent", m.original_coverage_percent},
                {"original_cpu_seconds", m.original_cpu_seconds},
                {"original_runs", m.original_runs}};
}

ComparisonMetrics metrics_from_record(const json& j) {
    ComparisonMetrics m;
    m.original_runs = j.at("original_runs").get<std::uint64_t>();
    m.optimized_runs = j.at("optimized_runs").get<std::uint64_t>();
    m.original_cpu_seconds = j.at("original_cpu_seconds").get<double>();
    m.optimized_cpu_seconds = j.at("optimized_cpu_seconds").get<double>();
    m.original_coverage_percent = j.at("original_coverage_percent").get<double>();
    m.optimized_coverage_percent = j.at("optimized_coverage_percent").get<double>();
    m.coverage_regain_percent = optional_metric_from(j.at("coverage_regain_percent"));
    m.compression_runs = optional_metric_from(j.at("compression_runs"));
    m.compression_cpu = optional_metric_from(j.at("compression_cpu"));
    return m;
}

json config_fingerprint(const Goal& initial_goal, const LoopConfig& config) {
    return json{{"generate",
                 json{{"explore_threshold", config.generate.explore_threshold},
                      {"grid_points", config.generate.grid_points},
                      {"narrow_fraction", config.generate.narrow_fraction}}},
                {"initial_goal", goal_record(initial_goal)},
                {"max_iterations", config.max_iterations},
                {"plan_seed", config.plan_seed},
                {"regain_threshold_percent", config.regain_threshold_percent},
                {"train",
                 json{{"batch_size", config.train.batch_size},
                      {"epochs", config.train.epochs},
                      {"heldout_fraction", config.train.heldout_fraction},
                      {"hidden_width", config.train.hidden_width},
                      {"l2", config.train.l2},
                      {"learning_rate", config.train.learning_rate},
                      {"seed", config.train.seed},
                      {"unconditional_threshold", config.train.unconditional_threshold}}}};
}

json outcome_record(const LoopOutcome& outcome, const std::string& archive_digest,
                    const std::string& dut_digest, const std::string& config_digest) {
    json iterations = json::array();
    for (const IterationRecord& it : outcome.iterations) {
        iterations.push_back(json{{"goal", goal_record(it.goal)},
                                  {"iteration", it.iteration},
                                  {"metrics", metrics_record(it.metrics)},
                                  {"plan_digest", it.plan_digest},
                                  {"plan_runs", it.plan_runs},
                                  {"regain_percent", it.regain_percent}});
    }
    return json{{"archive_digest", archive_digest},
                {"best_iteration", outcome.best_iteration},
                {"config_digest", config_digest},
                {"dut_digest", dut_digest},
                {"iterations", std::move(iterations)},
                {"recommendation", outcome.recommendation},
                {"retrain_count", outcome.retrain_count},
                {"status",
                 outcome.status == LoopOutcome::Status::accepted ? "accepted" : "exhausted"}};
}

LoopOutcome outcome_from_record(const json& j) {
    LoopOutcome outcome;
    outcome.status = j.at("status").get<std::string>() == "accepted"
                         ? LoopOutcome::Status::accepted
                         : LoopOutcome::Status::exhausted;
    outcome.best_iteration = j.at("best_iteration").get<std::uint32_t>();
    outcome.recommendation = j.at("recommendation").get<std::string>();
    outcome.retrain_count = j.at("retrain_count").get<std::uint32_t>();
    for (const json& it : j.at("iterations")) {
        IterationRecord rec;
        rec.iteration = it.at("iteration").get<std::uint32_t>();
        rec.goal = goal_from_record(it.at("goal"));
        rec.plan_digest = it.at("plan_digest").get<std::string>();
        rec.plan_runs = it.at("plan_runs").get<std::uint64_t>();
        rec.regain_percent = it.at("regain_percent").get<double>();
        rec.metrics = metrics_from_record(it.at("metrics"));
        outcome.iterations.push_back(std::move(rec));
    }
    return outcome;
}

} // namespace

LoopOutcome run_loop(const Regression& archive, const DutSpec& dut, const Goal& initial_goal,
                     const LoopConfig& config) {
    if (!(config.regain_threshold_percent > 0.0 && config.regain_threshold_percent <= 100.0))
        throw ValidationError("regain threshold must be in (0, 100]");
    if (config.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");

    const std::string archive_digest = digest_string(regression_to_string(archive));
    const std::string dut_digest = digest_string(dut_spec_to_string(dut));
    const std::string config_digest =
        digest_string(config_fingerprint(initial_goal, config).dump());

    namespace fs = std::filesystem;
    fs::path outcome_path, models_path, models_meta_path, plans_dir;
    if (config.state_dir) {
        fs::create_directories(*config.state_dir);
        outcome_path = *config.state_dir / "outcome.json";
        models_path = *config.state_dir / "models.json";
        models_meta_path = *config.state_dir / "models.meta.json";
        plans_dir = *config.state_dir / "plans";

        // An accepted outcome for identical inputs short-circuits the loop.
        if (fs::exists(outcome_path)) {
            const json stored = json::parse(read_file(outcome_path));
            if (stored.at("archive_digest") == archive_digest &&
                stored.at("dut_digest") == dut_digest &&
                stored.at("config_digest") == config_digest &&
                stored.at("status") == "accepted") {
                LoopOutcome cached = outcome_from_record(stored);
                cached.loaded_from_cache = true;
                cached.retrain_count = 0;
                return cached;
            }
        }
    }

    LoopOutcome outcome;

    // Models are (re)trained only when the archive or training config changed.
    ModelSet models;
    bool have_models = false;
    if (config.state_dir && fs::exists(models_path) && fs::exists(models_meta_path)) {
        const json meta = json::parse(read_file(models_meta_path));
        const std::string train_digest =
            digest_string(config_fingerprint(initial_goal, config).at("train").dump());
        if (meta.at("archive_digest") == archive_digest &&
            meta.at("train_digest") == train_digest) {
            models = load_model_set(models_path);
            have_models = true;
        }
    }
    if (!have_models) {
        models = train(archive, config.train);
        outcome.retrain_count = 1;
        if (config.state_dir) {
            save_model_set(models, models_path);
            const std::string train_digest =
                digest_string(config_fingerprint(initial_goal, config).at("train").dump());
            write_file(models_meta_path,
                       json{{"archive_digest", archive_digest},
                            {"train_digest", train_digest}}
                               .dump(1) +
                           "\n");
        }
    }

    if (config.state_dir) fs::create_directories(plans_dir);

    Goal goal = initial_goal;
    for (std::uint32_t k = 1; k <= config.max_iterations; ++k) {
        OptimizedRegression iteration_plan =
            plan(models, goal, archive, config.plan_seed + (k - 1), config.generate);
        const Regression replayed = replay_plan(dut, iteration_plan);
        const ComparisonMetrics metrics = compare(archive, replayed);
        // Empty original coverage makes regain undefined; any replay then
        // trivially reproduces it.
        const double regain = metrics.coverage_regain_percent.value_or(100.0);

        IterationRecord rec;
        rec.iteration = k;
        rec.goal = goal;
        rec.plan_digest = digest_string(plan_to_string(iteration_plan));
        rec.plan_runs = iteration_plan.runs.size();
        rec.regain_percent = regain;
        rec.metrics = metrics;
        outcome.iterations.push_back(rec);

        if (config.state_dir)
            save_plan(iteration_plan, plans_dir / ("iter" + std::to_string(k) + ".plan.json"));

        if (regain >= config.regain_threshold_percent) {
            outcome.status = LoopOutcome::Status::accepted;
            break;
        }
        goal = tighten_goal(goal);
    }

    outcome.best_iteration = 1;
    for (const IterationRecord& rec : outcome.iterations)
        if (rec.regain_percent > outcome.iterations[outcome.best_iteration - 1].regain_percent)
            outcome.best_iteration = rec.iteration;

    const IterationRecord& best = outcome.iterations[outcome.best_iteration - 1];
    char regain_buf[64];
    std::snprintf(regain_buf, sizeof(regain_buf), "%.2f", best.regain_percent);
    if (outcome.status == LoopOutcome::Status::accepted) {
        outcome.recommendation = "iteration " + std::to_string(outcome.best_iteration) +
                                 " regained " + regain_buf +
                                 "% of the original coverage; adopt its plan as the daily "
                                 "regression";
    } else {
        outcome.recommendation =
            "no iteration reached the regain threshold; best was iteration " +
            std::to_string(outcome.best_iteration) + " at " + regain_buf +
            "% - tighten the goal, raise the budget, or refresh the models";
    }

    if (config.state_dir)
        write_file(outcome_path,
                   outcome_record(outcome, archive_digest, dut_digest, config_digest).dump(1) +
                       "\n");
    return outcome;
}

} // namespace regopt
