#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regopt/errors.hpp"
#include "regopt/format.hpp"
#include "regopt/generate.hpp"
#include "regopt/io.hpp"
#include "regopt/learn.hpp"
#include "regopt/methodology.hpp"
#include "regopt/parallel.hpp"
#include "regopt/ranking.hpp"
#include "regopt/report.hpp"
#include "regopt/synthdut.hpp"

namespace {

struct GlobalOptions {
    bool quiet = false;
    bool json_logs = false;
    unsigned threads = 0;
};

void emit_log(const GlobalOptions& g, const char* level, const std::string& message) {
    if (g.json_logs) {
        std::string escaped;
        for (char c : message) {
            if (c == '"' || c == '\\') escaped += '\\';
            escaped += c;
        }
        std::cerr << "{\"level\":\"" << level << "\",\"message\":\"" << escaped << "\"}\n";
    } else {
        std::cerr << '[' << level << "] " << message << '\n';
    }
}

void log_info(const GlobalOptions& g, const std::string& message) {
    if (!g.quiet) emit_log(g, "info", message);
}

void log_error(const GlobalOptions& g, const std::string& message) {
    emit_log(g, "error", message);
}

regopt::RankObjective parse_objective(const std::string& text) {
    if (text == "cover_all") return regopt::RankObjective::cover_all();
    if (text.rfind("top_k=", 0) == 0) {
        const unsigned long long k = std::stoull(text.substr(6));
        return regopt::RankObjective::top_k(k);
    }
    if (text.rfind("until_coverage=", 0) == 0)
        return regopt::RankObjective::until_coverage(std::stod(text.substr(15)));
    throw CLI::ValidationError("--objective",
                               "expected cover_all, top_k=K or until_coverage=C");
}

regopt::Goal parse_goal(const std::string& text, double safety_cap) {
    regopt::Goal goal;
    if (text.rfind("cov=", 0) == 0)
        goal = regopt::Goal::target_coverage(std::stod(text.substr(4)));
    else if (text.rfind("runs=", 0) == 0)
        goal = regopt::Goal::max_runs(std::stoull(text.substr(5)));
    else if (text.rfind("cpu=", 0) == 0)
        goal = regopt::Goal::max_cpu_seconds(std::stod(text.substr(4)));
    else
        throw CLI::ValidationError("--goal", "expected cov=C, runs=N or cpu=S");
    goal.safety_cap_multiplier = safety_cap;
    return goal;
}

// Machine output goes to the named file, or stdout when no path is given.
void write_text_output(const std::string& path, const std::string& contents) {
    if (path.empty())
        std::cout << contents;
    else
        regopt::write_file(path, contents);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"constrained-random regression optimization toolkit"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_flag("--quiet", g.quiet, "suppress informational diagnostics");
    app.add_flag("--json-logs", g.json_logs, "diagnostics as JSON lines on stderr");
    app.add_option("--threads", g.threads, "worker threads, 0 = hardware")->capture_default_str();

    std::function<void()> action;

    // ingest: validate + canonicalize, or merge when given several archives.
    {
        auto* cmd = app.add_subcommand("ingest", "validate, canonicalize or merge archives");
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--input", *inputs, "input archive (repeat to merge)")->required();
        cmd->add_option("--out", *out, "output archive")->required();
        cmd->callback([&, inputs, out] {
            action = [&, inputs, out] {
                std::vector<regopt::Regression> loaded;
                for (const std::string& path : *inputs)
                    loaded.push_back(regopt::load_regression(path));
                const regopt::Regression merged = regopt::merge_regressions(loaded);
                regopt::save_regression(merged, *out);
                log_info(g, "wrote " + std::to_string(merged.runs.size()) + " runs to " + *out);
            };
        });
    }

    // synth: generate an archive from a testbench spec.
    {
        auto* cmd = app.add_subcommand("synth", "simulate an archive from a testbench spec");
        auto spec = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto seeds = std::make_shared<std::uint32_t>(10);
        auto base_seed = std::make_shared<std::uint64_t>(1);
        cmd->add_option("--spec", *spec, "testbench spec file")->required();
        cmd->add_option("--seeds-per-test", *seeds, "runs per test")->capture_default_str();
        cmd->add_option("--base-seed", *base_seed, "seed of the first run")
            ->capture_default_str();
        cmd->add_option("--out", *out, "output archive")->required();
        cmd->callback([&, spec, out, seeds, base_seed] {
            action = [&, spec, out, seeds, base_seed] {
                const regopt::DutSpec dut = regopt::load_dut_spec(*spec);
                const regopt::Regression archive =
                    regopt::generate_archive(dut, *seeds, *base_seed);
                regopt::save_regression(archive, *out);
                log_info(g, "simulated " + std::to_string(archive.runs.size()) + " runs");
            };
        });
    }

    // rank
    {
        auto* cmd = app.add_subcommand("rank", "select a minimal-cost covering run subset");
        auto input = std::make_shared<std::string>();
        auto objective = std::make_shared<std::string>("cover_all");
        auto out = std::make_shared<std::string>();
        auto report = std::make_shared<std::string>();
        cmd->add_option("--input", *input, "input archive")->required();
        cmd->add_option("--objective", *objective, "cover_all | top_k=K | until_coverage=C")
            ->capture_default_str();
        cmd->add_option("--out", *out, "ranked archive");
        cmd->add_option("--report", *report, "per-step CSV report");
        cmd->callback([&, input, objective, out, report] {
            action = [&, input, objective, out, report] {
                const regopt::Regression archive = regopt::load_regression(*input);
                const regopt::RankObjective obj = parse_objective(*objective);
                const regopt::RankedSelection selection = regopt::rank(archive, obj);
                if (!out->empty()) {
                    regopt::save_regression(
                        regopt::selection_to_regression(archive, selection.indices()), *out);
                }
                if (!report->empty()) {
                    std::ostringstream csv;
                    regopt::write_rank_report_csv(archive, selection, csv);
                    regopt::write_file(*report, std::move(csv).str());
                }
                log_info(g, "selected " + std::to_string(selection.steps.size()) + " of " +
                                std::to_string(archive.runs.size()) + " runs at " +
                                regopt::format_double(selection.selected_coverage_percent) +
                                "% coverage");
            };
        });
    }

    // train
    {
        auto* cmd = app.add_subcommand("train", "fit per-bin predictors from an archive");
        auto input = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto config = std::make_shared<regopt::TrainConfig>();
        cmd->add_option("--input", *input, "input archive")->required();
        cmd->add_option("--out", *out, "model set file")->required();
        cmd->add_option("--hidden", config->hidden_width, "hidden width, 0 = logistic")
            ->capture_default_str();
        cmd->add_option("--epochs", config->epochs, "training epochs")->capture_default_str();
        cmd->add_option("--lr", config->learning_rate, "learning rate")->capture_default_str();
        cmd->add_option("--seed", config->seed, "training seed")->capture_default_str();
        cmd->add_option("--l2", config->l2, "L2 regularization strength")
            ->capture_default_str();
        cmd->add_option("--batch-size", config->batch_size, "mini-batch size")
            ->capture_default_str();
        cmd->callback([&, input, out, config] {
            action = [&, input, out, config] {
                const regopt::Regression archive = regopt::load_regression(*input);
                const regopt::ModelSet models = regopt::train(archive, *config);
                regopt::save_model_set(models, *out);
                std::size_t learned = 0;
                for (const auto& m : models.models)
                    if (m.kind == regopt::BinModelKind::learned) ++learned;
                log_info(g, "trained " + std::to_string(learned) + " of " +
                                std::to_string(models.models.size()) + " bin models");
            };
        });
    }

    // analyze
    {
        auto* cmd = app.add_subcommand("analyze", "rank control-point influence per bin");
        auto models_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--models", *models_path, "model set file")->required();
        cmd->add_option("--out", *out, "influence CSV (stdout when omitted)");
        cmd->callback([&, models_path, out] {
            action = [&, models_path, out] {
                const regopt::ModelSet models = regopt::load_model_set(*models_path);
                const regopt::InfluenceReport report = regopt::analyze(models);
                std::ostringstream csv;
                regopt::write_influence_csv(report, csv);
                write_text_output(*out, std::move(csv).str());
            };
        });
    }

    // generate
    {
        auto* cmd = app.add_subcommand("generate", "plan an optimized regression from models");
        auto input = std::make_shared<std::string>();
        auto models_path = std::make_shared<std::string>();
        auto goal_text = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto plan_seed = std::make_shared<std::uint64_t>(1);
        auto safety_cap = std::make_shared<double>(4.0);
        auto gen_config = std::make_shared<regopt::GenerateConfig>();
        cmd->add_option("--input", *input, "original archive")->required();
        cmd->add_option("--models", *models_path, "model set file")->required();
        cmd->add_option("--goal", *goal_text, "cov=C | runs=N | cpu=S")->required();
        cmd->add_option("--plan-seed", *plan_seed, "seed for exploration runs")
            ->capture_default_str();
        cmd->add_option("--safety-cap", *safety_cap, "planned-run cap, times original runs")
            ->capture_default_str();
        cmd->add_option("--explore-threshold", gen_config->explore_threshold,
                        "expected probability treated as covered")
            ->capture_default_str();
        cmd->add_option("--grid-points", gen_config->grid_points, "numeric sweep resolution")
            ->capture_default_str();
        cmd->add_option("--narrow-fraction", gen_config->narrow_fraction,
                        "narrowed width over declared width")
            ->capture_default_str();
        cmd->add_option("--out", *out, "plan file")->required();
        cmd->callback([&, input, models_path, goal_text, out, plan_seed, safety_cap,
                       gen_config] {
            action = [&, input, models_path, goal_text, out, plan_seed, safety_cap,
                      gen_config] {
                const regopt::Regression archive = regopt::load_regression(*input);
                const regopt::ModelSet models = regopt::load_model_set(*models_path);
                const regopt::Goal goal = parse_goal(*goal_text, *safety_cap);
                const regopt::OptimizedRegression planned =
                    regopt::plan(models, goal, archive, *plan_seed, *gen_config);
                regopt::save_plan(planned, *out);
                log_info(g, "planned " + std::to_string(planned.runs.size()) + " runs, expected "
                                + regopt::format_double(planned.expected_coverage_percent)
                                + "% coverage");
                if (!planned.shortfall_bins.empty())
                    log_info(g, "shortfall: " + std::to_string(planned.shortfall_bins.size()) +
                                    " bin(s) not expected to be covered, first '" +
                                    planned.shortfall_bins.front() + "'");
            };
        });
    }

    // replay
    {
        auto* cmd = app.add_subcommand("replay", "execute a plan against a testbench spec");
        auto spec = std::make_shared<std::string>();
        auto plan_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        cmd->add_option("--spec", *spec, "testbench spec file")->required();
        cmd->add_option("--plan", *plan_path, "plan file")->required();
        cmd->add_option("--out", *out, "replayed archive")->required();
        cmd->callback([&, spec, plan_path, out] {
            action = [&, spec, plan_path, out] {
                const regopt::DutSpec dut = regopt::load_dut_spec(*spec);
                const regopt::OptimizedRegression planned = regopt::load_plan(*plan_path);
                const regopt::Regression replayed = regopt::replay_plan(dut, planned);
                regopt::save_regression(replayed, *out);
                log_info(g, "replayed " + std::to_string(replayed.runs.size()) + " runs");
            };
        });
    }

    // metrics
    {
        auto* cmd = app.add_subcommand("metrics", "compare two archives");
        auto original = std::make_shared<std::string>();
        auto optimized = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto bins = std::make_shared<std::string>();
        cmd->add_option("--original", *original, "original archive")->required();
        cmd->add_option("--optimized", *optimized, "optimized archive")->required();
        cmd->add_option("--out", *out, "metrics CSV (stdout when omitted)");
        cmd->add_option("--bins", *bins, "per-bin satisfaction CSV");
        cmd->callback([&, original, optimized, out, bins] {
            action = [&, original, optimized, out, bins] {
                const regopt::Regression a = regopt::load_regression(*original);
                const regopt::Regression b = regopt::load_regression(*optimized);
                const regopt::ComparisonMetrics m = regopt::compare(a, b);
                std::ostringstream csv;
                regopt::write_metrics_csv(m, csv);
                write_text_output(*out, std::move(csv).str());
                if (!out->empty()) {
                    // The CSV went to a file; show the table form on stdout.
                    const auto opt = [](const std::optional<double>& v) {
                        return v ? regopt::format_double(*v) : std::string("undefined");
                    };
                    std::printf("%-26s %14s %14s\n", "", "original", "optimized");
                    std::printf("%-26s %14llu %14llu\n", "runs",
                                static_cast<unsigned long long>(m.original_runs),
                                static_cast<unsigned long long>(m.optimized_runs));
                    std::printf("%-26s %14s %14s\n", "cpu seconds",
                                regopt::format_double(m.original_cpu_seconds).c_str(),
                                regopt::format_double(m.optimized_cpu_seconds).c_str());
                    std::printf("%-26s %14s %14s\n", "coverage percent",
                                regopt::format_double(m.original_coverage_percent).c_str(),
                                regopt::format_double(m.optimized_coverage_percent).c_str());
                    std::printf("%-26s %14s\n", "coverage regain percent",
                                opt(m.coverage_regain_percent).c_str());
                    std::printf("%-26s %14s\n", "compression in runs",
                                opt(m.compression_runs).c_str());
                    std::printf("%-26s %14s\n", "compression in cpu",
                                opt(m.compression_cpu).c_str());
                }
                if (!bins->empty()) {
                    std::ostringstream table;
                    regopt::write_bin_comparison_csv(regopt::bin_comparison(a, b), table);
                    regopt::write_file(*bins, std::move(table).str());
                }
            };
        });
    }

    // loop
    {
        auto* cmd = app.add_subcommand("loop", "optimize, replay and tighten until regained");
        auto input = std::make_shared<std::string>();
        auto spec = std::make_shared<std::string>();
        auto goal_text = std::make_shared<std::string>();
        auto state = std::make_shared<std::string>();
        auto safety_cap = std::make_shared<double>(4.0);
        auto loop_config = std::make_shared<regopt::LoopConfig>();
        cmd->add_option("--input", *input, "original archive")->required();
        cmd->add_option("--spec", *spec, "testbench spec file")->required();
        cmd->add_option("--goal", *goal_text, "initial goal: cov=C | runs=N | cpu=S")
            ->required();
        cmd->add_option("--threshold", loop_config->regain_threshold_percent,
                        "regain acceptance threshold, percent")
            ->capture_default_str();
        cmd->add_option("--max-iter", loop_config->max_iterations, "maximum iterations")
            ->capture_default_str();
        cmd->add_option("--state", *state, "state directory for models, plans, outcome");
        cmd->add_option("--plan-seed", loop_config->plan_seed, "base plan seed")
            ->capture_default_str();
        cmd->add_option("--seed", loop_config->train.seed, "training seed")
            ->capture_default_str();
        cmd->add_option("--epochs", loop_config->train.epochs, "training epochs")
            ->capture_default_str();
        cmd->add_option("--lr", loop_config->train.learning_rate, "learning rate")
            ->capture_default_str();
        cmd->add_option("--hidden", loop_config->train.hidden_width,
                        "hidden width, 0 = logistic")
            ->capture_default_str();
        cmd->add_option("--explore-threshold", loop_config->generate.explore_threshold,
                        "expected probability treated as covered")
            ->capture_default_str();
        cmd->add_option("--safety-cap", *safety_cap, "planned-run cap, times original runs")
            ->capture_default_str();
        cmd->callback([&, input, spec, goal_text, state, safety_cap, loop_config] {
            action = [&, input, spec, goal_text, state, safety_cap, loop_config] {
                const regopt::Regression archive = regopt::load_regression(*input);
                const regopt::DutSpec dut = regopt::load_dut_spec(*spec);
                const regopt::Goal goal = parse_goal(*goal_text, *safety_cap);
                if (!state->empty()) loop_config->state_dir = *state;
                const regopt::LoopOutcome outcome =
                    regopt::run_loop(archive, dut, goal, *loop_config);
                for (const regopt::IterationRecord& it : outcome.iterations)
                    log_info(g, "iteration " + std::to_string(it.iteration) + ": " +
                                    std::to_string(it.plan_runs) + " planned runs, regain " +
                                    regopt::format_double(it.regain_percent) + "%");
                log_info(g, std::string("status: ") +
                                (outcome.status == regopt::LoopOutcome::Status::accepted
                                     ? "accepted"
                                     : "exhausted") +
                                (outcome.loaded_from_cache ? " (cached)" : ""));
                std::cout << outcome.recommendation << '\n';
            };
        });
    }

    // report
    {
        auto* cmd = app.add_subcommand("report", "emit comparison CSVs and bar charts");
        auto data_path = std::make_shared<std::string>();
        auto out_dir = std::make_shared<std::string>();
        cmd->add_option("--data", *data_path, "plot data JSON")->required();
        cmd->add_option("--out-dir", *out_dir, "output directory")->required();
        cmd->callback([&, data_path, out_dir] {
            action = [&, data_path, out_dir] {
                const regopt::ComparisonPlotData data = regopt::load_plot_data(*data_path);
                const auto written = regopt::emit_comparison(data, *out_dir);
                log_info(g, "wrote " + std::to_string(written.size()) + " report files");
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // help text on stdout, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << app.help() << '\n';
        return 2;
    }

    regopt::set_worker_threads(g.threads);
    try {
        action();
    } catch (const regopt::Error& e) {
        log_error(g, e.what());
        return 1;
    } catch (const std::exception& e) {
        log_error(g, e.what());
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
