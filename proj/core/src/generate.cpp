#include "regopt/generate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "regopt/errors.hpp"
#include "regopt/format.hpp"
#include "regopt/io.hpp"
#include "regopt/prng.hpp"
#include "regopt/ranking.hpp"

namespace regopt {

void validate_constraints(const ConstraintSet& constraints,
                          std::span<const ControlPointDecl> declarations) {
    for (const auto& [name, narrowing] : constraints.narrowings) {
        const ControlPointDecl* decl = find_declaration(declarations, name);
        if (!decl) throw ValidationError("constraint on undeclared control point '" + name + "'");
        if (const auto* num = std::get_if<NumericConstraint>(&narrowing)) {
            if (!decl->is_numeric())
                throw ValidationError("numeric constraint on categorical control point '" +
                                      name + "'");
            const NumericRange& r = decl->numeric();
            if (!(num->lo <= num->hi) || num->lo < r.lo || num->hi > r.hi)
                throw ValidationError("constraint on '" + name +
                                      "' is empty or outside the declared range");
        } else {
            const auto& sub = std::get<CategoricalConstraint>(narrowing);
            if (decl->is_numeric())
                throw ValidationError("categorical constraint on numeric control point '" +
                                      name + "'");
            if (sub.values.empty())
                throw ValidationError("constraint on '" + name + "' selects no values");
            const auto& domain = decl->categorical().values;
            for (const std::string& v : sub.values)
                if (std::find(domain.begin(), domain.end(), v) == domain.end())
                    throw ValidationError("constraint on '" + name + "' includes undeclared value '" +
                                          v + "'");
        }
    }
}

namespace {

struct FeatureView {
    const FeatureEncoding* encoding;
    std::vector<double> f;

    void set_test(std::size_t index) {
        std::fill(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(encoding->tests.size()),
                  0.0);
        f[index] = 1.0;
    }
};

double prob_at(const ModelSet& models, const BinModel& model,
               std::span<const double> features) {
    return model_probability(model.hidden_width, models.encoding.feature_count(), model.params,
                             features);
}

bool all_equal(std::span<const double> v) {
    for (double x : v)
        if (x != v.front()) return false;
    return true;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

ConstraintProposal propose_constraints(const ModelSet& models, const BinModel& model,
                                       const GenerateConfig& config) {
    if (model.kind != BinModelKind::learned)
        throw ValidationError("constraints can only be proposed from a learned model (bin '" +
                              model.bin_id + "')");
    if (models.encoding.tests.empty())
        throw ValidationError("model encoding declares no tests");
    const std::uint32_t grid = std::max<std::uint32_t>(2, config.grid_points);

    const FeatureEncoding& enc = models.encoding;
    const auto blocks = enc.blocks();

    FeatureView view{&enc, std::vector<double>(enc.feature_count(), 0.0)};
    // Neutral start: numeric midpoints, categorical uniform mixtures.
    for (std::size_t d = 0; d < enc.declarations.size(); ++d) {
        const auto& block = blocks[d + 1];
        if (enc.declarations[d].is_numeric()) {
            view.f[block.offset] = 0.5;
        } else {
            const double u = 1.0 / static_cast<double>(block.width);
            for (std::size_t k = 0; k < block.width; ++k) view.f[block.offset + k] = u;
        }
    }

    ConstraintProposal proposal;
    std::size_t test_pick = 0;
    for (int sweep = 0; sweep < 2; ++sweep) {
        // Test coordinate.
        std::vector<double> probs(enc.tests.size());
        for (std::size_t t = 0; t < enc.tests.size(); ++t) {
            view.set_test(t);
            probs[t] = prob_at(models, model, view.f);
        }
        test_pick = static_cast<std::size_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        view.set_test(test_pick);

        for (std::size_t d = 0; d < enc.declarations.size(); ++d) {
            const ControlPointDecl& decl = enc.declarations[d];
            const auto& block = blocks[d + 1];
            if (decl.is_numeric()) {
                const NumericRange& range = decl.numeric();
                const double width = range.hi - range.lo;
                std::vector<double> grid_probs(grid);
                for (std::uint32_t i = 0; i < grid; ++i) {
                    view.f[block.offset] =
                        static_cast<double>(i) / static_cast<double>(grid - 1);
                    grid_probs[i] = prob_at(models, model, view.f);
                }
                if (!all_equal(grid_probs) && *std::max_element(grid_probs.begin(),
                                                                grid_probs.end()) >
                                                  mean_of(grid_probs)) {
                    const std::size_t best = static_cast<std::size_t>(
                        std::max_element(grid_probs.begin(), grid_probs.end()) -
                        grid_probs.begin());
                    const double center =
                        range.lo + width * static_cast<double>(best) /
                                       static_cast<double>(grid - 1);
                    const double half = width * config.narrow_fraction / 2.0;
                    NumericConstraint narrowed{std::max(range.lo, center - half),
                                               std::min(range.hi, center + half)};
                    proposal.constraints.narrowings[decl.name] = narrowed;
                    view.f[block.offset] =
                        width > 0.0 ? ((narrowed.lo + narrowed.hi) / 2.0 - range.lo) / width
                                    : 0.5;
                } else {
                    proposal.constraints.narrowings.erase(decl.name);
                    view.f[block.offset] = 0.5;
                }
            } else {
                const auto& values = decl.categorical().values;
                std::vector<double> value_probs(values.size());
                for (std::size_t k = 0; k < values.size(); ++k) {
                    std::fill(view.f.begin() + static_cast<std::ptrdiff_t>(block.offset),
                              view.f.begin() +
                                  static_cast<std::ptrdiff_t>(block.offset + block.width),
                              0.0);
                    view.f[block.offset + k] = 1.0;
                    value_probs[k] = prob_at(models, model, view.f);
                }
                if (!all_equal(value_probs) &&
                    *std::max_element(value_probs.begin(), value_probs.end()) >
                        mean_of(value_probs)) {
                    const std::size_t best = static_cast<std::size_t>(
                        std::max_element(value_probs.begin(), value_probs.end()) -
                        value_probs.begin());
                    proposal.constraints.narrowings[decl.name] =
                        CategoricalConstraint{{values[best]}};
                    std::fill(view.f.begin() + static_cast<std::ptrdiff_t>(block.offset),
                              view.f.begin() +
                                  static_cast<std::ptrdiff_t>(block.offset + block.width),
                              0.0);
                    view.f[block.offset + best] = 1.0;
                } else {
                    proposal.constraints.narrowings.erase(decl.name);
                    const double u = 1.0 / static_cast<double>(block.width);
                    for (std::size_t k = 0; k < block.width; ++k)
                        view.f[block.offset + k] = u;
                }
            }
        }
    }

    proposal.test = enc.tests[test_pick];
    proposal.probability = prob_at(models, model, view.f);
    proposal.features = std::move(view.f);
    return proposal;
}

namespace {

void validate_goal(const Goal& goal) {
    if (!(goal.value > 0.0)) throw ValidationError("goal bound must be positive");
    if (goal.kind == Goal::Kind::target_coverage && goal.value > 100.0)
        throw ValidationError("target coverage must be in (0, 100]");
    if (!(goal.safety_cap_multiplier > 0.0))
        throw ValidationError("safety cap multiplier must be positive");
}

ConstraintSet pin_controls(const std::map<std::string, ControlValue>& controls,
                           std::span<const ControlPointDecl> declarations) {
    ConstraintSet pins;
    for (const ControlPointDecl& decl : declarations) {
        auto it = controls.find(decl.name);
        if (it == controls.end()) continue;
        if (decl.is_numeric()) {
            const double v = std::get<double>(it->second);
            pins.narrowings[decl.name] = NumericConstraint{v, v};
        } else {
            pins.narrowings[decl.name] = CategoricalConstraint{{std::get<std::string>(it->second)}};
        }
    }
    return pins;
}

} // namespace

OptimizedRegression plan(const ModelSet& models, const Goal& goal,
                         const Regression& original, std::uint64_t plan_seed,
                         const GenerateConfig& config) {
    validate_goal(goal);
    if (models.space != original.space)
        throw ValidationError("model set and regression disagree on the coverage space");

    const auto& bins = original.space.bins();
    // Align one model per bin, in space order.
    std::vector<const BinModel*> by_bin(bins.size(), nullptr);
    for (const BinModel& m : models.models) {
        const auto idx = original.space.index_of(m.bin_id);
        if (!idx) throw ValidationError("model for unknown bin '" + m.bin_id + "'");
        if (by_bin[*idx]) throw ValidationError("duplicate model for bin '" + m.bin_id + "'");
        by_bin[*idx] = &m;
    }
    for (std::size_t b = 0; b < bins.size(); ++b)
        if (!by_bin[b]) throw ValidationError("missing model for bin '" + bins[b].id + "'");

    OptimizedRegression out;
    out.declarations = original.declarations;
    out.goal = goal;
    out.plan_seed = plan_seed;
    out.archive_digest = digest_string(regression_to_string(original));
    out.model_digest = digest_string(model_set_to_string(models));

    const std::uint64_t cap = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(goal.safety_cap_multiplier *
                                                static_cast<double>(original.runs.size()))));
    const std::uint64_t run_budget =
        goal.kind == Goal::Kind::max_runs
            ? std::min<std::uint64_t>(cap, static_cast<std::uint64_t>(goal.value))
            : cap;

    const double total_weight = static_cast<double>(original.space.total_weight());
    std::vector<double> q(bins.size(), 0.0);
    const auto expected_percent = [&] {
        double s = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b)
            s += static_cast<double>(bins[b].weight) * q[b];
        return 100.0 * s / total_weight;
    };

    // One planned run's predicted per-bin hit probabilities, and the
    // weighted expected-coverage gain of folding them into q.
    const auto probe = [&](std::span<const double> features) {
        std::vector<double> probs(bins.size(), 0.0);
        for (std::size_t b = 0; b < bins.size(); ++b) {
            switch (by_bin[b]->kind) {
            case BinModelKind::unconditional: probs[b] = 1.0; break;
            case BinModelKind::unreachable: probs[b] = 0.0; break;
            case BinModelKind::learned:
                probs[b] = model_probability(by_bin[b]->hidden_width,
                                             models.encoding.feature_count(),
                                             by_bin[b]->params, features);
                break;
            }
        }
        return probs;
    };
    const auto gain_of = [&](std::span<const double> probs) {
        double delta = 0.0;
        for (std::size_t b = 0; b < bins.size(); ++b)
            delta += static_cast<double>(bins[b].weight) * (1.0 - q[b]) * probs[b];
        return delta;
    };
    const auto commit = [&](std::span<const double> probs) {
        const double delta = gain_of(probs);
        for (std::size_t b = 0; b < bins.size(); ++b)
            q[b] = 1.0 - (1.0 - q[b]) * (1.0 - probs[b]);
        return delta;
    };
    const auto account = [&](std::span<const double> features) {
        return commit(probe(features));
    };

    // Per-test mean recorded cost, used to budget exploration under CPU goals.
    std::map<std::string, std::pair<double, std::uint64_t>> cpu_by_test;
    for (const RunRecord& r : original.runs) {
        auto& [sum, n] = cpu_by_test[r.test];
        sum += r.cpu_seconds;
        ++n;
    }
    const auto mean_cpu = [&](const std::string& test) {
        auto it = cpu_by_test.find(test);
        if (it == cpu_by_test.end() || it->second.second == 0) return 0.0;
        return it->second.first / static_cast<double>(it->second.second);
    };

    double planned_cpu = 0.0;
    const auto cpu_exceeded = [&](double next_cost) {
        return goal.kind == Goal::Kind::max_cpu_seconds && !out.runs.empty() &&
               planned_cpu + next_cost > goal.value;
    };

    // Phase 1: replay core. The full greedy cover is pinned run by run, so
    // replaying it reproduces the ranked coverage exactly.
    const RankedSelection selection = rank(original, RankObjective::cover_all());
    std::vector<std::uint64_t> acc(bins.size(), 0);
    for (const RankStep& step : selection.steps) {
        if (out.runs.size() >= run_budget) break;
        const RunRecord& run = original.runs[step.run_index];
        if (cpu_exceeded(run.cpu_seconds)) break;

        PlannedRun planned;
        planned.test = run.test;
        planned.seed = run.seed;
        planned.constraints = pin_controls(run.controls, original.declarations);
        planned.phase = PlanPhase::core;
        planned.expected_gain = step.marginal_gain;
        for (const auto& [id, count] : run.bins_hit) {
            const std::size_t b = *original.space.index_of(id);
            if (acc[b] < bins[b].at_least && count > 0) planned.targeted_bins.push_back(id);
            acc[b] += count;
        }
        account(models.encoding.encode(run.test, run.controls));
        planned_cpu += run.cpu_seconds;
        out.runs.push_back(std::move(planned));
    }

    // Phase 2, breadth stage: one pass after another over the bins the
    // models do not yet expect to cover, until each clears the explore
    // threshold or a bound stops planning.
    std::uint64_t explore_counter = 0;
    bool budget_hit = false;
    const auto append_exploration = [&](std::size_t b) {
        ConstraintProposal prop = propose_constraints(models, *by_bin[b], config);
        const double est_cost = mean_cpu(prop.test);
        if (cpu_exceeded(est_cost)) return false;
        PlannedRun planned;
        planned.test = prop.test;
        planned.seed = plan_seed + explore_counter++;
        planned.constraints = std::move(prop.constraints);
        planned.targeted_bins = {bins[b].id};
        planned.phase = PlanPhase::explore;
        planned.expected_gain = account(prop.features);
        planned_cpu += est_cost;
        out.runs.push_back(std::move(planned));
        return true;
    };

    for (;;) {
        if (goal.kind == Goal::Kind::target_coverage && expected_percent() >= goal.value) break;
        std::vector<std::size_t> targets;
        for (std::size_t b = 0; b < bins.size(); ++b)
            if (by_bin[b]->kind == BinModelKind::learned && q[b] < config.explore_threshold)
                targets.push_back(b);
        if (targets.empty() || budget_hit) break;
        std::sort(targets.begin(), targets.end(), [&](std::size_t a, std::size_t b) {
            if (bins[a].weight != bins[b].weight) return bins[a].weight > bins[b].weight;
            return bins[a].id < bins[b].id;
        });

        bool progressed = false;
        for (std::size_t b : targets) {
            if (out.runs.size() >= run_budget) { budget_hit = true; break; }
            if (goal.kind == Goal::Kind::target_coverage && expected_percent() >= goal.value) {
                budget_hit = true;
                break;
            }
            if (q[b] >= config.explore_threshold) continue; // lifted earlier this pass
            if (!append_exploration(b)) { budget_hit = true; break; }
            progressed = true;
        }
        if (!progressed) break;
    }

    // Phase 2, fill stage: while the goal still asks for more, keep adding
    // exploration runs. A dedicated run budget is spread round-robin over
    // every learned bin the models do not consider certain yet; coverage and
    // CPU goals instead chase the least expected-covered bin and stop once a
    // run's expected gain becomes negligible.
    if (!out.runs.empty() && !budget_hit) {
        const double epsilon = 1e-6 * total_weight;
        const auto try_append = [&](std::size_t b) -> int {
            ConstraintProposal prop = propose_constraints(models, *by_bin[b], config);
            const double est_cost = mean_cpu(prop.test);
            if (cpu_exceeded(est_cost)) return -1;
            const std::vector<double> probs = probe(prop.features);
            const double delta = gain_of(probs);
            if (delta <= 0.0) return -1;
            if (goal.kind != Goal::Kind::max_runs && delta < epsilon) return -1;

            PlannedRun planned;
            planned.test = prop.test;
            planned.seed = plan_seed + explore_counter++;
            planned.constraints = std::move(prop.constraints);
            planned.targeted_bins = {bins[b].id};
            planned.phase = PlanPhase::explore;
            planned.expected_gain = commit(probs);
            planned_cpu += est_cost;
            out.runs.push_back(std::move(planned));
            return 1;
        };

        if (goal.kind == Goal::Kind::max_runs) {
            std::vector<std::size_t> order;
            for (std::size_t b = 0; b < bins.size(); ++b)
                if (by_bin[b]->kind == BinModelKind::learned) order.push_back(b);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (bins[a].weight != bins[b].weight) return bins[a].weight > bins[b].weight;
                return bins[a].id < bins[b].id;
            });
            bool progressed = true;
            while (progressed && out.runs.size() < run_budget) {
                progressed = false;
                for (std::size_t b : order) {
                    if (out.runs.size() >= run_budget) break;
                    if (q[b] >= 1.0) continue;
                    const int appended = try_append(b);
                    if (appended < 0) { progressed = false; break; }
                    progressed = true;
                }
            }
        } else {
            for (;;) {
                if (out.runs.size() >= run_budget) break;
                if (goal.kind == Goal::Kind::target_coverage &&
                    expected_percent() >= goal.value)
                    break;
                std::size_t pick = bins.size();
                for (std::size_t b = 0; b < bins.size(); ++b) {
                    if (by_bin[b]->kind != BinModelKind::learned) continue;
                    if (q[b] >= 1.0 - 1e-9) continue;
                    if (pick == bins.size() || q[b] < q[pick] ||
                        (q[b] == q[pick] && bins[b].id < bins[pick].id))
                        pick = b;
                }
                if (pick == bins.size()) break;
                if (try_append(pick) < 0) break;
            }
        }
    }

    for (std::size_t b = 0; b < bins.size(); ++b)
        if (q[b] < config.explore_threshold) out.shortfall_bins.push_back(bins[b].id);
    std::sort(out.shortfall_bins.begin(), out.shortfall_bins.end(),
              [&](const std::string& a, const std::string& c) {
                  const CoverageBin* ba = original.space.find(a);
                  const CoverageBin* bc = original.space.find(c);
                  if (ba->weight != bc->weight) return ba->weight > bc->weight;
                  return a < c;
              });
    out.expected_coverage_percent = expected_percent();
    return out;
}

ComparisonMetrics compare(const Regression& original, const Regression& optimized) {
    if (!(original.space == optimized.space))
        throw ValidationError("regressions cover different coverage spaces");

    ComparisonMetrics m;
    m.original_runs = original.runs.size();
    m.optimized_runs = optimized.runs.size();
    m.original_cpu_seconds = total_cpu(original.runs);
    m.optimized_cpu_seconds = total_cpu(optimized.runs);
    m.original_coverage_percent = coverage_percent(original);
    m.optimized_coverage_percent = coverage_percent(optimized);

    if (m.original_coverage_percent > 0.0)
        m.coverage_regain_percent =
            100.0 * (m.optimized_coverage_percent / m.original_coverage_percent);
    if (m.optimized_runs > 0)
        m.compression_runs = static_cast<double>(m.original_runs) /
                             static_cast<double>(m.optimized_runs);
    if (m.optimized_cpu_seconds > 0.0)
        m.compression_cpu = m.original_cpu_seconds / m.optimized_cpu_seconds;
    return m;
}

void write_metrics_csv(const ComparisonMetrics& m, std::ostream& out) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("undefined");
    };
    out << "name,value\n";
    out << "original_runs," << m.original_runs << '\n';
    out << "optimized_runs," << m.optimized_runs << '\n';
    out << "original_cpu_seconds," << format_double(m.original_cpu_seconds) << '\n';
    out << "optimized_cpu_seconds," << format_double(m.optimized_cpu_seconds) << '\n';
    out << "original_coverage_percent," << format_double(m.original_coverage_percent) << '\n';
    out << "optimized_coverage_percent," << format_double(m.optimized_coverage_percent) << '\n';
    out << "coverage_regain_percent," << opt(m.coverage_regain_percent) << '\n';
    out << "compression_runs," << opt(m.compression_runs) << '\n';
    out << "compression_cpu," << opt(m.compression_cpu) << '\n';
}

} // namespace regopt
