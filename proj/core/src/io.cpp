#include "regopt/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "regopt/errors.hpp"
#include "regopt/prng.hpp"

namespace regopt {

using nlohmann::json;

std::string digest_string(std::string_view bytes) {
    const std::uint64_t h = fnv1a64(bytes);
    char buf[17] = {};
    for (int i = 0; i < 16; ++i)
        buf[i] = "0123456789abcdef"[(h >> (60 - 4 * i)) & 0xF];
    return std::string("fnv1a64:") + buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::string file_digest(const std::filesystem::path& path) {
    return digest_string(read_file(path));
}

namespace {

json parse_document(std::string_view text, const std::string& context) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(context + ": " + e.what());
    }
}

const json& need(const json& j, const char* key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(context + ": missing field '" + key + "'");
    return *it;
}

std::string need_string(const json& j, const char* key, const std::string& context) {
    const json& v = need(j, key, context);
    if (!v.is_string()) throw ParseError(context + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

std::uint64_t need_unsigned(const json& j, const char* key, const std::string& context) {
    const json& v = need(j, key, context);
    if (!v.is_number_unsigned())
        throw ParseError(context + ": field '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

double need_number(const json& j, const char* key, const std::string& context) {
    const json& v = need(j, key, context);
    if (!v.is_number()) throw ParseError(context + ": field '" + key + "' must be a number");
    return v.get<double>();
}

bool need_bool(const json& j, const char* key, const std::string& context) {
    const json& v = need(j, key, context);
    if (!v.is_boolean()) throw ParseError(context + ": field '" + key + "' must be a boolean");
    return v.get<bool>();
}

const json& need_array(const json& j, const char* key, const std::string& context) {
    const json& v = need(j, key, context);
    if (!v.is_array()) throw ParseError(context + ": field '" + key + "' must be an array");
    return v;
}

const json& need_object(const json& j, const char* key, const std::string& context) {
    const json& v = need(j, key, context);
    if (!v.is_object()) throw ParseError(context + ": field '" + key + "' must be an object");
    return v;
}

void check_version(const json& j, const std::string& context) {
    const std::uint64_t version = need_unsigned(j, "format_version", context);
    if (version != static_cast<std::uint64_t>(kFormatVersion))
        throw ParseError(context + ": unsupported format_version " + std::to_string(version) +
                         " (this build reads version " + std::to_string(kFormatVersion) + ")");
}

// ---- coverage primitives ----

json bin_to_json(const CoverageBin& bin) {
    return json{{"at_least", bin.at_least},
                {"group", bin.group},
                {"id", bin.id},
                {"weight", bin.weight}};
}

CoverageBin bin_from_json(const json& j, const std::string& context) {
    CoverageBin bin;
    bin.id = need_string(j, "id", context);
    bin.group = need_string(j, "group", context);
    bin.weight = static_cast<std::uint32_t>(need_unsigned(j, "weight", context));
    bin.at_least = static_cast<std::uint32_t>(need_unsigned(j, "at_least", context));
    return bin;
}

json space_to_json(const CoverageSpace& space) {
    json bins = json::array();
    for (const CoverageBin& bin : space.bins()) bins.push_back(bin_to_json(bin));
    return json{{"bins", std::move(bins)}};
}

CoverageSpace space_from_json(const json& j, const std::string& context) {
    std::vector<CoverageBin> bins;
    for (const json& b : need_array(j, "bins", context))
        bins.push_back(bin_from_json(b, context));
    try {
        return CoverageSpace(std::move(bins));
    } catch (const ValidationError& e) {
        throw ParseError(context + ": " + e.what());
    }
}

json declaration_to_json(const ControlPointDecl& decl) {
    if (decl.is_numeric()) {
        const NumericRange& r = decl.numeric();
        return json{{"hi", r.hi}, {"kind", "numeric_range"}, {"lo", r.lo}, {"name", decl.name}};
    }
    return json{{"kind", "categorical"},
                {"name", decl.name},
                {"values", decl.categorical().values}};
}

ControlPointDecl declaration_from_json(const json& j, const std::string& context) {
    ControlPointDecl decl;
    decl.name = need_string(j, "name", context);
    const std::string kind = need_string(j, "kind", context);
    if (kind == "numeric_range") {
        NumericRange r{need_number(j, "lo", context), need_number(j, "hi", context)};
        if (!(r.lo <= r.hi))
            throw ParseError(context + ": control point '" + decl.name + "' has lo > hi");
        decl.domain = r;
    } else if (kind == "categorical") {
        CategoricalDomain d;
        for (const json& v : need_array(j, "values", context)) {
            if (!v.is_string())
                throw ParseError(context + ": categorical values must be strings");
            d.values.push_back(v.get<std::string>());
        }
        if (d.values.empty())
            throw ParseError(context + ": control point '" + decl.name + "' has no values");
        decl.domain = d;
    } else {
        throw ParseError(context + ": unknown control point kind '" + kind + "'");
    }
    return decl;
}

json declarations_to_json(std::span<const ControlPointDecl> declarations) {
    json out = json::array();
    for (const ControlPointDecl& d : declarations) out.push_back(declaration_to_json(d));
    return out;
}

std::vector<ControlPointDecl> declarations_from_json(const json& j,
                                                     const std::string& context) {
    std::vector<ControlPointDecl> out;
    if (!j.is_array()) throw ParseError(context + ": declarations must be an array");
    for (const json& d : j) out.push_back(declaration_from_json(d, context));
    return out;
}

json control_value_to_json(const ControlValue& value) {
    if (const double* d = std::get_if<double>(&value)) return json(*d);
    return json(std::get<std::string>(value));
}

ControlValue control_value_from_json(const json& j, const std::string& name,
                                     const std::string& context) {
    if (j.is_number()) return ControlValue(j.get<double>());
    if (j.is_string()) return ControlValue(j.get<std::string>());
    throw ParseError(context + ": control value for '" + name +
                     "' must be a number or a string");
}

json controls_to_json(const std::map<std::string, ControlValue>& controls) {
    json out = json::object();
    for (const auto& [name, value] : controls) out[name] = control_value_to_json(value);
    return out;
}

std::map<std::string, ControlValue> controls_from_json(const json& j,
                                                       const std::string& context) {
    std::map<std::string, ControlValue> out;
    if (!j.is_object()) throw ParseError(context + ": controls must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        out.emplace(it.key(), control_value_from_json(it.value(), it.key(), context));
    return out;
}

json run_to_json(const RunRecord& run) {
    json hits = json::object();
    for (const auto& [id, count] : run.bins_hit) hits[id] = count;
    return json{{"bins_hit", std::move(hits)},
                {"controls", controls_to_json(run.controls)},
                {"cpu_seconds", run.cpu_seconds},
                {"seed", run.seed},
                {"status", run.status == RunStatus::pass ? "pass" : "fail"},
                {"test", run.test}};
}

RunRecord run_from_json(const json& j, const std::string& context) {
    RunRecord run;
    run.test = need_string(j, "test", context);
    run.seed = need_unsigned(j, "seed", context);
    run.cpu_seconds = need_number(j, "cpu_seconds", context);
    const std::string status = need_string(j, "status", context);
    if (status == "pass") run.status = RunStatus::pass;
    else if (status == "fail") run.status = RunStatus::fail;
    else throw ParseError(context + ": unknown status '" + status + "'");
    run.controls = controls_from_json(need_object(j, "controls", context), context);
    const json& hits = need_object(j, "bins_hit", context);
    for (auto it = hits.begin(); it != hits.end(); ++it) {
        if (!it.value().is_number_unsigned())
            throw ParseError(context + ": hit count for bin '" + it.key() +
                             "' must be a non-negative integer");
        run.bins_hit.emplace(it.key(), it.value().get<std::uint64_t>());
    }
    return run;
}

} // namespace

// ---- regression archive (JSON lines) ----

std::string regression_to_string(const Regression& regression) {
    json header{{"declarations", declarations_to_json(regression.declarations)},
                {"format_version", kFormatVersion},
                {"space", space_to_json(regression.space)}};
    std::string out = header.dump();
    out += '\n';
    for (const RunRecord& run : regression.runs) {
        out += run_to_json(run).dump();
        out += '\n';
    }
    return out;
}

void save_regression(const Regression& regression, const std::filesystem::path& path) {
    write_file(path, regression_to_string(regression));
}

Regression regression_from_string(std::string_view text, std::string_view origin) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    const std::string name(origin);
    if (lines.empty() || lines[0].empty())
        throw ParseError(name + ": missing header line");

    const std::string header_ctx = name + " line 1";
    const json header = parse_document(lines[0], header_ctx);
    check_version(header, header_ctx);

    Regression regression;
    regression.space = space_from_json(need_object(header, "space", header_ctx), header_ctx);
    regression.declarations =
        declarations_from_json(need(header, "declarations", header_ctx), header_ctx);

    std::size_t invalid = 0;
    std::string first_error;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string ctx = name + " line " + std::to_string(i + 1);
        const json record = parse_document(lines[i], ctx);
        RunRecord run = run_from_json(record, ctx);
        try {
            validate_run(run, regression.space, regression.declarations);
        } catch (const ValidationError& e) {
            ++invalid;
            if (first_error.empty()) first_error = ctx + ": " + e.what();
        }
        regression.runs.push_back(std::move(run));
    }
    if (invalid > 0)
        throw ValidationError(std::to_string(invalid) + " invalid run record(s); first: " +
                              first_error);
    return regression;
}

Regression load_regression(const std::filesystem::path& path) {
    return regression_from_string(read_file(path), path.string());
}

Regression merge_regressions(std::span<const Regression> regressions) {
    if (regressions.empty()) throw ValidationError("nothing to merge");
    const Regression& first = regressions.front();
    for (std::size_t i = 1; i < regressions.size(); ++i) {
        if (!(regressions[i].space == first.space)) {
            std::set<std::string> a, b;
            for (const CoverageBin& bin : first.space.bins()) a.insert(bin.id);
            for (const CoverageBin& bin : regressions[i].space.bins()) b.insert(bin.id);
            std::vector<std::string> diff;
            std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                          std::back_inserter(diff));
            std::string msg = "coverage spaces differ between inputs 1 and " +
                              std::to_string(i + 1);
            if (!diff.empty()) {
                msg += "; differing bins:";
                for (const std::string& id : diff) msg += " " + id;
            } else {
                msg += " (same ids, different attributes)";
            }
            throw ValidationError(msg);
        }
        if (regressions[i].declarations != first.declarations) {
            std::set<std::string> a, b;
            for (const ControlPointDecl& d : first.declarations) a.insert(d.name);
            for (const ControlPointDecl& d : regressions[i].declarations) b.insert(d.name);
            std::vector<std::string> diff;
            std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                          std::back_inserter(diff));
            std::string msg = "control point declarations differ between inputs 1 and " +
                              std::to_string(i + 1);
            if (!diff.empty()) {
                msg += "; differing control points:";
                for (const std::string& n : diff) msg += " " + n;
            } else {
                msg += " (same names, different domains)";
            }
            throw ValidationError(msg);
        }
    }

    Regression out;
    out.space = first.space;
    out.declarations = first.declarations;
    for (const Regression& r : regressions)
        out.runs.insert(out.runs.end(), r.runs.begin(), r.runs.end());
    return out;
}

// ---- model set ----

namespace {

json train_config_to_json(const TrainConfig& config) {
    return json{{"batch_size", config.batch_size},
                {"epochs", config.epochs},
                {"heldout_fraction", config.heldout_fraction},
                {"hidden_width", config.hidden_width},
                {"l2", config.l2},
                {"learning_rate", config.learning_rate},
                {"seed", config.seed},
                {"unconditional_threshold", config.unconditional_threshold}};
}

TrainConfig train_config_from_json(const json& j, const std::string& context) {
    TrainConfig config;
    config.batch_size = static_cast<std::uint32_t>(need_unsigned(j, "batch_size", context));
    config.epochs = static_cast<std::uint32_t>(need_unsigned(j, "epochs", context));
    config.heldout_fraction = need_number(j, "heldout_fraction", context);
    config.hidden_width = static_cast<std::uint32_t>(need_unsigned(j, "hidden_width", context));
    config.l2 = need_number(j, "l2", context);
    config.learning_rate = need_number(j, "learning_rate", context);
    config.seed = need_unsigned(j, "seed", context);
    config.unconditional_threshold = need_number(j, "unconditional_threshold", context);
    return config;
}

const char* kind_name(BinModelKind kind) {
    switch (kind) {
    case BinModelKind::unconditional: return "unconditional";
    case BinModelKind::unreachable: return "unreachable";
    case BinModelKind::learned: return "learned";
    }
    return "learned";
}

json model_to_json(const BinModel& m) {
    json out{{"bin", m.bin_id},
             {"kind", kind_name(m.kind)},
             {"positive_rows", m.positive_rows},
             {"total_rows", m.total_rows}};
    if (m.kind == BinModelKind::learned) {
        out["epochs_kept"] = m.epochs_kept;
        out["heldout_accuracy"] = m.heldout_accuracy;
        out["heldout_auc"] = m.heldout_auc ? json(*m.heldout_auc) : json(nullptr);
        out["hidden_width"] = m.hidden_width;
        out["params"] = m.params;
    }
    return out;
}

BinModel model_from_json(const json& j, const std::string& context) {
    BinModel m;
    m.bin_id = need_string(j, "bin", context);
    const std::string kind = need_string(j, "kind", context);
    m.positive_rows = need_unsigned(j, "positive_rows", context);
    m.total_rows = need_unsigned(j, "total_rows", context);
    if (kind == "unconditional") {
        m.kind = BinModelKind::unconditional;
    } else if (kind == "unreachable") {
        m.kind = BinModelKind::unreachable;
    } else if (kind == "learned") {
        m.kind = BinModelKind::learned;
        m.hidden_width = static_cast<std::uint32_t>(need_unsigned(j, "hidden_width", context));
        m.epochs_kept = static_cast<std::uint32_t>(need_unsigned(j, "epochs_kept", context));
        m.heldout_accuracy = need_number(j, "heldout_accuracy", context);
        const json& auc = need(j, "heldout_auc", context);
        if (auc.is_null()) m.heldout_auc = std::nullopt;
        else if (auc.is_number()) m.heldout_auc = auc.get<double>();
        else throw ParseError(context + ": heldout_auc must be a number or null");
        const json& params = need_array(j, "params", context);
        for (const json& p : params) {
            if (!p.is_number()) throw ParseError(context + ": params must be numbers");
            m.params.push_back(p.get<double>());
        }
    } else {
        throw ParseError(context + ": unknown model kind '" + kind + "'");
    }
    return m;
}

std::size_t expected_param_count(std::uint32_t hidden, std::size_t features) {
    return hidden == 0 ? features + 1
                       : static_cast<std::size_t>(hidden) * features + 2ULL * hidden + 1;
}

} // namespace

std::string model_set_to_string(const ModelSet& models) {
    json tests = json::array();
    for (const std::string& t : models.encoding.tests) tests.push_back(t);
    json model_array = json::array();
    for (const BinModel& m : models.models) model_array.push_back(model_to_json(m));
    json doc{{"declarations", declarations_to_json(models.encoding.declarations)},
             {"format_version", kFormatVersion},
             {"models", std::move(model_array)},
             {"space", space_to_json(models.space)},
             {"tests", std::move(tests)},
             {"training", train_config_to_json(models.config)}};
    return doc.dump(1) + "\n";
}

void save_model_set(const ModelSet& models, const std::filesystem::path& path) {
    write_file(path, model_set_to_string(models));
}

ModelSet model_set_from_string(std::string_view text, std::string_view origin) {
    const std::string context(origin);
    const json doc = parse_document(text, context);
    check_version(doc, context);

    ModelSet models;
    models.space = space_from_json(need_object(doc, "space", context), context);
    models.encoding.declarations =
        declarations_from_json(need(doc, "declarations", context), context);
    for (const json& t : need_array(doc, "tests", context)) {
        if (!t.is_string()) throw ParseError(context + ": tests must be strings");
        models.encoding.tests.push_back(t.get<std::string>());
    }
    models.config = train_config_from_json(need_object(doc, "training", context), context);

    const std::size_t features = models.encoding.feature_count();
    std::vector<BinModel> loaded;
    for (const json& m : need_array(doc, "models", context))
        loaded.push_back(model_from_json(m, context));

    // Exactly one model per bin; canonical order is space order.
    models.models.resize(models.space.size());
    std::vector<char> seen(models.space.size(), 0);
    for (BinModel& m : loaded) {
        const auto idx = models.space.index_of(m.bin_id);
        if (!idx) throw ValidationError(context + ": model for unknown bin '" + m.bin_id + "'");
        if (seen[*idx])
            throw ValidationError(context + ": duplicate model for bin '" + m.bin_id + "'");
        if (m.kind == BinModelKind::learned &&
            m.params.size() != expected_param_count(m.hidden_width, features))
            throw ValidationError(context + ": model for bin '" + m.bin_id +
                                  "' has wrong parameter count");
        seen[*idx] = 1;
        models.models[*idx] = std::move(m);
    }
    for (std::size_t b = 0; b < models.space.size(); ++b)
        if (!seen[b])
            throw ValidationError(context + ": missing model for bin '" +
                                  models.space.bins()[b].id + "'");
    return models;
}

ModelSet load_model_set(const std::filesystem::path& path) {
    return model_set_from_string(read_file(path), path.string());
}

// ---- optimized regression plan ----

namespace {

const char* goal_kind_name(Goal::Kind kind) {
    switch (kind) {
    case Goal::Kind::target_coverage: return "target_coverage";
    case Goal::Kind::max_runs: return "max_runs";
    case Goal::Kind::max_cpu_seconds: return "max_cpu_seconds";
    }
    return "target_coverage";
}

json goal_to_json(const Goal& goal) {
    return json{{"kind", goal_kind_name(goal.kind)},
                {"safety_cap_multiplier", goal.safety_cap_multiplier},
                {"value", goal.value}};
}

Goal goal_from_json(const json& j, const std::string& context) {
    Goal goal;
    const std::string kind = need_string(j, "kind", context);
    if (kind == "target_coverage") goal.kind = Goal::Kind::target_coverage;
    else if (kind == "max_runs") goal.kind = Goal::Kind::max_runs;
    else if (kind == "max_cpu_seconds") goal.kind = Goal::Kind::max_cpu_seconds;
    else throw ParseError(context + ": unknown goal kind '" + kind + "'");
    goal.value = need_number(j, "value", context);
    goal.safety_cap_multiplier = need_number(j, "safety_cap_multiplier", context);
    return goal;
}

json constraints_to_json(const ConstraintSet& constraints) {
    json out = json::object();
    for (const auto& [name, narrowing] : constraints.narrowings) {
        if (const auto* num = std::get_if<NumericConstraint>(&narrowing))
            out[name] = json{{"hi", num->hi}, {"lo", num->lo}};
        else
            out[name] = json{{"values", std::get<CategoricalConstraint>(narrowing).values}};
    }
    return out;
}

ConstraintSet constraints_from_json(const json& j, const std::string& context) {
    ConstraintSet out;
    if (!j.is_object()) throw ParseError(context + ": constraints must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const json& c = it.value();
        if (c.contains("values")) {
            CategoricalConstraint cc;
            for (const json& v : need_array(c, "values", context)) {
                if (!v.is_string())
                    throw ParseError(context + ": constraint values must be strings");
                cc.values.push_back(v.get<std::string>());
            }
            out.narrowings[it.key()] = std::move(cc);
        } else {
            out.narrowings[it.key()] =
                NumericConstraint{need_number(c, "lo", context), need_number(c, "hi", context)};
        }
    }
    return out;
}

} // namespace

std::string plan_to_string(const OptimizedRegression& plan) {
    json runs = json::array();
    for (const PlannedRun& r : plan.runs) {
        runs.push_back(json{{"constraints", constraints_to_json(r.constraints)},
                            {"expected_gain", r.expected_gain},
                            {"phase", r.phase == PlanPhase::core ? "core" : "explore"},
                            {"seed", r.seed},
                            {"targets", r.targeted_bins},
                            {"test", r.test}});
    }
    json doc{{"declarations", declarations_to_json(plan.declarations)},
             {"expected_coverage_percent", plan.expected_coverage_percent},
             {"format_version", kFormatVersion},
             {"provenance",
              json{{"archive_digest", plan.archive_digest},
                   {"goal", goal_to_json(plan.goal)},
                   {"model_digest", plan.model_digest},
                   {"plan_seed", plan.plan_seed}}},
             {"runs", std::move(runs)},
             {"shortfall", plan.shortfall_bins}};
    return doc.dump(1) + "\n";
}

void save_plan(const OptimizedRegression& plan, const std::filesystem::path& path) {
    for (const PlannedRun& r : plan.runs)
        validate_constraints(r.constraints, plan.declarations);
    write_file(path, plan_to_string(plan));
}

OptimizedRegression plan_from_string(std::string_view text, std::string_view origin) {
    const std::string context(origin);
    const json doc = parse_document(text, context);
    check_version(doc, context);

    OptimizedRegression plan;
    plan.declarations = declarations_from_json(need(doc, "declarations", context), context);
    plan.expected_coverage_percent = need_number(doc, "expected_coverage_percent", context);

    const json& prov = need_object(doc, "provenance", context);
    plan.archive_digest = need_string(prov, "archive_digest", context);
    plan.model_digest = need_string(prov, "model_digest", context);
    plan.goal = goal_from_json(need_object(prov, "goal", context), context);
    plan.plan_seed = need_unsigned(prov, "plan_seed", context);

    for (const json& r : need_array(doc, "runs", context)) {
        PlannedRun run;
        run.test = need_string(r, "test", context);
        run.seed = need_unsigned(r, "seed", context);
        run.expected_gain = need_number(r, "expected_gain", context);
        const std::string phase = need_string(r, "phase", context);
        if (phase == "core") run.phase = PlanPhase::core;
        else if (phase == "explore") run.phase = PlanPhase::explore;
        else throw ParseError(context + ": unknown plan phase '" + phase + "'");
        for (const json& t : need_array(r, "targets", context)) {
            if (!t.is_string()) throw ParseError(context + ": targets must be strings");
            run.targeted_bins.push_back(t.get<std::string>());
        }
        run.constraints = constraints_from_json(need(r, "constraints", context), context);
        validate_constraints(run.constraints, plan.declarations);
        plan.runs.push_back(std::move(run));
    }
    for (const json& s : need_array(doc, "shortfall", context)) {
        if (!s.is_string()) throw ParseError(context + ": shortfall entries must be strings");
        plan.shortfall_bins.push_back(s.get<std::string>());
    }
    return plan;
}

OptimizedRegression load_plan(const std::filesystem::path& path) {
    return plan_from_string(read_file(path), path.string());
}

// ---- synthetic testbench spec ----

namespace {

json atom_to_json(const PredicateAtom& atom) {
    switch (atom.kind) {
    case PredicateAtom::Kind::numeric_lt:
        return json{{"cp", atom.cp}, {"op", "lt"}, {"value", atom.a}};
    case PredicateAtom::Kind::numeric_le:
        return json{{"cp", atom.cp}, {"op", "le"}, {"value", atom.a}};
    case PredicateAtom::Kind::numeric_gt:
        return json{{"cp", atom.cp}, {"op", "gt"}, {"value", atom.a}};
    case PredicateAtom::Kind::numeric_ge:
        return json{{"cp", atom.cp}, {"op", "ge"}, {"value", atom.a}};
    case PredicateAtom::Kind::numeric_between:
        return json{{"cp", atom.cp}, {"hi", atom.b}, {"lo", atom.a}, {"op", "between"}};
    case PredicateAtom::Kind::categorical_eq:
        return json{{"cp", atom.cp}, {"op", "eq"}, {"value", atom.values.front()}};
    case PredicateAtom::Kind::categorical_in:
        return json{{"cp", atom.cp}, {"op", "in"}, {"values", atom.values}};
    case PredicateAtom::Kind::test_eq:
        return json{{"op", "test_is"}, {"test", atom.test}};
    }
    return json::object();
}

PredicateAtom atom_from_json(const json& j, const std::string& context) {
    PredicateAtom atom;
    const std::string op = need_string(j, "op", context);
    if (op == "test_is") {
        atom.kind = PredicateAtom::Kind::test_eq;
        atom.test = need_string(j, "test", context);
        return atom;
    }
    atom.cp = need_string(j, "cp", context);
    if (op == "lt" || op == "le" || op == "gt" || op == "ge") {
        atom.kind = op == "lt"   ? PredicateAtom::Kind::numeric_lt
                    : op == "le" ? PredicateAtom::Kind::numeric_le
                    : op == "gt" ? PredicateAtom::Kind::numeric_gt
                                 : PredicateAtom::Kind::numeric_ge;
        atom.a = need_number(j, "value", context);
    } else if (op == "between") {
        atom.kind = PredicateAtom::Kind::numeric_between;
        atom.a = need_number(j, "lo", context);
        atom.b = need_number(j, "hi", context);
    } else if (op == "eq") {
        atom.kind = PredicateAtom::Kind::categorical_eq;
        atom.values = {need_string(j, "value", context)};
    } else if (op == "in") {
        atom.kind = PredicateAtom::Kind::categorical_in;
        for (const json& v : need_array(j, "values", context)) {
            if (!v.is_string()) throw ParseError(context + ": 'in' values must be strings");
            atom.values.push_back(v.get<std::string>());
        }
    } else {
        throw ParseError(context + ": unknown predicate op '" + op + "'");
    }
    return atom;
}

} // namespace

std::string dut_spec_to_string(const DutSpec& dut) {
    json bins = json::array();
    for (const DutBin& b : dut.bins) {
        json when = json::array();
        for (const PredicateAtom& atom : b.predicate.atoms) when.push_back(atom_to_json(atom));
        bins.push_back(json{{"at_least", b.bin.at_least},
                            {"buggy", b.buggy},
                            {"group", b.bin.group},
                            {"id", b.bin.id},
                            {"weight", b.bin.weight},
                            {"when", std::move(when)}});
    }
    json tests = json::array();
    for (const DutTest& t : dut.tests) {
        json entry{{"base_cpu_seconds", t.base_cpu_seconds},
                   {"cpu_jitter_fraction", t.cpu_jitter_fraction},
                   {"name", t.name},
                   {"overrides", controls_to_json(t.overrides)}};
        if (t.gates) entry["gates"] = *t.gates;
        tests.push_back(std::move(entry));
    }
    json doc{{"bins", std::move(bins)},
             {"declarations", declarations_to_json(dut.declarations)},
             {"format_version", kFormatVersion},
             {"tests", std::move(tests)}};
    return doc.dump(1) + "\n";
}

void save_dut_spec(const DutSpec& dut, const std::filesystem::path& path) {
    dut.validate();
    write_file(path, dut_spec_to_string(dut));
}

DutSpec dut_spec_from_string(std::string_view text, std::string_view origin) {
    const std::string context(origin);
    const json doc = parse_document(text, context);
    check_version(doc, context);

    DutSpec dut;
    dut.declarations = declarations_from_json(need(doc, "declarations", context), context);
    for (const json& b : need_array(doc, "bins", context)) {
        DutBin bin;
        bin.bin = bin_from_json(b, context);
        bin.buggy = need_bool(b, "buggy", context);
        for (const json& atom : need_array(b, "when", context))
            bin.predicate.atoms.push_back(atom_from_json(atom, context));
        dut.bins.push_back(std::move(bin));
    }
    for (const json& t : need_array(doc, "tests", context)) {
        DutTest test;
        test.name = need_string(t, "name", context);
        test.base_cpu_seconds = need_number(t, "base_cpu_seconds", context);
        test.cpu_jitter_fraction = need_number(t, "cpu_jitter_fraction", context);
        test.overrides = controls_from_json(need_object(t, "overrides", context), context);
        if (t.contains("gates")) {
            std::vector<std::string> gates;
            for (const json& g : need_array(t, "gates", context)) {
                if (!g.is_string()) throw ParseError(context + ": gates must be strings");
                gates.push_back(g.get<std::string>());
            }
            test.gates = std::move(gates);
        }
        dut.tests.push_back(std::move(test));
    }
    try {
        dut.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(context + ": " + e.what());
    }
    return dut;
}

DutSpec load_dut_spec(const std::filesystem::path& path) {
    return dut_spec_from_string(read_file(path), path.string());
}

} // namespace regopt
