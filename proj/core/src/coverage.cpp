#include "regopt/coverage.hpp"

#include <algorithm>

#include "regopt/errors.hpp"

namespace regopt {

CoverageSpace::CoverageSpace(std::vector<CoverageBin> bins) : bins_(std::move(bins)) {
    if (bins_.empty()) throw ValidationError("coverage space must declare at least one bin");
    index_.reserve(bins_.size());
    for (std::size_t i = 0; i < bins_.size(); ++i) {
        const CoverageBin& b = bins_[i];
        if (b.id.empty()) throw ValidationError("coverage bin with empty id");
        if (b.weight < 1) throw ValidationError("bin '" + b.id + "' has weight < 1");
        if (b.at_least < 1) throw ValidationError("bin '" + b.id + "' has at_least < 1");
        if (!index_.emplace(b.id, i).second)
            throw ValidationError("duplicate bin id '" + b.id + "'");
        total_weight_ += b.weight;
    }
}

const CoverageBin* CoverageSpace::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &bins_[it->second];
}

std::optional<std::size_t> CoverageSpace::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::map<std::string, std::uint64_t> accumulate_hits(std::span<const RunRecord> runs) {
    std::map<std::string, std::uint64_t> acc;
    for (const RunRecord& run : runs)
        for (const auto& [id, count] : run.bins_hit) acc[id] += count;
    return acc;
}

std::set<std::string> hit_set(std::span<const RunRecord> runs, const CoverageSpace& space) {
    std::set<std::string> out;
    for (const auto& [id, count] : accumulate_hits(runs)) {
        const CoverageBin* bin = space.find(id);
        if (!bin) throw ValidationError("unknown bin id '" + id + "'");
        if (count >= bin->at_least) out.insert(id);
    }
    return out;
}

double coverage_percent(std::span<const RunRecord> runs, const CoverageSpace& space) {
    const auto acc = accumulate_hits(runs);
    std::uint64_t satisfied = 0;
    for (const CoverageBin& bin : space.bins()) {
        auto it = acc.find(bin.id);
        if (it != acc.end() && it->second >= bin.at_least) satisfied += bin.weight;
    }
    for (const auto& [id, count] : acc) {
        (void)count;
        if (!space.find(id)) throw ValidationError("unknown bin id '" + id + "'");
    }
    const std::uint64_t total = space.total_weight();
    if (total == 0) return 0.0;
    return 100.0 * static_cast<double>(satisfied) / static_cast<double>(total);
}

double coverage_percent(const Regression& regression) {
    return coverage_percent(regression.runs, regression.space);
}

double total_cpu(std::span<const RunRecord> runs) {
    double sum = 0.0;
    for (const RunRecord& run : runs) sum += run.cpu_seconds;
    return sum;
}

const ControlPointDecl* find_declaration(std::span<const ControlPointDecl> declarations,
                                         std::string_view name) {
    auto it = std::find_if(declarations.begin(), declarations.end(),
                           [&](const ControlPointDecl& d) { return d.name == name; });
    return it == declarations.end() ? nullptr : &*it;
}

bool value_in_domain(const ControlPointDecl& decl, const ControlValue& value) {
    if (decl.is_numeric()) {
        const double* v = std::get_if<double>(&value);
        if (!v) return false;
        const NumericRange& r = decl.numeric();
        return *v >= r.lo && *v <= r.hi;
    }
    const std::string* v = std::get_if<std::string>(&value);
    if (!v) return false;
    const auto& values = decl.categorical().values;
    return std::find(values.begin(), values.end(), *v) != values.end();
}

void validate_run(const RunRecord& run, const CoverageSpace& space,
                  std::span<const ControlPointDecl> declarations) {
    if (run.cpu_seconds < 0.0)
        throw ValidationError("run (" + run.test + ", seed " + std::to_string(run.seed) +
                              ") has negative cpu_seconds");
    for (const auto& [id, count] : run.bins_hit) {
        (void)count;
        if (!space.find(id)) throw ValidationError("unknown bin id '" + id + "'");
    }
    for (const auto& [name, value] : run.controls) {
        const ControlPointDecl* decl = find_declaration(declarations, name);
        if (!decl) throw ValidationError("undeclared control point '" + name + "'");
        if (!value_in_domain(*decl, value))
            throw ValidationError("control value for '" + name + "' outside declared domain");
    }
}

void validate_regression(const Regression& regression) {
    if (regression.space.empty())
        throw ValidationError("regression has an empty coverage space");
    std::set<std::string> names;
    for (const ControlPointDecl& decl : regression.declarations) {
        if (!names.insert(decl.name).second)
            throw ValidationError("duplicate control point '" + decl.name + "'");
        if (decl.is_numeric()) {
            const NumericRange& r = decl.numeric();
            if (!(r.lo <= r.hi))
                throw ValidationError("control point '" + decl.name + "' has lo > hi");
        } else {
            const auto& values = decl.categorical().values;
            if (values.empty())
                throw ValidationError("control point '" + decl.name + "' has no values");
            std::set<std::string> uniq(values.begin(), values.end());
            if (uniq.size() != values.size())
                throw ValidationError("control point '" + decl.name + "' has duplicate values");
        }
    }
    for (const RunRecord& run : regression.runs)
        validate_run(run, regression.space, regression.declarations);
}

} // namespace regopt
