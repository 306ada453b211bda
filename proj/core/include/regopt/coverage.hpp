#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace regopt {

// One countable verification goal. "Hit" once its accumulated hit count
// across the merged runs reaches at_least.
struct CoverageBin {
    std::string id;
    std::string group;
    std::uint32_t weight = 1;
    std::uint32_t at_least = 1;

    bool operator==(const CoverageBin&) const = default;
};

// The universe of bins coverage percentages are computed against.
// Iteration order is declaration order and is stable across runs.
class CoverageSpace {
public:
    CoverageSpace() = default;
    explicit CoverageSpace(std::vector<CoverageBin> bins);

    const std::vector<CoverageBin>& bins() const { return bins_; }
    std::size_t size() const { return bins_.size(); }
    bool empty() const { return bins_.empty(); }

    const CoverageBin* find(std::string_view id) const;
    std::optional<std::size_t> index_of(std::string_view id) const;
    std::uint64_t total_weight() const { return total_weight_; }

    bool operator==(const CoverageSpace& other) const { return bins_ == other.bins_; }

private:
    std::vector<CoverageBin> bins_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t total_weight_ = 0;
};

struct NumericRange {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const NumericRange&) const = default;
};

struct CategoricalDomain {
    std::vector<std::string> values; // declared order; distinct
    bool operator==(const CategoricalDomain&) const = default;
};

// A named front-end random variable of the testbench.
struct ControlPointDecl {
    std::string name;
    std::variant<NumericRange, CategoricalDomain> domain;

    bool is_numeric() const { return std::holds_alternative<NumericRange>(domain); }
    const NumericRange& numeric() const { return std::get<NumericRange>(domain); }
    const CategoricalDomain& categorical() const { return std::get<CategoricalDomain>(domain); }

    bool operator==(const ControlPointDecl&) const = default;
};

using ControlValue = std::variant<double, std::string>;

enum class RunStatus { pass, fail };

// One simulation run: stimulus identity, sampled control values, cost and
// the bins it hit. Failed runs carry coverage exactly like passed runs.
struct RunRecord {
    std::string test;
    std::uint64_t seed = 0;
    double cpu_seconds = 0.0;
    RunStatus status = RunStatus::pass;
    std::map<std::string, ControlValue> controls;
    std::map<std::string, std::uint64_t> bins_hit; // id -> hit count

    bool operator==(const RunRecord&) const = default;
};

// An ordered batch of runs over one coverage space. Duplicate (test, seed)
// pairs are allowed; ordering is stable.
struct Regression {
    CoverageSpace space;
    std::vector<ControlPointDecl> declarations;
    std::vector<RunRecord> runs;

    bool operator==(const Regression&) const = default;
};

// Accumulated hit counts per bin id over a run subset.
std::map<std::string, std::uint64_t> accumulate_hits(std::span<const RunRecord> runs);

// Bin ids whose accumulated hit count meets their at_least threshold.
std::set<std::string> hit_set(std::span<const RunRecord> runs, const CoverageSpace& space);

// 100 * (weight of bins meeting at_least over the given runs) / (total weight).
// Weight sums are integral, so equal hit sets give bit-identical percentages.
double coverage_percent(std::span<const RunRecord> runs, const CoverageSpace& space);
double coverage_percent(const Regression& regression);

double total_cpu(std::span<const RunRecord> runs);

const ControlPointDecl* find_declaration(std::span<const ControlPointDecl> declarations,
                                         std::string_view name);

// True iff value is of the declared kind and inside the declared domain.
bool value_in_domain(const ControlPointDecl& decl, const ControlValue& value);

// Throws ValidationError naming the offending bin id / control point.
void validate_run(const RunRecord& run, const CoverageSpace& space,
                  std::span<const ControlPointDecl> declarations);
void validate_regression(const Regression& regression);

} // namespace regopt
