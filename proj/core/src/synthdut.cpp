#include "regopt/synthdut.hpp"

#include <algorithm>
#include <set>

#include "regopt/errors.hpp"
#include "regopt/parallel.hpp"
#include "regopt/prng.hpp"

namespace regopt {

bool BinPredicate::eval(std::string_view test,
                        const std::map<std::string, ControlValue>& controls) const {
    for (const PredicateAtom& atom : atoms) {
        if (atom.kind == PredicateAtom::Kind::test_eq) {
            if (test != atom.test) return false;
            continue;
        }
        auto it = controls.find(atom.cp);
        if (it == controls.end()) return false;
        switch (atom.kind) {
        case PredicateAtom::Kind::numeric_lt:
        case PredicateAtom::Kind::numeric_le:
        case PredicateAtom::Kind::numeric_gt:
        case PredicateAtom::Kind::numeric_ge:
        case PredicateAtom::Kind::numeric_between: {
            const double* v = std::get_if<double>(&it->second);
            if (!v) return false;
            switch (atom.kind) {
            case PredicateAtom::Kind::numeric_lt: if (!(*v < atom.a)) return false; break;
            case PredicateAtom::Kind::numeric_le: if (!(*v <= atom.a)) return false; break;
            case PredicateAtom::Kind::numeric_gt: if (!(*v > atom.a)) return false; break;
            case PredicateAtom::Kind::numeric_ge: if (!(*v >= atom.a)) return false; break;
            default: if (!(*v >= atom.a && *v <= atom.b)) return false; break;
            }
            break;
        }
        case PredicateAtom::Kind::categorical_eq:
        case PredicateAtom::Kind::categorical_in: {
            const std::string* v = std::get_if<std::string>(&it->second);
            if (!v) return false;
            if (std::find(atom.values.begin(), atom.values.end(), *v) == atom.values.end())
                return false;
            break;
        }
        case PredicateAtom::Kind::test_eq: break;
        }
    }
    return true;
}

CoverageSpace DutSpec::space() const {
    std::vector<CoverageBin> out;
    out.reserve(bins.size());
    for (const DutBin& b : bins) out.push_back(b.bin);
    return CoverageSpace(std::move(out));
}

const DutTest* DutSpec::find_test(std::string_view name) const {
    auto it = std::find_if(tests.begin(), tests.end(),
                           [&](const DutTest& t) { return t.name == name; });
    return it == tests.end() ? nullptr : &*it;
}

bool DutSpec::gated(const DutTest& test, std::string_view bin_id) const {
    if (!test.gates) return true;
    return std::find(test.gates->begin(), test.gates->end(), bin_id) != test.gates->end();
}

void DutSpec::validate() const {
    if (tests.empty()) throw ValidationError("testbench spec declares no tests");
    const CoverageSpace sp = space(); // checks bin uniqueness/weights

    std::set<std::string> test_names;
    for (const DutTest& t : tests) {
        if (!test_names.insert(t.name).second)
            throw ValidationError("duplicate test '" + t.name + "'");
        if (t.base_cpu_seconds < 0.0)
            throw ValidationError("test '" + t.name + "' has negative base cpu");
        if (t.cpu_jitter_fraction < 0.0)
            throw ValidationError("test '" + t.name + "' has negative cpu jitter");
        for (const auto& [name, value] : t.overrides) {
            const ControlPointDecl* decl = find_declaration(declarations, name);
            if (!decl)
                throw ValidationError("test '" + t.name + "' overrides undeclared control point '" +
                                      name + "'");
            if (!value_in_domain(*decl, value))
                throw ValidationError("test '" + t.name + "' override for '" + name +
                                      "' is outside the declared domain");
        }
        if (t.gates)
            for (const std::string& id : *t.gates)
                if (!sp.find(id))
                    throw ValidationError("test '" + t.name + "' gates unknown bin '" + id + "'");
    }

    for (const DutBin& b : bins) {
        for (const PredicateAtom& atom : b.predicate.atoms) {
            if (atom.kind == PredicateAtom::Kind::test_eq) {
                if (!find_test(atom.test))
                    throw ValidationError("bin '" + b.bin.id + "' references unknown test '" +
                                          atom.test + "'");
                continue;
            }
            const ControlPointDecl* decl = find_declaration(declarations, atom.cp);
            if (!decl)
                throw ValidationError("bin '" + b.bin.id +
                                      "' references undeclared control point '" + atom.cp + "'");
            const bool numeric_atom = atom.kind != PredicateAtom::Kind::categorical_eq &&
                                      atom.kind != PredicateAtom::Kind::categorical_in;
            if (numeric_atom != decl->is_numeric())
                throw ValidationError("bin '" + b.bin.id + "' applies a " +
                                      (numeric_atom ? "numeric" : "categorical") +
                                      " condition to control point '" + atom.cp + "'");
        }
    }
}

namespace {

double sample_numeric(const NumericRange& declared, const NumericConstraint* narrowing,
                      SplitMix64 stream) {
    double lo = declared.lo, hi = declared.hi;
    if (narrowing) {
        lo = narrowing->lo;
        hi = narrowing->hi;
    }
    const double u = stream.next_unit();
    return lo + u * (hi - lo);
}

std::string sample_categorical(const CategoricalDomain& declared,
                               const CategoricalConstraint* narrowing, SplitMix64 stream) {
    // Effective subset keeps declared order.
    std::vector<const std::string*> effective;
    for (const std::string& v : declared.values) {
        if (!narrowing ||
            std::find(narrowing->values.begin(), narrowing->values.end(), v) !=
                narrowing->values.end())
            effective.push_back(&v);
    }
    if (effective.empty())
        throw ValidationError("constraint selects no values from the declared domain");
    return *effective[stream.next_index(effective.size())];
}

} // namespace

RunRecord simulate_run(const DutSpec& dut, std::string_view test, std::uint64_t seed,
                       const ConstraintSet& constraints) {
    const DutTest* t = dut.find_test(test);
    if (!t) throw ValidationError("unknown test '" + std::string(test) + "'");
    validate_constraints(constraints, dut.declarations);

    SplitMix64 root(stable_hash(test) ^ seed);
    std::vector<std::uint64_t> stream_seeds(dut.declarations.size());
    for (std::uint64_t& s : stream_seeds) s = root.next();
    const std::uint64_t cpu_stream_seed = root.next();

    RunRecord run;
    run.test = std::string(test);
    run.seed = seed;

    for (std::size_t d = 0; d < dut.declarations.size(); ++d) {
        const ControlPointDecl& decl = dut.declarations[d];
        auto ov = t->overrides.find(decl.name);
        if (ov != t->overrides.end()) {
            run.controls[decl.name] = ov->second;
            continue;
        }
        auto narrowing = constraints.narrowings.find(decl.name);
        if (decl.is_numeric()) {
            const NumericConstraint* nc =
                narrowing == constraints.narrowings.end()
                    ? nullptr
                    : &std::get<NumericConstraint>(narrowing->second);
            run.controls[decl.name] =
                sample_numeric(decl.numeric(), nc, SplitMix64(stream_seeds[d]));
        } else {
            const CategoricalConstraint* cc =
                narrowing == constraints.narrowings.end()
                    ? nullptr
                    : &std::get<CategoricalConstraint>(narrowing->second);
            run.controls[decl.name] =
                sample_categorical(decl.categorical(), cc, SplitMix64(stream_seeds[d]));
        }
    }

    const double u = SplitMix64(cpu_stream_seed).next_unit();
    run.cpu_seconds = t->base_cpu_seconds * (1.0 + t->cpu_jitter_fraction * u);

    bool failed = false;
    for (const DutBin& b : dut.bins) {
        if (!dut.gated(*t, b.bin.id)) continue;
        if (!b.predicate.eval(test, run.controls)) continue;
        run.bins_hit[b.bin.id] = 1;
        if (b.buggy) failed = true;
    }
    run.status = failed ? RunStatus::fail : RunStatus::pass;
    return run;
}

Regression generate_archive(const DutSpec& dut, std::uint32_t seeds_per_test,
                            std::uint64_t base_seed) {
    if (seeds_per_test == 0) throw ValidationError("seeds_per_test must be positive");
    dut.validate();

    Regression out;
    out.space = dut.space();
    out.declarations = dut.declarations;
    out.runs.resize(static_cast<std::size_t>(dut.tests.size()) * seeds_per_test);
    parallel_for(out.runs.size(), [&](std::size_t ordinal) {
        const DutTest& test = dut.tests[ordinal / seeds_per_test];
        out.runs[ordinal] = simulate_run(dut, test.name, base_seed + ordinal);
    });
    return out;
}

Regression replay_plan(const DutSpec& dut, const OptimizedRegression& plan) {
    dut.validate();
    Regression out;
    out.space = dut.space();
    out.declarations = dut.declarations;
    out.runs.resize(plan.runs.size());
    parallel_for(plan.runs.size(), [&](std::size_t i) {
        const PlannedRun& p = plan.runs[i];
        out.runs[i] = simulate_run(dut, p.test, p.seed, p.constraints);
    });
    return out;
}

} // namespace regopt
