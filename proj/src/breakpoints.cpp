#include "reinverify/breakpoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "reinverify/errors.hpp"

namespace reinverify {

SearchMethod search_method_from_string(const std::string& s) {
    if (s == "linear") return SearchMethod::Linear;
    if (s == "binary") return SearchMethod::Binary;
    if (s == "iterative") return SearchMethod::Iterative;
    throw EmptySpec("unknown search method '" + s + "'");
}

const char* search_method_text(SearchMethod m) {
    switch (m) {
        case SearchMethod::Linear: return "linear";
        case SearchMethod::Binary: return "binary";
        case SearchMethod::Iterative: return "iterative";
    }
    return "?";
}

namespace {

struct SliceAborted {
    std::string reason;
};

class Search {
  public:
    Search(const drlp::Template& tmpl, const SearchSpec& spec, const VerifyFn& verify_fn)
        : tmpl_(tmpl), spec_(spec), verify_(verify_fn) {
        if (tmpl.free_parameters.empty()) throw EmptySpec("template has no free parameters");
        for (const std::string& name : tmpl.free_parameters) {
            auto it = spec.vars.find(name);
            if (it == spec.vars.end())
                throw EmptySpec("search spec is missing variable '" + name + "'");
            validate(name, it->second);
            order_.push_back(name);
        }
        if (spec.vars.size() != order_.size())
            throw EmptySpec("search spec names variables that are not free in the template");
    }

    SearchReport run() {
        std::map<std::string, double> slice;
        descend(0, slice);
        return std::move(report_);
    }

  private:
    static void validate(const std::string& name, const VarSpec& v) {
        if (v.lower_bound > v.upper_bound)
            throw EmptySpec("variable '" + name + "' has lower_bound > upper_bound");
        if (v.precision <= 0) throw EmptySpec("variable '" + name + "' needs precision > 0");
        if (v.method == SearchMethod::Iterative && v.iterative_step <= 1.0)
            throw EmptySpec("variable '" + name + "' needs iterative_step > 1");
    }

    drlp::Script concretized(const std::map<std::string, double>& values) const {
        std::vector<std::pair<std::string, double>> pairs(values.begin(), values.end());
        drlp::ParseResult r = drlp::concretize_all(tmpl_, pairs);
        if (auto* s = std::get_if<drlp::Script>(&r)) return std::move(*s);
        throw EmptySpec("search spec leaves free parameters unassigned");
    }

    struct Probe {
        Status status;
        std::optional<Witness> witness;
        drlp::Script script;
    };

    Probe probe(std::map<std::string, double>& slice, const std::string& var, double value) {
        slice[var] = value;
        Probe p{Status::Unknown, std::nullopt, concretized(slice)};
        VerifyResult r = verify_(p.script);
        ++report_.probe_count;
        slice.erase(var);
        if (r.status == Status::Unknown)
            throw SliceAborted{"verdict Unknown at " + var + "=" + std::to_string(value)};
        p.status = r.status;
        p.witness = std::move(r.witness);
        return p;
    }

    void descend(std::size_t level, std::map<std::string, double>& slice) {
        const std::string& var = order_[level];
        const VarSpec& vs = spec_.vars.at(var);
        if (level + 1 == order_.size()) {
            try {
                switch (vs.method) {
                    case SearchMethod::Linear: search_linear(var, vs, slice); break;
                    case SearchMethod::Binary: search_binary(var, vs, slice); break;
                    case SearchMethod::Iterative: search_iterative(var, vs, slice); break;
                }
            } catch (const SliceAborted& a) {
                std::ostringstream os;
                for (const auto& [k, v] : slice) os << k << "=" << v << " ";
                os << "(" << a.reason << ")";
                report_.aborted_slices.push_back(os.str());
            }
            return;
        }
        // outer variables: plain linear stepping over [lb, ub]
        for (double v = vs.lower_bound; v <= vs.upper_bound + vs.precision * 0.5;
             v += vs.precision) {
            slice[var] = v;
            descend(level + 1, slice);
        }
        slice.erase(var);
    }

    void emit(const std::string& var, const std::map<std::string, double>& slice, double lo,
              Status lo_status, double hi, Status hi_status) {
        Breakpoint bp;
        bp.variable = var;
        bp.slice = slice;
        bp.value_lo = lo;
        bp.value_hi = hi;
        bp.from_status = lo_status;
        bp.to_status = hi_status;
        auto values = slice;
        values[var] = hi;
        bp.concrete_script = concretized(values);
        report_.breakpoints.push_back(std::move(bp));
    }

    void search_linear(const std::string& var, const VarSpec& vs,
                       std::map<std::string, double>& slice) {
        double prev_value = vs.lower_bound;
        Probe prev = probe(slice, var, prev_value);
        for (double v = vs.lower_bound + vs.precision; v <= vs.upper_bound + vs.precision * 0.5;
             v += vs.precision) {
            Probe cur = probe(slice, var, v);
            if (cur.status != prev.status)
                emit(var, slice, prev_value, prev.status, v, cur.status);
            prev = std::move(cur);
            prev_value = v;
        }
    }

    // Counterexample reuse: a falsifying witness pins the searched variable to
    // the value it actually attained, which brackets faster than the midpoint.
    // Only candidates on the side the bracket is about to shed are accepted;
    // anything else falls back to the midpoint so progress never drops below
    // plain bisection.
    double witness_value(const Probe& p, const std::string& var, double accept_lo,
                         double accept_hi, double fallback) const {
        if (!p.witness) return fallback;
        std::vector<double> candidates =
            witness_var_boundaries(p.script, var, p.witness->x, p.witness->y);
        double best = fallback;
        double best_dist = std::numeric_limits<double>::infinity();
        for (double c : candidates) {
            if (c <= accept_lo || c >= accept_hi) continue;  // strictly interior only
            double d = std::abs(c - fallback);
            if (d < best_dist) {
                best_dist = d;
                best = c;
            }
        }
        return best;
    }

    void bisect(const std::string& var, std::map<std::string, double>& slice, double lo,
                Status lo_status, double hi, Status hi_status, double precision) {
        while (hi - lo > precision) {
            double mid = (lo + hi) / 2;
            Probe cur = probe(slice, var, mid);
            double curr = mid;
            if (cur.status == Status::Falsified) {
                // the moving side depends on which endpoint the verdict matches
                if (cur.status == lo_status) curr = witness_value(cur, var, mid, hi, mid);
                else curr = witness_value(cur, var, lo, mid, mid);
            }
            if (cur.status == lo_status) lo = curr;
            else hi = curr;
        }
        emit(var, slice, lo, lo_status, hi, hi_status);
    }

    void search_binary(const std::string& var, const VarSpec& vs,
                       std::map<std::string, double>& slice) {
        Probe lo_p = probe(slice, var, vs.lower_bound);
        Probe hi_p = probe(slice, var, vs.upper_bound);
        if (lo_p.status == hi_p.status) return;  // no flip on this slice
        bisect(var, slice, vs.lower_bound, lo_p.status, vs.upper_bound, hi_p.status,
               vs.precision);
    }

    void search_iterative(const std::string& var, const VarSpec& vs,
                          std::map<std::string, double>& slice) {
        if (vs.lower_bound <= 0)
            throw EmptySpec("iterative search needs a positive lower_bound for '" + var + "'");
        double curr = vs.lower_bound;
        Probe base = probe(slice, var, curr);
        for (;;) {
            double next = curr * vs.iterative_step;
            if (next > vs.upper_bound) return;  // no flip in range
            Probe p = probe(slice, var, next);
            if (p.status != base.status) {
                // flip bracketed in [curr, next]: switch to binary search
                bisect(var, slice, curr, base.status, next, p.status, vs.precision);
                return;
            }
            curr = next;
        }
    }

    const drlp::Template& tmpl_;
    const SearchSpec& spec_;
    const VerifyFn& verify_;
    std::vector<std::string> order_;
    SearchReport report_;
};

}  // namespace

SearchReport find_breakpoints(const drlp::Template& tmpl, const SearchSpec& spec,
                              const VerifyFn& verify_fn) {
    Search s(tmpl, spec, verify_fn);
    return s.run();
}

BreaklineSummary analyze_breakpoints(const std::vector<Breakpoint>& bps) {
    BreaklineSummary out;
    out.total = static_cast<int>(bps.size());
    for (const Breakpoint& bp : bps) {
        auto& slices = out.by_variable[bp.variable];
        SliceSummary* target = nullptr;
        for (SliceSummary& s : slices)
            if (s.slice == bp.slice) target = &s;
        if (!target) {
            slices.push_back(SliceSummary{bp.slice, 0, {}});
            target = &slices.back();
        }
        target->flips += 1;
        target->extracted_values.push_back((bp.value_lo + bp.value_hi) / 2);
        if (target->flips > 1) out.monotone = false;
    }
    return out;
}

}  // namespace reinverify
