#include "reinverify/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "reinverify/drlp/printer.hpp"
#include "reinverify/errors.hpp"

namespace reinverify {

DistanceFn distance_fn_from_string(const std::string& s) {
    if (s == "l1" || s == "L1") return DistanceFn::L1;
    if (s == "l2" || s == "L2") return DistanceFn::L2;
    if (s == "linf" || s == "Linf") return DistanceFn::Linf;
    throw SemanticError("unknown distance function '" + s + "'");
}

double vector_distance(const std::vector<double>& a, const std::vector<double>& b,
                       DistanceFn fn) {
    if (a.size() != b.size()) throw DimensionError("distance between different-length vectors");
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = std::abs(a[i] - b[i]);
        switch (fn) {
            case DistanceFn::L1: acc += d; break;
            case DistanceFn::L2: acc += d * d; break;
            case DistanceFn::Linf: acc = std::max(acc, d); break;
        }
    }
    return fn == DistanceFn::L2 ? std::sqrt(acc) : acc;
}

namespace {

using drlp::format_number;

std::string list_literal(const std::vector<double>& v) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_number(v[i]);
    os << "]";
    return os.str();
}

// Box precondition: discussed features +-radius (a literal or a parameter
// name), the rest pinned.
std::string box_precondition(const std::vector<double>& x0, const std::set<int>& discussed,
                             const std::string& radius) {
    std::ostringstream lo, hi;
    lo << "[";
    hi << "[";
    for (std::size_t j = 0; j < x0.size(); ++j) {
        if (j) {
            lo << ", ";
            hi << ", ";
        }
        if (discussed.count(static_cast<int>(j))) {
            lo << format_number(x0[j]) << " - " << radius;
            hi << format_number(x0[j]) << " + " << radius;
        } else {
            lo << format_number(x0[j]);
            hi << format_number(x0[j]);
        }
    }
    lo << "]";
    hi << "]";
    return lo.str() + " <= x[0] <= " + hi.str();
}

drlp::Template parse_template(const std::string& source) {
    drlp::ParseResult r = drlp::parse(source);
    if (auto* t = std::get_if<drlp::Template>(&r)) return std::move(*t);
    throw SemanticError("generated property has no free parameter");
}

VerifyFn one_shot_verifier(const Network& net, const SolveOptions& opts) {
    return [&net, opts](const drlp::Script& script) { return bmc(script, net, 1, opts); };
}

}  // namespace

double sensitivity(const Network& net, const PerturbationQuestion& q,
                   std::optional<std::pair<double, double>> y_range,
                   const InterpretOptions& opts) {
    const int n = net.input_dim();
    const int m = net.output_dim();
    if (static_cast<int>(q.original_input.size()) != n)
        throw DimensionError("original input length != network input dim");
    std::set<int> discussed(q.discussed.begin(), q.discussed.end());
    std::vector<double> y0 = net.forward(q.original_input);
    if (discussed.empty()) return 0;  // no perturbation allowed

    // default sweep range: propagated output box inflated by 10%
    IntervalBox guess(q.original_input, q.original_input);
    for (int j : discussed) {
        guess.lower[j] -= q.epsilon;
        guess.upper[j] += q.epsilon;
    }
    IntervalBox out = net.interval_propagate(guess);

    std::vector<double> per_coord(m, 0.0);
    bool any_flip = false;
    for (int c = 0; c < m; ++c) {
        double lo, hi;
        if (y_range) {
            lo = y_range->first;
            hi = y_range->second;
        } else {
            double width = std::max(out.upper[c] - out.lower[c], 10 * opts.precision);
            lo = out.lower[c] - 0.1 * width - 2 * opts.approx_eps;
            hi = out.upper[c] + 0.1 * width + 2 * opts.approx_eps;
        }
        // Reachability sweep: "y0 is never approximated inside the box" is
        // Proven outside the attainable output range and Falsified inside it,
        // so the flips bracket the range ends.
        std::ostringstream src;
        src << "y_eps = " << format_number(opts.approx_eps) << "\n";
        src << "\n@Pre\n";
        src << "x_size = " << n << "\n";
        src << "y_size = " << m << "\n";
        src << box_precondition(q.original_input, discussed, format_number(q.epsilon)) << "\n";
        src << "\n@Exp\n";
        src << "y[0][" << c << "] !~= y0\n";
        drlp::Template tmpl = parse_template(src.str());

        SearchSpec spec;
        spec.vars["y0"] = VarSpec{lo, hi, opts.precision, SearchMethod::Linear, 2.0};
        SearchReport rep = find_breakpoints(tmpl, spec, one_shot_verifier(net, opts.solve));
        if (!rep.aborted_slices.empty())
            throw UnknownVerdict("sensitivity sweep hit an Unknown verdict");
        for (const Breakpoint& bp : rep.breakpoints) {
            double mid = (bp.value_lo + bp.value_hi) / 2;
            per_coord[c] = std::max(per_coord[c], std::abs(mid - y0[c]));
            any_flip = true;
        }
    }
    if (!any_flip) throw NoBreakpoint("output is constant over the perturbation box");
    std::vector<double> zero(m, 0.0);
    return vector_distance(per_coord, zero, q.distance);
}

ImportanceAnswer importance(const Network& net, const PerturbationQuestion& q, double eps_out,
                            std::pair<double, double> eps_range, const InterpretOptions& opts) {
    const int n = net.input_dim();
    const int m = net.output_dim();
    if (static_cast<int>(q.original_input.size()) != n)
        throw DimensionError("original input length != network input dim");
    std::set<int> discussed(q.discussed.begin(), q.discussed.end());
    if (discussed.empty()) throw NeverChanges("no features under discussion");
    std::vector<double> y0 = net.forward(q.original_input);

    std::ostringstream src;
    src << "y_eps = " << format_number(eps_out) << "\n";
    src << "\n@Pre\n";
    src << "x_size = " << n << "\n";
    src << "y_size = " << m << "\n";
    src << box_precondition(q.original_input, discussed, "e0") << "\n";
    src << "\n@Exp\n";
    src << "y[0] ~= " << list_literal(y0) << "\n";
    drlp::Template tmpl = parse_template(src.str());

    SearchSpec spec;
    spec.vars["e0"] =
        VarSpec{eps_range.first, eps_range.second, opts.precision, SearchMethod::Binary, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, one_shot_verifier(net, opts.solve));
    if (!rep.aborted_slices.empty())
        throw UnknownVerdict("importance search hit an Unknown verdict");
    if (rep.breakpoints.empty())
        throw NeverChanges("no perturbation in range moves the output beyond the threshold");

    const Breakpoint& bp = rep.breakpoints.front();
    double eps_flip = (bp.value_lo + bp.value_hi) / 2;
    // distance d(x+eps, x) restricted to the discussed features
    std::vector<double> moved = q.original_input;
    for (int j : discussed) moved[j] += eps_flip;
    ImportanceAnswer ans;
    ans.min_perturbation = vector_distance(moved, q.original_input, q.distance);
    ans.score = ans.min_perturbation > 0 ? 1.0 / ans.min_perturbation : 0.0;
    return ans;
}

CounterfactualAnswer counterfactual(const Network& net, const std::vector<double>& original,
                                    const std::vector<double>& target, double tolerance,
                                    std::pair<double, double> eps_range,
                                    const InterpretOptions& opts) {
    const int n = net.input_dim();
    const int m = net.output_dim();
    if (static_cast<int>(original.size()) != n)
        throw DimensionError("original input length != network input dim");
    if (static_cast<int>(target.size()) != m)
        throw DimensionError("target output length != network output dim");
    std::vector<double> y0 = net.forward(original);
    double dev = 0;
    for (int c = 0; c < m; ++c) dev = std::max(dev, std::abs(y0[c] - target[c]));
    if (dev <= tolerance)
        throw SemanticError("target already approximated by the original output");

    std::ostringstream src;
    src << "y_eps = " << format_number(tolerance) << "\n";
    src << "\n@Pre\n";
    src << "x_size = " << n << "\n";
    src << "y_size = " << m << "\n";
    std::ostringstream lo, hi;
    lo << "[";
    hi << "[";
    for (int j = 0; j < n; ++j) {
        if (j) {
            lo << ", ";
            hi << ", ";
        }
        lo << format_number(original[j]) << " - e" << j;
        hi << format_number(original[j]) << " + e" << j;
    }
    lo << "]";
    hi << "]";
    src << lo.str() << " <= x[0] <= " << hi.str() << "\n";
    src << "\n@Exp\n";
    src << "y[0] !~= " << list_literal(target) << "\n";
    drlp::Template tmpl = parse_template(src.str());

    SearchSpec spec;
    for (int j = 0; j < n; ++j) {
        SearchMethod method = j + 1 == n ? SearchMethod::Binary : SearchMethod::Linear;
        spec.vars["e" + std::to_string(j)] =
            VarSpec{eps_range.first, eps_range.second, opts.precision, method, 2.0};
    }
    VerifyFn verify = one_shot_verifier(net, opts.solve);
    SearchReport rep = find_breakpoints(tmpl, spec, verify);
    if (rep.breakpoints.empty()) throw NoCounterfactual("no counterfactual in the given range");

    CounterfactualAnswer best;
    best.distance = std::numeric_limits<double>::infinity();
    for (const Breakpoint& bp : rep.breakpoints) {
        // the falsified end of the bracket carries the counterfactual witness
        double value = bp.to_status == Status::Falsified ? bp.value_hi : bp.value_lo;
        std::map<std::string, double> values = bp.slice;
        values[bp.variable] = value;
        std::vector<std::pair<std::string, double>> pairs(values.begin(), values.end());
        drlp::ParseResult r = drlp::concretize_all(tmpl, pairs);
        VerifyResult vr = verify(std::get<drlp::Script>(r));
        if (vr.status != Status::Falsified || !vr.witness) continue;
        const std::vector<double>& point = vr.witness->x[0];
        double d = vector_distance(point, original, DistanceFn::L2);
        if (d < best.distance) {
            best.distance = d;
            best.point = point;
        }
    }
    if (!best.point.size()) throw NoCounterfactual("breakpoints did not yield a witness");
    return best;
}

bool intuitiveness(const drlp::Template& tmpl, const std::string& var, const VarSpec& var_spec,
                   const VerifyFn& verify_fn) {
    if (var_spec.method != SearchMethod::Linear)
        throw EmptySpec("intuitiveness requires the linear method: monotonicity cannot be "
                        "certified by binary search");
    SearchSpec spec;
    spec.vars[var] = var_spec;
    SearchReport rep = find_breakpoints(tmpl, spec, verify_fn);
    if (!rep.aborted_slices.empty())
        throw UnknownVerdict("intuitiveness examination hit an Unknown verdict");
    return rep.breakpoints.size() <= 1;
}

DecisionBoundary decision_boundary(const drlp::Template& tmpl, const std::string& var_a,
                                   const VarSpec& spec_a, const std::string& var_b,
                                   const VarSpec& spec_b, const VerifyFn& verify_fn) {
    if (tmpl.free_parameters.size() != 2)
        throw EmptySpec("decision boundary needs a template with exactly two free parameters");
    DecisionBoundary out;
    out.var_a = var_a;
    out.var_b = var_b;

    auto verdict = [&](double a, double b) {
        drlp::ParseResult r = drlp::concretize_all(tmpl, {{var_a, a}, {var_b, b}});
        VerifyResult vr = verify_fn(std::get<drlp::Script>(r));
        if (vr.status == Status::Unknown) throw UnknownVerdict("boundary probe returned Unknown");
        return vr.status;
    };

    for (double a = spec_a.lower_bound; a <= spec_a.upper_bound + spec_a.precision * 0.5;
         a += spec_a.precision) {
        BoundarySlice slice;
        slice.a = a;
        slice.at_lower = verdict(a, spec_b.lower_bound);
        slice.at_upper = verdict(a, spec_b.upper_bound);
        if (slice.at_lower != slice.at_upper) {
            double lo = spec_b.lower_bound, hi = spec_b.upper_bound;
            Status lo_status = slice.at_lower;
            while (hi - lo > spec_b.precision) {
                double mid = (lo + hi) / 2;
                Status s = verdict(a, mid);
                if (s == lo_status) lo = mid;
                else hi = mid;
            }
            slice.flip = (lo + hi) / 2;
            out.points.push_back(BoundaryPoint{a, *slice.flip});
        }
        out.slices.push_back(slice);
    }
    return out;
}

}  // namespace reinverify
