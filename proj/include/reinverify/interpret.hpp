#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reinverify/breakpoints.hpp"
#include "reinverify/network.hpp"
#include "reinverify/solver.hpp"

namespace reinverify {

enum class DistanceFn { L1, L2, Linf };

DistanceFn distance_fn_from_string(const std::string& s);
double vector_distance(const std::vector<double>& a, const std::vector<double>& b, DistanceFn fn);

/// Which features move, how far they may move, and how distances are scored.
struct PerturbationQuestion {
    std::vector<double> original_input;
    std::vector<int> discussed;          // feature indices allowed to move
    double epsilon = 0.1;                // perturbation radius (sensitivity)
    DistanceFn distance = DistanceFn::L2;
};

struct InterpretOptions {
    double precision = 0.01;
    double approx_eps = 1e-3;  // tolerance backing the ~= comparisons
    SolveOptions solve;
};

/// Largest output deviation reachable inside the perturbation box, measured
/// by sweeping the asserted output level and reading the flip farthest from
/// the original output. Throws NoBreakpoint when the output never moves.
double sensitivity(const Network& net, const PerturbationQuestion& q,
                   std::optional<std::pair<double, double>> y_range,
                   const InterpretOptions& opts);

struct ImportanceAnswer {
    double min_perturbation = 0;  // distance d(x+eps, x) at the first flip
    double score = 0;             // reciprocal of the distance
};

/// Smallest perturbation of the discussed features that moves the output by
/// at least eps_out. Throws NeverChanges when no radius in range flips.
ImportanceAnswer importance(const Network& net, const PerturbationQuestion& q, double eps_out,
                            std::pair<double, double> eps_range, const InterpretOptions& opts);

struct CounterfactualAnswer {
    std::vector<double> point;
    double distance = 0;
};

/// Closest input whose output approximates the target, located by stepping
/// per-feature perturbation radii and extracting the falsifying witness.
CounterfactualAnswer counterfactual(const Network& net, const std::vector<double>& original,
                                    const std::vector<double>& target, double tolerance,
                                    std::pair<double, double> eps_range,
                                    const InterpretOptions& opts);

/// Passes when linear stepping finds at most one verdict flip.
bool intuitiveness(const drlp::Template& tmpl, const std::string& var, const VarSpec& var_spec,
                   const VerifyFn& verify_fn);

struct BoundaryPoint {
    double a = 0, b = 0;
};

struct BoundarySlice {
    double a = 0;
    Status at_lower = Status::Unknown;
    Status at_upper = Status::Unknown;
    std::optional<double> flip;  // b-value of the breakpoint, if any
};

struct DecisionBoundary {
    std::string var_a, var_b;
    std::vector<BoundaryPoint> points;
    std::vector<BoundarySlice> slices;
};

/// Two-parameter boundary: the outer variable is stepped linearly, the inner
/// one bisected; slice endpoint verdicts label the hold/not-hold regions.
DecisionBoundary decision_boundary(const drlp::Template& tmpl, const std::string& var_a,
                                   const VarSpec& spec_a, const std::string& var_b,
                                   const VarSpec& spec_b, const VerifyFn& verify_fn);

}  // namespace reinverify
