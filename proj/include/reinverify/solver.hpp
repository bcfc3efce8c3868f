#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reinverify/query.hpp"

namespace reinverify {

enum class Status { Proven, Falsified, Unknown };

const char* status_text(Status s);

struct Witness {
    std::vector<std::vector<double>> x;  // per step
    std::vector<std::vector<double>> y;  // network's true output per step
};

struct SolveStats {
    long nodes = 0;
    long lp_calls = 0;
    double wall_ms = 0;

    void merge(const SolveStats& o) {
        nodes += o.nodes;
        lp_calls += o.lp_calls;
        wall_ms += o.wall_ms;
    }
};

struct VerifyResult {
    Status status = Status::Unknown;
    int depth = 0;
    std::optional<Witness> witness;
    SolveStats stats;
};

struct SolveOptions {
    long node_budget = 1000000;
    double lp_tol = 1e-7;
    // Strict rows are relaxed to non-strict with this margin; it must exceed
    // lp_tol or boundary-tight properties flip to spurious counterexamples.
    double strict_margin = 1e-6;
    LowerOptions lower;
};

/// Complete decision for piecewise-linear networks: depth-first ReLU phase
/// branch-and-bound with LP feasibility at every node. Budget exhaustion
/// yields Unknown, never a wrong answer.
VerifyResult solve(const ConstraintQuery& query, const SolveOptions& opts = {});

/// Sound but incomplete: propagates precondition boxes through each step and
/// proves the property when the negated post cannot intersect the output
/// boxes. Never returns Falsified.
VerifyResult solve_interval(const ConstraintQuery& query, const SolveOptions& opts = {});

/// Bounded model checking: depth 1..k_max, first counterexample wins.
/// Tanh networks are routed through the interval solver.
VerifyResult bmc(const drlp::Script& script, const Network& net, int k_max,
                 const SolveOptions& opts = {});

/// Base case (bounded check) plus inductive step per depth; a proof is an
/// unbounded guarantee.
VerifyResult k_induction(const drlp::Script& script, const Network& net, int k_max,
                         const SolveOptions& opts = {});

}  // namespace reinverify
