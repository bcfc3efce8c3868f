#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reinverify/drlp/ast.hpp"
#include "reinverify/network.hpp"

namespace reinverify {

/// One linear inequality sum(coeff * var) <= rhs over flat variable ids of
/// an unrolled network. Strict rows are relaxed with a small margin when
/// handed to the LP.
struct Lit {
    std::vector<std::pair<int, double>> terms;
    double rhs = 0;
    bool strict = false;
};

struct Conjunction {
    std::vector<Lit> lits;
};

/// One disjunctive constraint: at least one case (a conjunction) must hold.
struct OrGroup {
    std::vector<Conjunction> cases;
};

/// Verification is a search for a counterexample satisfying P and not Q; the
/// post-condition is stored already negated.
struct ConstraintQuery {
    const Network* net = nullptr;
    int depth = 0;
    Conjunction linear;              // conjunctive part of P
    std::vector<OrGroup> or_groups;  // disjunctive parts of P
    Conjunction neg_linear;          // conjunctive part of the negated post
    std::vector<OrGroup> neg_groups; // disjunctive parts of the negated post
    bool exist_post = false;

    int num_vars() const { return depth * (net->input_dim() + net->output_dim()); }
};

struct LowerOptions {
    double disequality_gap = 1e-6;  // delta used when desugaring !=
    double default_approx_eps = 1e-3;
};

ConstraintQuery build_query(const drlp::Script& script, const Network& net, int k,
                            const LowerOptions& opts = {});

/// Inductive-step query: S, T and C over a (k+1)-step window, the initial
/// condition dropped, the post assumed at the first k steps and negated at
/// step k.
ConstraintQuery build_inductive_query(const drlp::Script& script, const Network& net, int k,
                                      const LowerOptions& opts = {});

/// Boundary values of the search variable implied by a counterexample:
/// every comparison mentioning `var` is evaluated at the witness and solved
/// for `var`. Used by breakpoint search to tighten brackets.
std::vector<double> witness_var_boundaries(const drlp::Script& slice_script,
                                           const std::string& var,
                                           const std::vector<std::vector<double>>& witness_x,
                                           const std::vector<std::vector<double>>& witness_y,
                                           const LowerOptions& opts = {});

}  // namespace reinverify
