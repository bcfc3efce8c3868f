#pragma once

#include <string>
#include <vector>

#include "reinverify/drlp/ast.hpp"

namespace reinverify::drlp {

/// Precondition split into state boundary (S), initial (I), transition (T)
/// and other (C) conjuncts, plus the post-condition quantifier. Every
/// top-level precondition conjunct lands in exactly one part.
struct PartitionedProperty {
    std::vector<Node> state_boundary;  // S: per-step constant bounds on x
    std::vector<Node> initial;         // I: constraints on x[0] only
    std::vector<Node> transition;      // T: links x[i], y[i], x[i+1]
    std::vector<Node> other;           // C: everything else
    bool exist_post = false;           // Exist when y-constraints sit under an
                                       // Or-loop over steps, else Forall
    std::vector<std::string> warnings;
};

PartitionedProperty classify_parts(const Script& script);

/// True when the post-condition is Exist-quantified over steps.
bool post_is_exist(const Script& script);

}  // namespace reinverify::drlp
