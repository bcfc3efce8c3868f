#pragma once

#include <string>
#include <variant>
#include <vector>

namespace reinverify::drlp {

struct Expr;

/// One bracketed subscript: [a], [a:b] or [a:b:c].
struct Subscript {
    std::vector<Expr> parts;  // 1..3 expressions
    bool is_slice() const { return parts.size() > 1; }
    bool operator==(const Subscript&) const;
};

/// Expression over literals, bound identifiers and x/y references. Kept
/// affine by construction: * and / are only accepted with a constant side.
struct Expr {
    enum class Kind { Number, Ident, IoRef, List, Binary, Neg };

    Kind kind = Kind::Number;
    double number = 0;
    std::string ident;             // Ident
    char io = 0;                   // IoRef: 'x' or 'y'
    std::vector<Subscript> subs;   // IoRef: 0..2 subscripts
    std::vector<Expr> elems;       // List elements; Binary: {lhs, rhs}; Neg: {operand}
    char op = 0;                   // Binary: '+', '-', '*', '/'

    bool operator==(const Expr&) const;

    static Expr make_number(double v);
    static Expr make_ident(std::string name);
};

inline bool Subscript::operator==(const Subscript& o) const { return parts == o.parts; }
inline bool Expr::operator==(const Expr& o) const {
    return kind == o.kind && number == o.number && ident == o.ident && io == o.io &&
           subs == o.subs && elems == o.elems && op == o.op;
}
inline Expr Expr::make_number(double v) {
    Expr e;
    e.kind = Kind::Number;
    e.number = v;
    return e;
}
inline Expr Expr::make_ident(std::string name) {
    Expr e;
    e.kind = Kind::Ident;
    e.ident = std::move(name);
    return e;
}

enum class Cmp { LE, LT, EQ, GE, GT, NE, Approx, NotApprox };

const char* cmp_text(Cmp op);

/// Comparison chain: operand (op operand)+, e.g. [-1]*2 <= x[i] <= [1]*2.
struct Comparison {
    std::vector<Expr> operands;
    std::vector<Cmp> ops;
    bool operator==(const Comparison&) const = default;
};

/// Constraint tree node. A ForLoop keeps its range symbolic so that bounds
/// referencing the verification depth k expand only once k is known.
struct Node {
    enum class Kind { And, Or, Compare, ForLoop, Implies };

    Kind kind = Kind::And;
    std::vector<Node> children;    // And/Or members, Implies {lhs, rhs}, loop body
    Comparison cmp;                // Compare
    bool loop_or = false;          // ForLoop: orange?
    std::string loop_var;          // ForLoop (empty for `with` blocks)
    std::vector<Expr> loop_range;  // ForLoop: 1..3 range arguments as written

    bool operator==(const Node&) const = default;

    static Node compare(Comparison c) {
        Node n;
        n.kind = Kind::Compare;
        n.cmp = std::move(c);
        return n;
    }
};

/// Scalar or list value from the variables segment.
struct Value {
    std::vector<double> items;
    bool is_list = false;

    Value() = default;
    explicit Value(double v) : items{v} {}

    double scalar() const;
    bool operator==(const Value&) const = default;
};

struct Assign {
    std::string name;       // stripped name; the '_' prefix is recorded below
    bool iterable = false;  // declared with the '_' prefix
    Value value;
    bool operator==(const Assign&) const = default;
};

/// A concrete property script: variables segment plus pre/post constraint
/// trees. Immutable after parsing; safe to share across threads.
struct Script {
    std::vector<Assign> variables;
    Node pre;   // Kind::And root, children are the segment's statements
    Node post;  // likewise
    int x_size = 0;
    int y_size = 0;
    bool x_size_declared = false;
    bool y_size_declared = false;

    const Assign* find_var(const std::string& name) const;
    bool operator==(const Script&) const = default;
};

/// A script with unresolved parameters: iterable variables and identifiers
/// referenced in the conditions but never assigned.
struct Template {
    Script script;
    std::vector<std::string> free_parameters;  // declaration / first-use order
    bool operator==(const Template&) const = default;
};

using ParseResult = std::variant<Script, Template>;

}  // namespace reinverify::drlp
