#include "reinverify/drlp/classify.hpp"

#include <optional>
#include <set>

#include "reinverify/errors.hpp"

namespace reinverify::drlp {

namespace {

// What a conjunct touches, with step subscripts resolved to either constants
// or offsets from an enclosing loop variable.
struct Refs {
    bool x = false, y = false;
    std::set<int> const_steps_x, const_steps_y;
    std::set<int> loop_offsets_x, loop_offsets_y;
    std::set<std::string> loop_vars_used;
    bool other_step_form = false;  // step subscript not const and not var+const
    bool has_or = false;
    bool has_neq = false;
    bool nonliteral_bound = false;  // identifier in a bound position
};

std::optional<double> const_value(const Expr& e, const Script& script) {
    switch (e.kind) {
        case Expr::Kind::Number: return e.number;
        case Expr::Kind::Neg: {
            auto v = const_value(e.elems[0], script);
            return v ? std::optional<double>(-*v) : std::nullopt;
        }
        case Expr::Kind::Ident: {
            const Assign* a = script.find_var(e.ident);
            if (a && !a->iterable && !a->value.is_list) return a->value.scalar();
            return std::nullopt;
        }
        default: return std::nullopt;
    }
}

// step subscript shape: constant | loopvar + offset | other
void scan_step_expr(const Expr& e, char io, const Script& script,
                    const std::set<std::string>& loop_vars, Refs& r) {
    auto record_const = [&](double v) {
        (io == 'x' ? r.const_steps_x : r.const_steps_y).insert(static_cast<int>(v));
    };
    auto record_loop = [&](const std::string& var, int off) {
        (io == 'x' ? r.loop_offsets_x : r.loop_offsets_y).insert(off);
        r.loop_vars_used.insert(var);
    };
    if (auto v = const_value(e, script)) return record_const(*v);
    if (e.kind == Expr::Kind::Ident && loop_vars.count(e.ident)) return record_loop(e.ident, 0);
    if (e.kind == Expr::Kind::Binary && (e.op == '+' || e.op == '-')) {
        const Expr& a = e.elems[0];
        const Expr& b = e.elems[1];
        auto cb = const_value(b, script);
        if (a.kind == Expr::Kind::Ident && loop_vars.count(a.ident) && cb)
            return record_loop(a.ident, e.op == '+' ? static_cast<int>(*cb)
                                                    : -static_cast<int>(*cb));
        auto ca = const_value(a, script);
        if (e.op == '+' && b.kind == Expr::Kind::Ident && loop_vars.count(b.ident) && ca)
            return record_loop(b.ident, static_cast<int>(*ca));
    }
    r.other_step_form = true;
}

void scan_expr(const Expr& e, const Script& script, const std::set<std::string>& loop_vars,
               Refs& r) {
    if (e.kind == Expr::Kind::IoRef) {
        (e.io == 'x' ? r.x : r.y) = true;
        if (!e.subs.empty()) {
            for (const Expr& p : e.subs[0].parts) scan_step_expr(p, e.io, script, loop_vars, r);
        } else {
            r.other_step_form = true;  // bare x/y spans all steps
        }
        return;
    }
    if (e.kind == Expr::Kind::Ident) {
        const Assign* a = script.find_var(e.ident);
        if (!a || a->iterable) r.nonliteral_bound = true;
        return;
    }
    for (const Expr& el : e.elems) scan_expr(el, script, loop_vars, r);
}

// True when the loop plausibly ranges over steps: a bound references k.
bool range_references_k(const Node& loop) {
    struct {
        bool found = false;
        void walk(const Expr& e) {
            if (e.kind == Expr::Kind::Ident && e.ident == "k") found = true;
            for (const Expr& el : e.elems) walk(el);
            for (const Subscript& s : e.subs)
                for (const Expr& p : s.parts) walk(p);
        }
    } w;
    for (const Expr& e : loop.loop_range) w.walk(e);
    return w.found;
}

void scan_node(const Node& n, const Script& script, std::set<std::string>& loop_vars, Refs& r,
               bool* saw_step_loop) {
    switch (n.kind) {
        case Node::Kind::Compare:
            for (const Expr& e : n.cmp.operands) scan_expr(e, script, loop_vars, r);
            for (Cmp op : n.cmp.ops)
                if (op == Cmp::NE || op == Cmp::NotApprox) r.has_neq = true;
            return;
        case Node::Kind::Or:
            r.has_or = true;
            break;
        case Node::Kind::ForLoop: {
            if (n.loop_or) r.has_or = true;
            if (range_references_k(n) && saw_step_loop) *saw_step_loop = true;
            bool fresh = loop_vars.insert(n.loop_var).second;
            for (const Node& c : n.children) scan_node(c, script, loop_vars, r, saw_step_loop);
            if (fresh) loop_vars.erase(n.loop_var);
            return;
        }
        default: break;
    }
    for (const Node& c : n.children) scan_node(c, script, loop_vars, r, saw_step_loop);
}

enum class Part { S, I, T, C };

Part classify_conjunct(const Node& n, const Script& script, bool* ambiguous) {
    Refs r;
    bool step_loop = false;
    std::set<std::string> loop_vars;
    scan_node(n, script, loop_vars, r, &step_loop);
    *ambiguous = false;

    const bool x_only = r.x && !r.y;
    const bool x_const0 = r.const_steps_x == std::set<int>{0};

    // I: only x at step 0
    if (x_only && x_const0 && r.loop_offsets_x.empty() && !r.other_step_form) return Part::I;

    // S: per-step bounds over a step loop with literal bounds
    if (x_only && step_loop && r.const_steps_x.empty() && !r.other_step_form &&
        r.loop_offsets_x == std::set<int>{0} && r.loop_vars_used.size() == 1 && !r.has_or &&
        !r.has_neq && !r.nonliteral_bound)
        return Part::S;

    // T: adjacent-step link x[i] -> x[i+1], possibly through y[i]
    auto adjacent = [](const std::set<int>& s) {
        for (int v : s)
            if (s.count(v + 1)) return true;
        return false;
    };
    bool links_x = adjacent(r.loop_offsets_x) || adjacent(r.const_steps_x);
    bool y_to_next_x = r.y && !r.loop_offsets_x.empty() &&
                       *r.loop_offsets_x.rbegin() ==
                           (r.loop_offsets_y.empty() ? 0 : *r.loop_offsets_y.begin()) + 1;
    if (r.x && (links_x || y_to_next_x) && r.loop_vars_used.size() <= 1 && !r.other_step_form)
        return Part::T;

    // Mixing an initial-state reference with per-step references is the
    // ambiguous shape worth reporting.
    if (x_only && !r.const_steps_x.empty() && !r.loop_offsets_x.empty()) *ambiguous = true;
    return Part::C;
}

bool node_is_exist_loop(const Node& n) {
    if (n.kind == Node::Kind::ForLoop && n.loop_or && range_references_k(n)) return true;
    for (const Node& c : n.children)
        if (node_is_exist_loop(c)) return true;
    return false;
}

}  // namespace

bool post_is_exist(const Script& script) { return node_is_exist_loop(script.post); }

PartitionedProperty classify_parts(const Script& script) {
    PartitionedProperty out;
    for (const Node& conjunct : script.pre.children) {
        bool ambiguous = false;
        switch (classify_conjunct(conjunct, script, &ambiguous)) {
            case Part::S: out.state_boundary.push_back(conjunct); break;
            case Part::I: out.initial.push_back(conjunct); break;
            case Part::T: out.transition.push_back(conjunct); break;
            case Part::C:
                if (ambiguous)
                    out.warnings.push_back(
                        "conjunct mixes initial-state and per-step references; placed in C");
                out.other.push_back(conjunct);
                break;
        }
    }
    out.exist_post = post_is_exist(script);
    return out;
}

}  // namespace reinverify::drlp
