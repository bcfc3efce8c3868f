#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "reinverify/drlp/classify.hpp"
#include "reinverify/errors.hpp"
#include "reinverify/query.hpp"

namespace reinverify {

namespace {

using drlp::Cmp;
using drlp::Comparison;
using drlp::Expr;
using drlp::Node;
using drlp::Script;
using drlp::Subscript;

// Affine form c + sum(coeff * var).
struct Affine {
    double c = 0;
    std::map<int, double> terms;

    Affine& operator+=(const Affine& o) {
        c += o.c;
        for (auto [v, w] : o.terms) terms[v] += w;
        return *this;
    }
    Affine& operator-=(const Affine& o) {
        c -= o.c;
        for (auto [v, w] : o.terms) terms[v] -= w;
        return *this;
    }
    void scale(double f) {
        c *= f;
        for (auto& [v, w] : terms) w *= f;
    }
    bool is_const() const { return terms.empty(); }
};

// Evaluated expression: one or more affine elements, list-shaped or scalar.
struct AffVal {
    std::vector<Affine> elems;
    bool is_list = false;
    bool has_io = false;
};

struct Lowerer {
    const Script* script;
    const UnrolledNetwork* unrolled = nullptr;  // id resolution
    const std::vector<std::vector<double>>* wit_x = nullptr;  // value resolution
    const std::vector<std::vector<double>>* wit_y = nullptr;
    std::map<std::string, int> symbolic;  // identifiers kept as LP variables

    int k_sym = 1;        // value of the symbol k inside expressions
    int num_steps = 1;    // valid step subscripts are [0, num_steps)
    int step_offset = 0;  // added to every step subscript
    std::optional<int> single_step;  // restricts step loops to one index

    LowerOptions opts;
    std::map<std::string, double> bindings;  // loop variables

    int n() const { return unrolled ? unrolled->input_dim()
                                    : static_cast<int>((*wit_x)[0].size()); }
    int m() const { return unrolled ? unrolled->output_dim()
                                    : static_cast<int>((*wit_y)[0].size()); }

    double const_scalar(const Expr& e, const char* what) {
        AffVal v = eval(e);
        if (v.elems.size() != 1 || !v.elems[0].is_const() || v.is_list)
            throw SemanticError(std::string("expected a constant scalar for ") + what);
        return v.elems[0].c;
    }

    int const_int(const Expr& e, const char* what) {
        double v = const_scalar(e, what);
        int i = static_cast<int>(std::llround(v));
        if (std::abs(v - i) > 1e-9)
            throw SemanticError(std::string("expected an integer for ") + what);
        return i;
    }

    Affine io_var(char io, int step, int feature) {
        int actual = step + step_offset;
        if (actual < 0 || actual >= num_steps)
            throw SemanticError(std::string(1, io) + " step subscript " + std::to_string(step) +
                                " out of range for depth " + std::to_string(num_steps));
        int dim = io == 'x' ? n() : m();
        if (feature < 0 || feature >= dim)
            throw SemanticError(std::string(1, io) + " feature subscript " +
                                std::to_string(feature) + " out of range for size " +
                                std::to_string(dim));
        Affine a;
        if (unrolled) {
            int id = io == 'x' ? unrolled->input_id(actual, feature)
                               : unrolled->output_id(actual, feature);
            a.terms[id] = 1.0;
        } else {
            a.c = io == 'x' ? (*wit_x)[actual][feature] : (*wit_y)[actual][feature];
        }
        return a;
    }

    std::vector<int> subscript_indices(const Subscript& s, int limit, const char* what) {
        if (!s.is_slice()) return {const_int(s.parts[0], what)};
        int lo = const_int(s.parts[0], what);
        int hi = const_int(s.parts[1], what);
        int step = s.parts.size() == 3 ? const_int(s.parts[2], what) : 1;
        if (step <= 0) throw SemanticError("slice step must be positive");
        if (lo < 0 || hi < lo || hi > limit)
            throw SemanticError(std::string("slice [") + std::to_string(lo) + ":" +
                                std::to_string(hi) + "] out of bounds for size " +
                                std::to_string(limit));
        std::vector<int> out;
        for (int i = lo; i < hi; i += step) out.push_back(i);
        return out;
    }

    AffVal eval_ioref(const Expr& e) {
        AffVal out;
        out.is_list = true;
        out.has_io = true;
        int dim = e.io == 'x' ? n() : m();
        std::vector<int> steps;
        if (e.subs.empty()) {
            for (int s = 0; s < num_steps - step_offset; ++s) steps.push_back(s);
        } else {
            steps = subscript_indices(e.subs[0], num_steps, "step subscript");
        }
        std::vector<int> feats;
        bool scalar_feat = false;
        if (e.subs.size() == 2) {
            feats = subscript_indices(e.subs[1], dim, "feature subscript");
            scalar_feat = !e.subs[1].is_slice();
        } else {
            for (int f = 0; f < dim; ++f) feats.push_back(f);
        }
        for (int s : steps)
            for (int f : feats) out.elems.push_back(io_var(e.io, s, f));
        if (steps.size() == 1 && scalar_feat && !e.subs.empty() && !e.subs[0].is_slice())
            out.is_list = false;  // x[i][j] is a scalar
        return out;
    }

    AffVal eval(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::Number: {
                AffVal v;
                v.elems.emplace_back();
                v.elems[0].c = e.number;
                return v;
            }
            case Expr::Kind::Ident: {
                AffVal v;
                if (auto it = symbolic.find(e.ident); it != symbolic.end()) {
                    Affine a;
                    a.terms[it->second] = 1.0;
                    v.elems.push_back(a);
                    return v;
                }
                if (auto it = bindings.find(e.ident); it != bindings.end()) {
                    v.elems.emplace_back();
                    v.elems[0].c = it->second;
                    return v;
                }
                if (e.ident == "k") {
                    v.elems.emplace_back();
                    v.elems[0].c = k_sym;
                    return v;
                }
                const drlp::Assign* a = script->find_var(e.ident);
                if (!a || a->iterable)
                    throw SemanticError("unbound identifier '" + e.ident +
                                        "' in a concrete script");
                v.is_list = a->value.is_list;
                for (double d : a->value.items) {
                    v.elems.emplace_back();
                    v.elems.back().c = d;
                }
                return v;
            }
            case Expr::Kind::Neg: {
                AffVal v = eval(e.elems[0]);
                for (Affine& a : v.elems) a.scale(-1);
                return v;
            }
            case Expr::Kind::List: {
                AffVal v;
                v.is_list = true;
                for (const Expr& el : e.elems) {
                    AffVal ev = eval(el);
                    v.has_io |= ev.has_io;
                    for (Affine& a : ev.elems) v.elems.push_back(std::move(a));
                }
                return v;
            }
            case Expr::Kind::IoRef: return eval_ioref(e);
            case Expr::Kind::Binary: {
                AffVal a = eval(e.elems[0]);
                AffVal b = eval(e.elems[1]);
                if (e.op == '+' || e.op == '-') return combine(a, b, e.op == '-');
                if (e.op == '*') return multiply(a, b);
                if (e.op == '/') {
                    if (b.elems.size() != 1 || !b.elems[0].is_const() || b.elems[0].c == 0)
                        throw SemanticError("division requires a non-zero constant divisor");
                    for (Affine& x : a.elems) x.scale(1.0 / b.elems[0].c);
                    return a;
                }
                throw SemanticError("unknown operator");
            }
        }
        throw SemanticError("unreachable expression kind");
    }

    static AffVal combine(const AffVal& a, const AffVal& b, bool minus) {
        std::size_t len = std::max(a.elems.size(), b.elems.size());
        if ((a.elems.size() != len && a.elems.size() != 1) ||
            (b.elems.size() != len && b.elems.size() != 1))
            throw SemanticError("vector length mismatch: " + std::to_string(a.elems.size()) +
                                " vs " + std::to_string(b.elems.size()));
        AffVal out;
        out.is_list = a.is_list || b.is_list;
        out.has_io = a.has_io || b.has_io;
        for (std::size_t i = 0; i < len; ++i) {
            Affine r = a.elems[a.elems.size() == 1 ? 0 : i];
            const Affine& o = b.elems[b.elems.size() == 1 ? 0 : i];
            if (minus) r -= o;
            else r += o;
            out.elems.push_back(std::move(r));
        }
        return out;
    }

    static bool all_const(const AffVal& v) {
        for (const Affine& a : v.elems)
            if (!a.is_const()) return false;
        return true;
    }

    static AffVal multiply(const AffVal& a, const AffVal& b) {
        // List repetition [v]*n; model references multiply as scaling instead.
        if ((a.is_list ^ b.is_list) && !a.has_io && !b.has_io) {
            const AffVal& lst = a.is_list ? a : b;
            const AffVal& cnt = a.is_list ? b : a;
            if (cnt.elems.size() != 1 || !cnt.elems[0].is_const())
                throw SemanticError("list repetition needs an integer count");
            double cv = cnt.elems[0].c;
            int reps = static_cast<int>(std::llround(cv));
            if (reps < 0 || std::abs(cv - reps) > 1e-9)
                throw SemanticError("list repetition count must be a non-negative integer");
            AffVal out;
            out.is_list = true;
            out.has_io = lst.has_io;
            for (int i = 0; i < reps; ++i)
                for (const Affine& x : lst.elems) out.elems.push_back(x);
            return out;
        }
        // Elementwise scaling by a constant scalar side.
        const AffVal* var_side = &a;
        const AffVal* const_side = &b;
        auto scalar_const = [](const AffVal& v) {
            return v.elems.size() == 1 && !v.is_list && v.elems[0].is_const() && !v.has_io;
        };
        if (!scalar_const(*const_side)) std::swap(var_side, const_side);
        if (!scalar_const(*const_side)) {
            if (all_const(a) && all_const(b))
                throw SemanticError("cannot multiply two lists");
            throw SemanticError(
                "non-affine expression: products of model variables are rejected");
        }
        AffVal out = *var_side;
        for (Affine& x : out.elems) x.scale(const_side->elems[0].c);
        return out;
    }

    double approx_eps() {
        const drlp::Assign* eps = script->find_var("y_eps");
        if (eps && !eps->iterable && !eps->value.is_list) return eps->value.scalar();
        return opts.default_approx_eps;
    }
};

// Intermediate logic tree of linear literals.
struct LTree {
    enum class K { Leaf, And, Or };
    K k = K::And;
    std::vector<LTree> kids;
    Lit lit;

    static LTree leaf(Lit l) {
        LTree t;
        t.k = K::Leaf;
        t.lit = std::move(l);
        return t;
    }
    static LTree make(K kind, std::vector<LTree> kids) {
        LTree t;
        t.k = kind;
        t.kids = std::move(kids);
        return t;
    }
};

Lit affine_le(const Affine& a, double rhs_shift, bool strict) {
    // a <= rhs_shift, moving the constant to the right-hand side
    Lit l;
    for (auto [v, w] : a.terms)
        if (w != 0) l.terms.emplace_back(v, w);
    l.rhs = rhs_shift - a.c;
    l.strict = strict;
    return l;
}

Lit negate_lit(const Lit& l) {
    // not(a <= r) is -a <= -r strictly; not(a < r) is -a <= -r
    Lit out;
    out.terms.reserve(l.terms.size());
    for (auto [v, w] : l.terms) out.terms.emplace_back(v, -w);
    out.rhs = -l.rhs;
    out.strict = !l.strict;
    return out;
}

class TreeLowerer {
  public:
    explicit TreeLowerer(Lowerer& ctx) : ctx_(ctx) {}

    LTree lower_comparison(const Comparison& c) {
        std::vector<LTree> parts;
        for (std::size_t i = 0; i < c.ops.size(); ++i) {
            AffVal lhs = ctx_.eval(c.operands[i]);
            AffVal rhs = ctx_.eval(c.operands[i + 1]);
            AffVal diff = Lowerer::combine(lhs, rhs, /*minus=*/true);
            parts.push_back(lower_pair(diff, c.ops[i]));
        }
        return parts.size() == 1 ? std::move(parts[0])
                                 : LTree::make(LTree::K::And, std::move(parts));
    }

    LTree lower_pair(const AffVal& diff, Cmp op) {
        std::vector<LTree> kids;
        switch (op) {
            case Cmp::LE:
            case Cmp::LT:
                for (const Affine& d : diff.elems)
                    kids.push_back(LTree::leaf(affine_le(d, 0, op == Cmp::LT)));
                break;
            case Cmp::GE:
            case Cmp::GT:
                for (const Affine& d : diff.elems) {
                    Affine neg = d;
                    neg.scale(-1);
                    kids.push_back(LTree::leaf(affine_le(neg, 0, op == Cmp::GT)));
                }
                break;
            case Cmp::EQ:
                for (const Affine& d : diff.elems) {
                    Affine neg = d;
                    neg.scale(-1);
                    kids.push_back(LTree::leaf(affine_le(d, 0, false)));
                    kids.push_back(LTree::leaf(affine_le(neg, 0, false)));
                }
                break;
            case Cmp::NE: {
                // |d| >= delta in at least one element
                double delta = ctx_.opts.disequality_gap;
                std::vector<LTree> cases;
                for (const Affine& d : diff.elems) {
                    Affine neg = d;
                    neg.scale(-1);
                    cases.push_back(LTree::leaf(affine_le(d, -delta, false)));
                    cases.push_back(LTree::leaf(affine_le(neg, -delta, false)));
                }
                return LTree::make(LTree::K::Or, std::move(cases));
            }
            case Cmp::Approx: {
                double eps = ctx_.approx_eps();
                for (const Affine& d : diff.elems) {
                    Affine neg = d;
                    neg.scale(-1);
                    kids.push_back(LTree::leaf(affine_le(d, eps, false)));
                    kids.push_back(LTree::leaf(affine_le(neg, eps, false)));
                }
                break;
            }
            case Cmp::NotApprox: {
                double eps = ctx_.approx_eps();
                std::vector<LTree> cases;
                for (const Affine& d : diff.elems) {
                    Affine neg = d;
                    neg.scale(-1);
                    cases.push_back(LTree::leaf(affine_le(d, -eps, false)));
                    cases.push_back(LTree::leaf(affine_le(neg, -eps, false)));
                }
                return LTree::make(LTree::K::Or, std::move(cases));
            }
        }
        return kids.size() == 1 ? std::move(kids[0]) : LTree::make(LTree::K::And, std::move(kids));
    }

    LTree lower_node(const Node& n) {
        switch (n.kind) {
            case Node::Kind::Compare: return lower_comparison(n.cmp);
            case Node::Kind::And:
            case Node::Kind::Or: {
                std::vector<LTree> kids;
                for (const Node& c : n.children) kids.push_back(lower_node(c));
                return LTree::make(n.kind == Node::Kind::And ? LTree::K::And : LTree::K::Or,
                                   std::move(kids));
            }
            case Node::Kind::Implies: {
                LTree a = lower_node(n.children[0]);
                LTree b = lower_node(n.children[1]);
                return LTree::make(LTree::K::Or, {negate_tree(a), std::move(b)});
            }
            case Node::Kind::ForLoop: return lower_loop(n);
        }
        throw SemanticError("unreachable node kind");
    }

    LTree lower_loop(const Node& n) {
        int lo = 0, hi = 0, step = 1;
        if (n.loop_range.size() == 1) {
            hi = ctx_.const_int(n.loop_range[0], "loop bound");
        } else {
            lo = ctx_.const_int(n.loop_range[0], "loop bound");
            hi = ctx_.const_int(n.loop_range[1], "loop bound");
            if (n.loop_range.size() == 3) step = ctx_.const_int(n.loop_range[2], "loop step");
        }
        if (step <= 0) throw SemanticError("loop step must be positive");

        std::vector<int> indices;
        if (ctx_.single_step && loop_ranges_over_k(n)) {
            indices.push_back(*ctx_.single_step);
        } else {
            for (int i = lo; i < hi; i += step) indices.push_back(i);
        }

        std::vector<LTree> iters;
        for (int i : indices) {
            auto saved = ctx_.bindings.find(n.loop_var);
            double old = 0;
            bool had = saved != ctx_.bindings.end();
            if (had) old = saved->second;
            ctx_.bindings[n.loop_var] = i;
            std::vector<LTree> body;
            for (const Node& c : n.children) body.push_back(lower_node(c));
            if (had) ctx_.bindings[n.loop_var] = old;
            else ctx_.bindings.erase(n.loop_var);
            iters.push_back(body.size() == 1 ? std::move(body[0])
                                             : LTree::make(LTree::K::And, std::move(body)));
        }
        return LTree::make(n.loop_or ? LTree::K::Or : LTree::K::And, std::move(iters));
    }

    static bool loop_ranges_over_k(const Node& n) {
        struct {
            bool found = false;
            void walk(const Expr& e) {
                if (e.kind == Expr::Kind::Ident && e.ident == "k") found = true;
                for (const Expr& el : e.elems) walk(el);
            }
        } w;
        for (const Expr& e : n.loop_range) w.walk(e);
        return w.found;
    }

    static LTree negate_tree(const LTree& t) {
        switch (t.k) {
            case LTree::K::Leaf: return LTree::leaf(negate_lit(t.lit));
            case LTree::K::And:
            case LTree::K::Or: {
                std::vector<LTree> kids;
                for (const LTree& c : t.kids) kids.push_back(negate_tree(c));
                return LTree::make(t.k == LTree::K::And ? LTree::K::Or : LTree::K::And,
                                   std::move(kids));
            }
        }
        throw SemanticError("unreachable");
    }

  private:
    Lowerer& ctx_;
};

struct Flattened {
    std::vector<Lit> conj;
    std::vector<OrGroup> groups;
};

constexpr std::size_t kDistributionCap = 65536;

void flatten_into(const LTree& t, Flattened& out);

// Expands a subtree into explicit disjunct cases, distributing any disjunctive
// structure nested below it.
std::vector<Conjunction> flatten_cases(const LTree& t) {
    Flattened f;
    flatten_into(t, f);
    std::vector<Conjunction> cases;
    cases.push_back(Conjunction{std::move(f.conj)});
    for (const OrGroup& g : f.groups) {
        if (cases.size() * std::max<std::size_t>(g.cases.size(), 1) > kDistributionCap)
            throw SemanticError("disjunction nesting too complex to expand");
        std::vector<Conjunction> next;
        for (const Conjunction& base : cases) {
            for (const Conjunction& extra : g.cases) {
                Conjunction merged = base;
                merged.lits.insert(merged.lits.end(), extra.lits.begin(), extra.lits.end());
                next.push_back(std::move(merged));
            }
        }
        cases = std::move(next);
    }
    return cases;
}

void flatten_into(const LTree& t, Flattened& out) {
    switch (t.k) {
        case LTree::K::Leaf: out.conj.push_back(t.lit); return;
        case LTree::K::And:
            for (const LTree& c : t.kids) flatten_into(c, out);
            return;
        case LTree::K::Or: {
            OrGroup g;
            for (const LTree& c : t.kids)
                for (Conjunction& cc : flatten_cases(c)) g.cases.push_back(std::move(cc));
            if (g.cases.size() == 1) {
                for (Lit& l : g.cases[0].lits) out.conj.push_back(std::move(l));
            } else {
                out.groups.push_back(std::move(g));
            }
            return;
        }
    }
}

}  // namespace

// --- public entry points ----------------------------------------------------

namespace {

struct LoweredPost {
    Conjunction conj;
    std::vector<OrGroup> groups;
};

void check_arity(const Script& script, const Network& net) {
    if (script.x_size != net.input_dim())
        throw ArityError("script x_size=" + std::to_string(script.x_size) +
                         " does not match network input dim " + std::to_string(net.input_dim()));
    if (script.y_size != net.output_dim())
        throw ArityError("script y_size=" + std::to_string(script.y_size) +
                         " does not match network output dim " + std::to_string(net.output_dim()));
}

Flattened lower_tree(Lowerer& ctx, const Node& root, bool negate) {
    TreeLowerer tl(ctx);
    LTree t = tl.lower_node(root);
    if (negate) t = TreeLowerer::negate_tree(t);
    Flattened f;
    flatten_into(t, f);
    return f;
}

}  // namespace

ConstraintQuery build_query(const Script& script, const Network& net, int k,
                            const LowerOptions& opts) {
    if (k < 1) throw ArityError("verification depth must be >= 1");
    check_arity(script, net);
    UnrolledNetwork unrolled(net, k);

    ConstraintQuery q;
    q.net = &net;
    q.depth = k;
    q.exist_post = drlp::post_is_exist(script);

    Lowerer ctx;
    ctx.script = &script;
    ctx.unrolled = &unrolled;
    ctx.k_sym = k;
    ctx.num_steps = k;
    ctx.opts = opts;

    Flattened pre = lower_tree(ctx, script.pre, false);
    q.linear.lits = std::move(pre.conj);
    q.or_groups = std::move(pre.groups);

    Flattened post = lower_tree(ctx, script.post, true);
    q.neg_linear.lits = std::move(post.conj);
    q.neg_groups = std::move(post.groups);
    return q;
}

ConstraintQuery build_inductive_query(const Script& script, const Network& net, int k,
                                      const LowerOptions& opts) {
    if (k < 1) throw ArityError("induction depth must be >= 1");
    check_arity(script, net);
    if (drlp::post_is_exist(script))
        throw NotInductible("k-induction applies to Forall post-conditions only");

    drlp::PartitionedProperty parts = drlp::classify_parts(script);
    UnrolledNetwork unrolled(net, k + 1);

    ConstraintQuery q;
    q.net = &net;
    q.depth = k + 1;

    // S, T, C over the (k+1)-step window; I dropped.
    Lowerer ctx;
    ctx.script = &script;
    ctx.unrolled = &unrolled;
    ctx.k_sym = k + 1;
    ctx.num_steps = k + 1;
    ctx.opts = opts;
    auto add_part = [&](const std::vector<Node>& nodes) {
        for (const Node& n : nodes) {
            Flattened f = lower_tree(ctx, n, false);
            for (Lit& l : f.conj) q.linear.lits.push_back(std::move(l));
            for (OrGroup& g : f.groups) q.or_groups.push_back(std::move(g));
        }
    };
    add_part(parts.state_boundary);
    add_part(parts.transition);
    add_part(parts.other);

    // Detect whether the post iterates over steps via loops referencing k.
    bool loop_form = false;
    {
        struct {
            bool found = false;
            void walk(const Node& n) {
                if (n.kind == Node::Kind::ForLoop && TreeLowerer::loop_ranges_over_k(n))
                    found = true;
                for (const Node& c : n.children) walk(c);
            }
        } w;
        w.walk(script.post);
        loop_form = w.found;
    }

    if (loop_form) {
        // Post assumed at steps 0..k-1: lower with the k symbol bound to k.
        Lowerer actx = ctx;
        actx.k_sym = k;
        Flattened assumed = lower_tree(actx, script.post, false);
        for (Lit& l : assumed.conj) q.linear.lits.push_back(std::move(l));
        for (OrGroup& g : assumed.groups) q.or_groups.push_back(std::move(g));

        // Negated post at step k only.
        Lowerer nctx = ctx;
        nctx.single_step = k;
        Flattened neg = lower_tree(nctx, script.post, true);
        q.neg_linear.lits = std::move(neg.conj);
        q.neg_groups = std::move(neg.groups);
    } else {
        // Flat post: instantiate at each window offset. Bare x/y references
        // have no single step to shift, so they cannot be made inductive.
        struct {
            bool found = false;
            void expr(const Expr& e) {
                if (e.kind == Expr::Kind::IoRef && e.subs.empty()) found = true;
                for (const Expr& el : e.elems) expr(el);
                for (const drlp::Subscript& s : e.subs)
                    for (const Expr& p : s.parts) expr(p);
            }
            void node(const Node& n) {
                if (n.kind == Node::Kind::Compare)
                    for (const Expr& e : n.cmp.operands) expr(e);
                for (const Node& c : n.children) node(c);
            }
        } bare;
        bare.node(script.post);
        if (bare.found)
            throw NotInductible("post with bare x/y references cannot be shifted per step");
        for (int t = 0; t < k; ++t) {
            Lowerer actx = ctx;
            actx.step_offset = t;
            Flattened assumed = lower_tree(actx, script.post, false);
            for (Lit& l : assumed.conj) q.linear.lits.push_back(std::move(l));
            for (OrGroup& g : assumed.groups) q.or_groups.push_back(std::move(g));
        }
        Lowerer nctx = ctx;
        nctx.step_offset = k;
        Flattened neg = lower_tree(nctx, script.post, true);
        q.neg_linear.lits = std::move(neg.conj);
        q.neg_groups = std::move(neg.groups);
    }
    return q;
}

std::vector<double> witness_var_boundaries(const Script& slice_script, const std::string& var,
                                           const std::vector<std::vector<double>>& witness_x,
                                           const std::vector<std::vector<double>>& witness_y,
                                           const LowerOptions& opts) {
    if (witness_x.empty()) return {};
    Lowerer ctx;
    ctx.script = &slice_script;
    ctx.wit_x = &witness_x;
    ctx.wit_y = &witness_y;
    ctx.symbolic[var] = 0;
    ctx.k_sym = static_cast<int>(witness_x.size());
    ctx.num_steps = static_cast<int>(witness_x.size());
    ctx.opts = opts;

    std::vector<double> out;
    auto collect = [&](const Node& root) {
        TreeLowerer tl(ctx);
        LTree t = tl.lower_node(root);
        // walk leaves for rows involving the symbolic variable
        struct {
            std::vector<double>* out;
            void walk(const LTree& t) {
                if (t.k == LTree::K::Leaf) {
                    for (auto [v, w] : t.lit.terms) {
                        if (v == 0 && w != 0) out->push_back(t.lit.rhs / w);
                    }
                    return;
                }
                for (const LTree& c : t.kids) walk(c);
            }
        } w{&out};
        w.walk(t);
    };
    collect(slice_script.pre);
    collect(slice_script.post);
    return out;
}

}  // namespace reinverify
