#include "reinverify/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "reinverify/drlp/classify.hpp"
#include "reinverify/errors.hpp"
#include "reinverify/simplex.hpp"

namespace reinverify {

const char* status_text(Status s) {
    switch (s) {
        case Status::Proven: return "Proven";
        case Status::Falsified: return "Falsified";
        case Status::Unknown: return "Unknown";
    }
    return "Unknown";
}

namespace {

constexpr double kBig = 1e30;

struct BudgetExceeded {};

// One hidden-layer neuron of one unrolled step.
struct NeuronRef {
    int step;
    int layer;   // hidden layer index
    int neuron;  // row within the layer
    int z_var;   // pre-activation LP variable
    int a_var;   // post-activation LP variable
    bool relu;   // identity hidden neurons never branch
};

enum Phase : int8_t { kUndecided = 0, kActive = 1, kInactive = 2 };

class BnbSolver {
  public:
    BnbSolver(const ConstraintQuery& q, const SolveOptions& opts) : q_(q), opts_(opts) {
        const Network& net = *q.net;
        if (net.has_tanh())
            throw NonPiecewiseLinear("complete search requires piecewise-linear activations");
        n_ = net.input_dim();
        m_ = net.output_dim();
        interface_vars_ = q.depth * (n_ + m_);
        int next = interface_vars_;
        int hidden_layers = static_cast<int>(net.layers().size()) - 1;
        for (int s = 0; s < q.depth; ++s) {
            for (int li = 0; li < hidden_layers; ++li) {
                const Layer& l = net.layers()[li];
                for (int r = 0; r < static_cast<int>(l.rows()); ++r) {
                    NeuronRef ref;
                    ref.step = s;
                    ref.layer = li;
                    ref.neuron = r;
                    ref.z_var = next++;
                    ref.a_var = next++;
                    ref.relu = l.activation == Activation::Relu;
                    neurons_.push_back(ref);
                }
            }
        }
        total_vars_ = next;

        groups_ = q.or_groups;
        neg_group_start_ = groups_.size();
        for (const OrGroup& g : q.neg_groups) groups_.push_back(g);
        base_lits_ = q.linear.lits;
        neg_lit_start_ = base_lits_.size();
        for (const Lit& l : q.neg_linear.lits) base_lits_.push_back(l);
    }

    VerifyResult run() {
        auto t0 = std::chrono::steady_clock::now();
        VerifyResult res;
        res.depth = q_.depth;
        for (const OrGroup& g : groups_) {
            if (g.cases.empty()) {  // empty disjunction is unsatisfiable
                res.status = Status::Proven;
                res.stats = stats_;
                return res;
            }
        }
        chosen_.assign(groups_.size(), -1);
        phases_.assign(neurons_.size(), kUndecided);
        bool falsified = false;
        try {
            falsified = dfs(0);
        } catch (const BudgetExceeded&) {
            res.status = Status::Unknown;
            res.stats = stats_;
            res.stats.wall_ms = elapsed_ms(t0);
            return res;
        }
        res.status = falsified ? Status::Falsified : Status::Proven;
        if (falsified) res.witness = std::move(witness_);
        res.stats = stats_;
        res.stats.wall_ms = elapsed_ms(t0);
        return res;
    }

  private:
    static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }

    // Interval pass under current phase fixings. Returns false on conflict.
    bool propagate_bounds(std::vector<double>& z_lo, std::vector<double>& z_hi) {
        const Network& net = *q_.net;
        int hidden_layers = static_cast<int>(net.layers().size()) - 1;

        // per-variable bounds from unary rows of the active constraint set
        std::vector<double> var_lo(interface_vars_, -kBig), var_hi(interface_vars_, kBig);
        auto absorb = [&](const Lit& l) {
            if (l.terms.size() != 1) return;
            auto [v, w] = l.terms[0];
            if (v >= interface_vars_ || w == 0) return;
            double bound = l.rhs / w;
            if (w > 0) var_hi[v] = std::min(var_hi[v], bound);
            else var_lo[v] = std::max(var_lo[v], bound);
        };
        for (const Lit& l : base_lits_) absorb(l);
        for (std::size_t gi = 0; gi < groups_.size(); ++gi)
            if (chosen_[gi] >= 0)
                for (const Lit& l : groups_[gi].cases[chosen_[gi]].lits) absorb(l);

        std::size_t ni = 0;
        for (int s = 0; s < q_.depth; ++s) {
            int base = s * (n_ + m_);
            std::vector<double> in_lo(n_), in_hi(n_);
            for (int j = 0; j < n_; ++j) {
                in_lo[j] = var_lo[base + j];
                in_hi[j] = var_hi[base + j];
                if (in_lo[j] > in_hi[j] + 1e-12) return false;  // empty input box
            }
            for (int li = 0; li <= hidden_layers; ++li) {
                const Layer& l = net.layers()[li];
                std::vector<double> out_lo(l.rows()), out_hi(l.rows());
                for (std::size_t r = 0; r < l.rows(); ++r) {
                    double a = l.bias[r], b = l.bias[r];
                    for (std::size_t c = 0; c < l.cols(); ++c) {
                        double w = l.weights[r][c];
                        double wl = w >= 0 ? in_lo[c] : in_hi[c];
                        double wh = w >= 0 ? in_hi[c] : in_lo[c];
                        a += w * wl;
                        b += w * wh;
                        if (a < -kBig) a = -kBig;
                        if (b > kBig) b = kBig;
                    }
                    if (li < hidden_layers) {
                        z_lo[ni] = a;
                        z_hi[ni] = b;
                        const NeuronRef& ref = neurons_[ni];
                        Phase ph = static_cast<Phase>(phases_[ni]);
                        if (ref.relu) {
                            if (ph == kActive) {
                                if (b < -opts_.lp_tol) return false;
                                a = std::max(a, 0.0);
                                b = std::max(b, 0.0);
                            } else if (ph == kInactive) {
                                if (a > opts_.lp_tol) return false;
                                a = 0.0;
                                b = 0.0;
                            } else {
                                a = std::max(a, 0.0);
                                b = std::max(b, 0.0);
                            }
                        }
                        ++ni;
                    }
                    out_lo[r] = a;
                    out_hi[r] = b;
                }
                in_lo = std::move(out_lo);
                in_hi = std::move(out_hi);
            }
            // final layer output vs. unary bounds on y: conflict check only
            for (int j = 0; j < m_; ++j) {
                if (in_lo[j] > var_hi[base + n_ + j] + 1e-9) return false;
                if (in_hi[j] < var_lo[base + n_ + j] - 1e-9) return false;
            }
        }
        return true;
    }

    // Effective phase after interval stabilization.
    Phase effective_phase(std::size_t ni, const std::vector<double>& z_lo,
                          const std::vector<double>& z_hi) const {
        if (!neurons_[ni].relu) return kActive;  // identity: a == z
        if (phases_[ni] != kUndecided) return static_cast<Phase>(phases_[ni]);
        if (z_lo[ni] >= 0) return kActive;
        if (z_hi[ni] <= 0) return kInactive;
        return kUndecided;
    }

    std::optional<std::vector<double>> run_lp(const std::vector<double>& z_lo,
                                              const std::vector<double>& z_hi) {
        SimplexFeasibility lp(total_vars_, opts_.lp_tol);
        // Strict rows relax by side: precondition rows widen (strictness
        // dropped, keeping proofs sound), negated-post rows shrink by the
        // margin (keeping counterexamples genuine violations).
        auto add_lit = [&](const Lit& l, bool neg_side) {
            LinearRow row;
            for (auto [v, w] : l.terms) row.add_term(v, w);
            row.rhs = l.strict && neg_side ? l.rhs - opts_.strict_margin : l.rhs;
            lp.add_row(row);
        };
        for (std::size_t i = 0; i < base_lits_.size(); ++i)
            add_lit(base_lits_[i], i >= neg_lit_start_);
        for (std::size_t gi = 0; gi < groups_.size(); ++gi)
            if (chosen_[gi] >= 0)
                for (const Lit& l : groups_[gi].cases[chosen_[gi]].lits)
                    add_lit(l, gi >= neg_group_start_);

        // network structure: z = W * in + b per hidden layer, y rows last
        const Network& net = *q_.net;
        int hidden_layers = static_cast<int>(net.layers().size()) - 1;
        std::size_t ni_base = 0;
        for (int s = 0; s < q_.depth; ++s) {
            int base = s * (n_ + m_);
            std::vector<int> in_vars(n_);
            for (int j = 0; j < n_; ++j) in_vars[j] = base + j;
            std::size_t ni = ni_base;
            for (int li = 0; li <= hidden_layers; ++li) {
                const Layer& l = net.layers()[li];
                std::vector<int> out_vars;
                for (std::size_t r = 0; r < l.rows(); ++r) {
                    std::vector<std::pair<int, double>> terms;
                    int lhs_var;
                    if (li < hidden_layers) {
                        lhs_var = neurons_[ni + r].z_var;
                        out_vars.push_back(neurons_[ni + r].a_var);
                    } else {
                        lhs_var = base + n_ + static_cast<int>(r);
                    }
                    terms.emplace_back(lhs_var, 1.0);
                    for (std::size_t c = 0; c < l.cols(); ++c)
                        if (l.weights[r][c] != 0) terms.emplace_back(in_vars[c], -l.weights[r][c]);
                    lp.add_equal(terms, l.bias[r]);
                }
                if (li < hidden_layers) {
                    for (std::size_t r = 0; r < l.rows(); ++r) {
                        std::size_t idx = ni + r;
                        const NeuronRef& ref = neurons_[idx];
                        switch (effective_phase(idx, z_lo, z_hi)) {
                            case kActive:
                                lp.add_equal({{ref.a_var, 1.0}, {ref.z_var, -1.0}}, 0.0);
                                if (ref.relu) lp.add_greater_equal({{ref.z_var, 1.0}}, 0.0);
                                break;
                            case kInactive:
                                lp.add_equal({{ref.a_var, 1.0}}, 0.0);
                                lp.add_less_equal({{ref.z_var, 1.0}}, 0.0);
                                break;
                            case kUndecided: {
                                lp.add_greater_equal({{ref.a_var, 1.0}}, 0.0);
                                lp.add_greater_equal({{ref.a_var, 1.0}, {ref.z_var, -1.0}}, 0.0);
                                double lo = z_lo[idx], hi = z_hi[idx];
                                if (lo > -kBig && hi < kBig && hi > lo) {
                                    // a <= hi * (z - lo) / (hi - lo)
                                    lp.add_less_equal({{ref.a_var, hi - lo}, {ref.z_var, -hi}},
                                                      -hi * lo);
                                    lp.add_less_equal({{ref.z_var, 1.0}}, hi);
                                    lp.add_greater_equal({{ref.z_var, 1.0}}, lo);
                                }
                                break;
                            }
                        }
                    }
                    ni += l.rows();
                }
                in_vars = std::move(out_vars);
            }
            ni_base = ni;
        }
        ++stats_.lp_calls;
        return lp.solve();
    }

    bool dfs(int depth_guard) {
        if (++stats_.nodes > opts_.node_budget) throw BudgetExceeded{};

        std::vector<double> z_lo(neurons_.size(), -kBig), z_hi(neurons_.size(), kBig);
        if (!propagate_bounds(z_lo, z_hi)) return false;

        std::optional<std::vector<double>> sol;
        try {
            sol = run_lp(z_lo, z_hi);
        } catch (const LpError&) {
            // numerical pathology: give up on the whole query rather than
            // risk a wrong answer in either direction
            throw BudgetExceeded{};
        }
        if (!sol) return false;

        // branch on the first unresolved disjunction group
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            if (chosen_[gi] >= 0) continue;
            for (std::size_t ci = 0; ci < groups_[gi].cases.size(); ++ci) {
                chosen_[gi] = static_cast<int>(ci);
                if (dfs(depth_guard + 1)) return true;
            }
            chosen_[gi] = -1;
            return false;
        }

        // branch on the widest undecided neuron, ties by (step, layer, neuron)
        int pick = -1;
        double widest = -1;
        for (std::size_t i = 0; i < neurons_.size(); ++i) {
            if (effective_phase(i, z_lo, z_hi) != kUndecided) continue;
            double width = z_hi[i] - z_lo[i];
            if (width > widest + 1e-15) {
                widest = width;
                pick = static_cast<int>(i);
            }
        }
        if (pick >= 0) {
            phases_[pick] = kActive;
            if (dfs(depth_guard + 1)) return true;
            phases_[pick] = kInactive;
            if (dfs(depth_guard + 1)) return true;
            phases_[pick] = kUndecided;
            return false;
        }

        // leaf: every phase decided, LP solution is an exact witness
        witness_ = extract_witness(*sol);
        return true;
    }

    Witness extract_witness(const std::vector<double>& sol) const {
        Witness w;
        for (int s = 0; s < q_.depth; ++s) {
            std::vector<double> xs(n_);
            for (int j = 0; j < n_; ++j) xs[j] = sol[s * (n_ + m_) + j];
            w.y.push_back(q_.net->forward(xs));  // report the network's true output
            w.x.push_back(std::move(xs));
        }
        return w;
    }

    const ConstraintQuery& q_;
    SolveOptions opts_;
    int n_ = 0, m_ = 0;
    int interface_vars_ = 0;
    int total_vars_ = 0;
    std::vector<NeuronRef> neurons_;
    std::vector<Lit> base_lits_;
    std::size_t neg_lit_start_ = 0;
    std::vector<OrGroup> groups_;
    std::size_t neg_group_start_ = 0;
    std::vector<int> chosen_;
    std::vector<int8_t> phases_;
    Witness witness_;
    SolveStats stats_;
};

}  // namespace

VerifyResult solve(const ConstraintQuery& query, const SolveOptions& opts) {
    BnbSolver s(query, opts);
    return s.run();
}

namespace {

struct VarBounds {
    std::vector<double> lo, hi;
};

VarBounds interval_var_bounds(const ConstraintQuery& q) {
    int iv = q.num_vars();
    VarBounds b{std::vector<double>(iv, -kBig), std::vector<double>(iv, kBig)};
    for (const Lit& l : q.linear.lits) {
        if (l.terms.size() != 1) continue;
        auto [v, w] = l.terms[0];
        if (w == 0) continue;
        double bound = l.rhs / w;
        if (w > 0) b.hi[v] = std::min(b.hi[v], bound);
        else b.lo[v] = std::max(b.lo[v], bound);
    }
    return b;
}

}  // namespace

VerifyResult solve_interval(const ConstraintQuery& query, const SolveOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    (void)opts;
    const Network& net = *query.net;
    int n = net.input_dim(), m = net.output_dim();
    VarBounds b = interval_var_bounds(query);

    VerifyResult res;
    res.depth = query.depth;

    bool empty_pre = false;
    for (int s = 0; s < query.depth && !empty_pre; ++s) {
        int base = s * (n + m);
        for (int j = 0; j < n; ++j)
            if (b.lo[base + j] > b.hi[base + j]) empty_pre = true;
    }
    if (empty_pre) {  // unsatisfiable precondition box: vacuously proven
        res.status = Status::Proven;
        return res;
    }

    for (int s = 0; s < query.depth; ++s) {
        int base = s * (n + m);
        std::vector<double> lo(n), hi(n);
        for (int j = 0; j < n; ++j) {
            lo[j] = b.lo[base + j];
            hi[j] = b.hi[base + j];
            if (lo[j] <= -kBig || hi[j] >= kBig)
                throw UnboundedInput("input feature " + std::to_string(j) + " at step " +
                                     std::to_string(s) + " lacks finite bounds");
        }
        IntervalBox out = net.interval_propagate(IntervalBox(lo, hi));
        for (int j = 0; j < m; ++j) {
            b.lo[base + n + j] = std::max(b.lo[base + n + j], out.lower[j]);
            b.hi[base + n + j] = std::min(b.hi[base + n + j], out.upper[j]);
        }
    }

    auto lit_impossible = [&](const Lit& l) {
        double lo_sum = 0;
        for (auto [v, w] : l.terms) lo_sum += w > 0 ? w * b.lo[v] : w * b.hi[v];
        return lo_sum > l.rhs + 1e-12;
    };
    auto case_impossible = [&](const Conjunction& c) {
        for (const Lit& l : c.lits)
            if (lit_impossible(l)) return true;
        return false;
    };

    bool impossible = false;
    for (const Lit& l : query.neg_linear.lits)
        if (lit_impossible(l)) impossible = true;
    for (const OrGroup& g : query.neg_groups) {
        bool all_dead = true;
        for (const Conjunction& c : g.cases) all_dead = all_dead && case_impossible(c);
        if (all_dead) impossible = true;
    }

    res.status = impossible ? Status::Proven : Status::Unknown;
    res.stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    return res;
}

namespace {

bool node_references_k(const drlp::Node& n) {
    struct {
        bool found = false;
        void expr(const drlp::Expr& e) {
            if (e.kind == drlp::Expr::Kind::Ident && e.ident == "k") found = true;
            for (const drlp::Expr& el : e.elems) expr(el);
            for (const drlp::Subscript& s : e.subs)
                for (const drlp::Expr& p : s.parts) expr(p);
        }
        void node(const drlp::Node& n) {
            for (const drlp::Expr& e : n.loop_range) expr(e);
            if (n.kind == drlp::Node::Kind::Compare)
                for (const drlp::Expr& e : n.cmp.operands) expr(e);
            for (const drlp::Node& c : n.children) node(c);
        }
    } w;
    w.node(n);
    return w.found;
}

}  // namespace

VerifyResult bmc(const drlp::Script& script, const Network& net, int k_max,
                 const SolveOptions& opts) {
    if (k_max < 1) throw ArityError("k_max must be >= 1");
    // A script with no step structure only constrains step 0; deeper
    // unrollings add unconstrained copies and cannot change the verdict.
    if (!node_references_k(script.pre) && !node_references_k(script.post)) k_max = 1;
    bool interval_mode = net.has_tanh();
    SolveStats total;
    bool saw_unknown = false;
    for (int k = 1; k <= k_max; ++k) {
        ConstraintQuery q = build_query(script, net, k, opts.lower);
        VerifyResult r = interval_mode ? solve_interval(q, opts) : solve(q, opts);
        total.merge(r.stats);
        if (r.status == Status::Falsified) {
            r.depth = k;
            r.stats = total;
            return r;
        }
        if (r.status == Status::Unknown) saw_unknown = true;
    }
    VerifyResult res;
    res.status = saw_unknown ? Status::Unknown : Status::Proven;
    res.depth = k_max;
    res.stats = total;
    return res;
}

VerifyResult k_induction(const drlp::Script& script, const Network& net, int k_max,
                         const SolveOptions& opts) {
    if (k_max < 1) throw ArityError("k_max must be >= 1");
    if (drlp::post_is_exist(script))
        throw NotInductible("k-induction applies to Forall post-conditions only");
    if (net.has_tanh())
        throw NonPiecewiseLinear("k-induction requires the complete solver; use interval BMC");

    // A script without any step structure is a one-shot property: the depth-1
    // check already decides it completely.
    if (!node_references_k(script.pre) && !node_references_k(script.post)) {
        VerifyResult r = solve(build_query(script, net, 1, opts.lower), opts);
        r.depth = 1;
        return r;
    }

    SolveStats total;
    bool saw_unknown = false;
    for (int k = 1; k <= k_max; ++k) {
        ConstraintQuery base_q = build_query(script, net, k, opts.lower);
        VerifyResult base = solve(base_q, opts);
        total.merge(base.stats);
        if (base.status == Status::Falsified) {
            base.depth = k;
            base.stats = total;
            return base;
        }
        if (base.status == Status::Unknown) saw_unknown = true;

        ConstraintQuery ind_q = build_inductive_query(script, net, k, opts.lower);
        VerifyResult ind = solve(ind_q, opts);
        total.merge(ind.stats);
        if (ind.status == Status::Proven && base.status == Status::Proven) {
            VerifyResult res;
            res.status = Status::Proven;
            res.depth = k;
            res.stats = total;
            return res;
        }
    }
    VerifyResult res;
    res.status = Status::Unknown;
    res.depth = k_max;
    res.stats = total;
    (void)saw_unknown;
    return res;
}

}  // namespace reinverify
