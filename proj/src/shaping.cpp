#include "reinverify/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "reinverify/errors.hpp"

namespace reinverify {

bool ActionConstraint::satisfied(const std::vector<double>& action) const {
    switch (kind) {
        case Kind::Interval:
            for (double a : action)
                if (a < lower || a > upper) return false;
            return true;
        case Kind::AvoidDiscrete:
        case Kind::RequireDiscrete:
            throw SemanticError("discrete action constraint applied to a continuous action");
    }
    return false;
}

bool ActionConstraint::satisfied(int action) const {
    switch (kind) {
        case Kind::Interval: return action >= lower && action <= upper;
        case Kind::AvoidDiscrete:
            return std::find(actions.begin(), actions.end(), action) == actions.end();
        case Kind::RequireDiscrete:
            return std::find(actions.begin(), actions.end(), action) != actions.end();
    }
    return false;
}

void PropertyBox::validate() const {
    std::size_t n = state_lower.size();
    if (state_upper.size() != n || env_lower.size() != n || env_upper.size() != n)
        throw DimensionError("property box bound vectors differ in length");
    for (std::size_t j = 0; j < n; ++j) {
        if (state_lower[j] > state_upper[j])
            throw DimensionError("property box has lower > upper at feature " + std::to_string(j));
        if (env_lower[j] > state_lower[j] || state_upper[j] > env_upper[j])
            throw DimensionError("property bounds exceed environment bounds at feature " +
                                 std::to_string(j));
    }
}

bool PropertyBox::contains(const std::vector<double>& state) const {
    if (state.size() != state_lower.size())
        throw DimensionError("state length does not match the property box");
    for (std::size_t j = 0; j < state.size(); ++j)
        if (state[j] < state_lower[j] || state[j] > state_upper[j]) return false;
    return true;
}

namespace {

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

// Segment anchor and direction for a one-sided density measurement.
struct Segment {
    std::vector<double> base;  // the boundary corner
    int feature;
    double dir;  // +1 away from the lower bound, -1 away from the upper bound
};

Segment density_segment(const PropertyBox& box, int feature, Side side) {
    Segment seg;
    seg.base = box.state_lower;
    seg.feature = feature;
    if (side == Side::Lower) {
        seg.dir = 1.0;
    } else {
        seg.base[feature] = box.state_upper[feature];
        seg.dir = -1.0;
    }
    return seg;
}

std::vector<double> point_at(const Segment& seg, double t) {
    std::vector<double> p = seg.base;
    p[seg.feature] += seg.dir * t;
    return p;
}

// Pre-activations of hidden layer `upto` at input p.
std::vector<double> preactivations(const Network& net, const std::vector<double>& x, int upto) {
    std::vector<double> cur = x;
    for (int li = 0;; ++li) {
        const Layer& l = net.layers()[li];
        std::vector<double> z(l.rows());
        for (std::size_t r = 0; r < l.rows(); ++r) {
            double acc = l.bias[r];
            for (std::size_t c = 0; c < l.cols(); ++c) acc += l.weights[r][c] * cur[c];
            z[r] = acc;
        }
        if (li == upto) return z;
        for (std::size_t r = 0; r < l.rows(); ++r) {
            switch (l.activation) {
                case Activation::Relu: z[r] = std::max(z[r], 0.0); break;
                case Activation::Tanh: z[r] = std::tanh(z[r]); break;
                case Activation::Identity: break;
            }
        }
        cur = std::move(z);
    }
}

}  // namespace

double density(const Network& net, const PropertyBox& box, int feature, Side side, double eps) {
    if (eps <= 0) throw SemanticError("density epsilon must be positive");
    if (feature < 0 || feature >= box.dims())
        throw DimensionError("density feature index out of range");
    if (net.has_tanh()) return density_sampled(net, box, feature, side, eps, 2000);

    Segment seg = density_segment(box, feature, side);
    std::vector<double> ref = net.forward(seg.base);

    // The map t -> N(p(t)) is piecewise affine; its kinks sit where some
    // pre-activation crosses zero. Refining layer by layer keeps each piece
    // affine, so the maximum of the convex per-piece norm is at an endpoint.
    std::set<double> ts{0.0, eps};
    int hidden_layers = static_cast<int>(net.layers().size()) - 1;
    for (int li = 0; li < hidden_layers; ++li) {
        if (net.layers()[li].activation != Activation::Relu) continue;
        std::vector<double> sorted(ts.begin(), ts.end());
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            double ta = sorted[i], tb = sorted[i + 1];
            std::vector<double> za = preactivations(net, point_at(seg, ta), li);
            std::vector<double> zb = preactivations(net, point_at(seg, tb), li);
            for (std::size_t r = 0; r < za.size(); ++r) {
                if ((za[r] < 0 && zb[r] > 0) || (za[r] > 0 && zb[r] < 0)) {
                    double t = ta + (tb - ta) * (za[r] / (za[r] - zb[r]));
                    if (t > ta && t < tb) ts.insert(t);
                }
            }
        }
    }
    double best = 0;
    for (double t : ts) best = std::max(best, l2(net.forward(point_at(seg, t)), ref));
    return best;
}

double density_sampled(const Network& net, const PropertyBox& box, int feature, Side side,
                       double eps, int samples) {
    Segment seg = density_segment(box, feature, side);
    std::vector<double> ref = net.forward(seg.base);
    double best = 0;
    for (int i = 0; i <= samples; ++i) {
        double t = eps * i / samples;
        best = std::max(best, l2(net.forward(point_at(seg, t)), ref));
    }
    return best;
}

DensityPair measure_densities(const Network& net, const PropertyBox& box, double eps,
                              const std::string& snapshot_id) {
    DensityPair dp;
    dp.epsilon = eps;
    dp.network_snapshot = snapshot_id;
    for (int j = 0; j < box.dims(); ++j) {
        dp.lower.push_back(density(net, box, j, Side::Lower, eps));
        dp.upper.push_back(density(net, box, j, Side::Upper, eps));
    }
    return dp;
}

double exact_middle(const PropertyBox& box, const DensityPair& densities, int feature) {
    double lo = box.state_lower[feature], hi = box.state_upper[feature];
    double env_lo = box.env_lower[feature], env_hi = box.env_upper[feature];
    bool at_env_lo = lo == env_lo, at_env_hi = hi == env_hi;
    if (at_env_lo && !at_env_hi) return env_lo;
    if (at_env_hi && !at_env_lo) return env_hi;
    double rl = densities.lower[feature], ru = densities.upper[feature];
    if (rl < 0 || ru < 0) throw SemanticError("densities must be non-negative");
    if (rl + ru == 0) return (lo + hi) / 2;  // degenerate density: arithmetic midpoint
    return (rl * lo + ru * hi) / (rl + ru);
}

std::vector<double> exact_middles(const PropertyBox& box, const DensityPair& densities) {
    std::vector<double> out;
    for (int j = 0; j < box.dims(); ++j) out.push_back(exact_middle(box, densities, j));
    return out;
}

double dist_1d(const PropertyBox& box, double middle, int feature, double value, double p1) {
    double lo = box.state_lower[feature], hi = box.state_upper[feature];
    if (middle < lo || middle > hi)
        throw SemanticError("exact middle lies outside the property interval");
    if (value < lo || value > hi) return 0;
    if (value == middle) return 1;
    if (value < middle)  // middle == lo is unreachable here since value >= lo
        return std::pow((value - lo) / (middle - lo), p1);
    return std::pow((hi - value) / (hi - middle), p1);
}

double dist_nd(const PropertyBox& box, const DensityPair& densities,
               const std::vector<double>& middles, const std::vector<double>& state, double p2) {
    if (!box.contains(state)) return 0;
    double num = 0, den = 0;
    for (int j = 0; j < box.dims(); ++j) {
        double rho = state[j] < middles[j] ? densities.lower[j] : densities.upper[j];
        double d = dist_1d(box, middles[j], j, state[j], 1.0);
        num += rho * std::pow(d, p2);
        den += rho;
    }
    if (den == 0) {  // zero density sum: unweighted mean fallback
        double acc = 0;
        for (int j = 0; j < box.dims(); ++j)
            acc += std::pow(dist_1d(box, middles[j], j, state[j], 1.0), p2);
        return std::pow(acc / box.dims(), 1.0 / p2);
    }
    return std::pow(num / den, 1.0 / p2);
}

namespace {

double action_distance(const PropertyBox& box, const ActionInput& action,
                       const ShapingConfig& cfg) {
    if (!cfg.action_interval_dist || box.action.kind != ActionConstraint::Kind::Interval)
        return cfg.fixed_action_dist;
    double a;
    if (std::holds_alternative<int>(action.value))
        a = static_cast<double>(std::get<int>(action.value));
    else {
        const auto& v = std::get<std::vector<double>>(action.value);
        if (v.size() != 1)
            throw SemanticError("interval action distance expects a scalar action");
        a = v[0];
    }
    double lo = box.action.lower, hi = box.action.upper;
    if (a < lo || a > hi) return 0;
    double mid = (lo + hi) / 2;  // arithmetic middle: no densities over actions
    if (a == mid) return 1;
    if (a < mid) return std::pow((a - lo) / (mid - lo), cfg.p1);
    return std::pow((hi - a) / (hi - mid), cfg.p1);
}

bool action_ok(const PropertyBox& box, const ActionInput& action) {
    if (std::holds_alternative<int>(action.value))
        return box.action.satisfied(std::get<int>(action.value));
    return box.action.satisfied(std::get<std::vector<double>>(action.value));
}

}  // namespace

double diff(const PropertyBox& box, const DensityPair& densities,
            const std::vector<double>& middles, const std::vector<double>& state,
            const ActionInput& action, const ShapingConfig& cfg) {
    double dist_state = dist_nd(box, densities, middles, state, cfg.p2);
    if (dist_state == 0) return 0;
    double sign = action_ok(box, action) ? 1.0 : -1.0;
    return sign * dist_state * action_distance(box, action, cfg);
}

GapResult gap(const drlp::Template& relaxation_template, const std::string& parameter,
              double predefined_value, const GapOptions& opts, const VerifyFn& verify_fn) {
    if (opts.initial_halfwidth <= 0 || opts.precision <= 0)
        throw EmptySpec("gap search needs positive halfwidth and precision");

    GapResult res;
    {
        drlp::ParseResult r = drlp::concretize(relaxation_template, parameter, predefined_value);
        VerifyResult at_stated = verify_fn(std::get<drlp::Script>(r));
        if (at_stated.status == Status::Unknown)
            throw UnknownVerdict("gap probe at the stated parameter returned Unknown");
        if (at_stated.status == Status::Proven) {
            res.gap = 0;  // already proven at its own parameter
            res.breakpoint_value = predefined_value;
            return res;
        }
    }

    double width = opts.initial_halfwidth;
    for (;;) {
        double lo = opts.relax_downward ? predefined_value - width : predefined_value;
        double hi = opts.relax_downward ? predefined_value : predefined_value + width;
        SearchSpec spec;
        spec.vars[parameter] = VarSpec{lo, hi, opts.precision, SearchMethod::Binary, 2.0};
        SearchReport rep = find_breakpoints(relaxation_template, spec, verify_fn);
        if (!rep.aborted_slices.empty())
            throw UnknownVerdict("gap search hit an Unknown verdict");
        if (!rep.breakpoints.empty()) {
            double best = std::numeric_limits<double>::infinity();
            double best_value = 0;
            for (const Breakpoint& bp : rep.breakpoints) {
                double mid = (bp.value_lo + bp.value_hi) / 2;
                double d = std::abs(predefined_value - mid);
                if (d < best) {
                    best = d;
                    best_value = mid;
                }
            }
            res.gap = best;
            res.breakpoint_value = best_value;
            res.expanded = res.expansions > 0;
            return res;
        }
        if (width >= opts.cap_halfwidth) {
            res.gap = width;
            res.exhausted = true;
            res.expanded = res.expansions > 0;
            return res;
        }
        width = std::min(width * 4, opts.cap_halfwidth);  // quadruple the interval
        res.expansions += 1;
    }
}

double lr_sigmoid(double gap_value) { return 1.0 / (1.0 + std::exp(-gap_value)); }

double lr_coupled_diff(double gap_value, double diff_value,
                       const std::function<double(double)>& lr) {
    return lr(gap_value) * diff_value;
}

std::vector<double> traceback(const std::vector<double>& f, PropertyKind kind, double lambda,
                              double mu) {
    if (lambda <= 0 || lambda > 1) throw SemanticError("traceback lambda must lie in (0, 1]");
    if (mu < 0 || mu >= 1) throw SemanticError("traceback mu must lie in [0, 1)");
    const int T = static_cast<int>(f.size());
    std::vector<double> traced(T, 0.0);
    auto at = [&](int t) { return t >= 0 && t < T ? f[t] : 0.0; };
    for (int t = T - 1; t >= 0; --t) {
        double next_traced = t + 1 < T ? traced[t + 1] : 0.0;
        if (kind == PropertyKind::ActionAvoidance)
            traced[t] = at(t) - at(t - 1) / lambda + mu * next_traced;
        else
            traced[t] = lambda * at(t + 1) - at(t) + mu * next_traced;
    }
    return traced;
}

std::vector<ShapedStep> shape_rewards(const Trajectory& traj,
                                      const std::vector<PropertyPipeline>& properties,
                                      const ShapingConfig& cfg) {
    for (const PropertyPipeline& p : properties)
        if (p.weight < 0 || p.weight > 1)
            throw SemanticError("property weights must lie in [0, 1]");
    const int T = static_cast<int>(traj.size());
    std::vector<std::vector<double>> traced_per_property;
    for (const PropertyPipeline& p : properties) {
        std::vector<double> f(T);
        for (int t = 0; t < T; ++t) {
            double d = diff(p.box, p.densities, p.middles, traj[t].state, traj[t].action, cfg);
            f[t] = lr_coupled_diff(p.gap_value, d);
        }
        if (p.single_step) traced_per_property.push_back(std::move(f));
        else traced_per_property.push_back(traceback(f, p.box.kind, cfg.lambda, cfg.mu));
    }
    std::vector<ShapedStep> out(T);
    for (int t = 0; t < T; ++t) {
        double sum = 0;
        for (std::size_t i = 0; i < properties.size(); ++i) {
            out[t].per_property_f.push_back(traced_per_property[i][t]);
            sum += properties[i].weight * traced_per_property[i][t];
        }
        out[t].reward_original = traj[t].reward;
        out[t].reward_shaped = traj[t].reward + cfg.beta * sum;
    }
    return out;
}

namespace {

using drlp::Expr;
using drlp::Node;

std::optional<std::vector<double>> const_list(const Expr& e, const drlp::Script& script) {
    switch (e.kind) {
        case Expr::Kind::Number: return std::vector<double>{e.number};
        case Expr::Kind::Neg: {
            auto v = const_list(e.elems[0], script);
            if (!v) return std::nullopt;
            for (double& d : *v) d = -d;
            return v;
        }
        case Expr::Kind::Ident: {
            const drlp::Assign* a = script.find_var(e.ident);
            if (!a || a->iterable) return std::nullopt;
            return a->value.items;
        }
        case Expr::Kind::List: {
            std::vector<double> out;
            for (const Expr& el : e.elems) {
                auto v = const_list(el, script);
                if (!v) return std::nullopt;
                out.insert(out.end(), v->begin(), v->end());
            }
            return out;
        }
        case Expr::Kind::Binary: {
            auto a = const_list(e.elems[0], script);
            auto b = const_list(e.elems[1], script);
            if (!a || !b) return std::nullopt;
            if (e.op == '*' && (e.elems[0].kind == Expr::Kind::List ||
                                e.elems[1].kind == Expr::Kind::List)) {
                const auto& lst = e.elems[0].kind == Expr::Kind::List ? *a : *b;
                const auto& cnt = e.elems[0].kind == Expr::Kind::List ? *b : *a;
                if (cnt.size() != 1) return std::nullopt;
                std::vector<double> out;
                for (int i = 0; i < static_cast<int>(cnt[0]); ++i)
                    out.insert(out.end(), lst.begin(), lst.end());
                return out;
            }
            std::size_t len = std::max(a->size(), b->size());
            std::vector<double> out(len);
            for (std::size_t i = 0; i < len; ++i) {
                double x = (*a)[a->size() == 1 ? 0 : i], y = (*b)[b->size() == 1 ? 0 : i];
                switch (e.op) {
                    case '+': out[i] = x + y; break;
                    case '-': out[i] = x - y; break;
                    case '*': out[i] = x * y; break;
                    case '/': out[i] = x / y; break;
                }
            }
            return out;
        }
        default: return std::nullopt;
    }
}

// y reference at step 0: returns the touched feature indices
std::optional<std::vector<int>> y_features(const Expr& e, int m) {
    if (e.kind != Expr::Kind::IoRef || e.io != 'y') return std::nullopt;
    if (!e.subs.empty()) {
        if (e.subs[0].is_slice() || e.subs[0].parts[0].kind != Expr::Kind::Number ||
            e.subs[0].parts[0].number != 0)
            return std::nullopt;
    }
    if (e.subs.size() < 2) {
        std::vector<int> all(m);
        for (int j = 0; j < m; ++j) all[j] = j;
        return all;
    }
    const auto& fs = e.subs[1];
    if (fs.is_slice() || fs.parts[0].kind != Expr::Kind::Number) return std::nullopt;
    return std::vector<int>{static_cast<int>(fs.parts[0].number)};
}

void apply_state_bounds(const drlp::Script& script, PropertyBox& box) {
    for (const Node& n : script.pre.children) {
        if (n.kind != Node::Kind::Compare) continue;
        const auto& c = n.cmp;
        for (std::size_t i = 0; i < c.ops.size(); ++i) {
            if (c.ops[i] != drlp::Cmp::LE && c.ops[i] != drlp::Cmp::LT &&
                c.ops[i] != drlp::Cmp::GE && c.ops[i] != drlp::Cmp::GT &&
                c.ops[i] != drlp::Cmp::EQ)
                continue;
            bool flip = c.ops[i] == drlp::Cmp::GE || c.ops[i] == drlp::Cmp::GT;
            const Expr& lhs = c.operands[i + (flip ? 1 : 0)];
            const Expr& rhs = c.operands[i + (flip ? 0 : 1)];
            // const <= x[0]... or x[0]... <= const (feature subscripts allowed)
            auto touch = [&](const Expr& io, const Expr& bound, bool is_lower) {
                if (io.kind != Expr::Kind::IoRef || io.io != 'x') return;
                if (io.subs.empty() || io.subs[0].is_slice() ||
                    io.subs[0].parts[0].kind != Expr::Kind::Number ||
                    io.subs[0].parts[0].number != 0)
                    return;
                auto values = const_list(bound, script);
                if (!values) return;
                std::vector<int> feats;
                if (io.subs.size() == 2) {
                    if (io.subs[1].is_slice() ||
                        io.subs[1].parts[0].kind != Expr::Kind::Number)
                        return;
                    feats.push_back(static_cast<int>(io.subs[1].parts[0].number));
                } else {
                    for (int j = 0; j < box.dims(); ++j) feats.push_back(j);
                }
                for (std::size_t fi = 0; fi < feats.size(); ++fi) {
                    double v = (*values)[values->size() == 1 ? 0 : fi];
                    int j = feats[fi];
                    if (is_lower || c.ops[i] == drlp::Cmp::EQ)
                        box.state_lower[j] = std::max(box.state_lower[j], v);
                    if (!is_lower || c.ops[i] == drlp::Cmp::EQ)
                        box.state_upper[j] = std::min(box.state_upper[j], v);
                }
            };
            touch(rhs, lhs, /*is_lower=*/true);   // const <= x
            touch(lhs, rhs, /*is_lower=*/false);  // x <= const
        }
    }
}

void apply_action_constraint(const drlp::Script& script, PropertyBox& box) {
    const int m = script.y_size;
    bool have_interval = false;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::vector<std::pair<int, int>> dominance;  // (winner, loser) pairs
    bool dominance_in_or = false;

    std::function<void(const Node&, bool)> walk = [&](const Node& n, bool in_or) {
        switch (n.kind) {
            case Node::Kind::Or: {
                for (const Node& c : n.children) walk(c, true);
                return;
            }
            case Node::Kind::And: {
                for (const Node& c : n.children) walk(c, in_or);
                return;
            }
            case Node::Kind::Compare: break;
            default: return;
        }
        const auto& c = n.cmp;
        for (std::size_t i = 0; i < c.ops.size(); ++i) {
            bool flip = c.ops[i] == drlp::Cmp::GE || c.ops[i] == drlp::Cmp::GT;
            const Expr& small = c.operands[i + (flip ? 1 : 0)];
            const Expr& large = c.operands[i + (flip ? 0 : 1)];
            auto yf_small = y_features(small, m);
            auto yf_large = y_features(large, m);
            if (yf_small && yf_large && yf_small->size() == 1 && yf_large->size() == 1) {
                dominance.emplace_back((*yf_large)[0], (*yf_small)[0]);
                dominance_in_or = dominance_in_or || in_or;
                continue;
            }
            if (yf_small && !yf_large) {  // y <= const: upper bound
                if (auto v = const_list(large, script)) {
                    hi = std::min(hi, (*v)[0]);
                    have_interval = true;
                }
            }
            if (yf_large && !yf_small) {  // const <= y: lower bound
                if (auto v = const_list(small, script)) {
                    lo = std::max(lo, (*v)[0]);
                    have_interval = true;
                }
            }
        }
    };
    for (const Node& n : script.post.children) walk(n, false);

    if (!dominance.empty()) {
        std::set<int> winners, losers;
        for (auto [w, l] : dominance) {
            winners.insert(w);
            losers.insert(l);
        }
        if (dominance_in_or && losers.size() == 1) {
            box.action.kind = ActionConstraint::Kind::AvoidDiscrete;
            box.action.actions = {*losers.begin()};
            return;
        }
        if (!dominance_in_or && winners.size() == 1) {
            box.action.kind = ActionConstraint::Kind::RequireDiscrete;
            box.action.actions = {*winners.begin()};
            return;
        }
        throw SemanticError("post-condition argmax pattern not recognized");
    }
    if (have_interval) {
        box.action.kind = ActionConstraint::Kind::Interval;
        box.action.lower = lo;
        box.action.upper = hi;
        return;
    }
    throw SemanticError(
        "post-condition is neither an output interval nor an argmax pattern; "
        "specify the action constraint explicitly");
}

}  // namespace

PropertyBox property_box_from_script(const drlp::Script& script,
                                     const std::vector<double>& env_lower,
                                     const std::vector<double>& env_upper, PropertyKind kind) {
    const int n = script.x_size;
    if (static_cast<int>(env_lower.size()) != n || static_cast<int>(env_upper.size()) != n)
        throw DimensionError("environment bounds must match the script's x_size");
    PropertyBox box;
    box.kind = kind;
    box.env_lower = env_lower;
    box.env_upper = env_upper;
    box.state_lower = env_lower;
    box.state_upper = env_upper;
    apply_state_bounds(script, box);
    for (int j = 0; j < n; ++j) {
        box.state_lower[j] = std::max(box.state_lower[j], env_lower[j]);
        box.state_upper[j] = std::min(box.state_upper[j], env_upper[j]);
    }
    apply_action_constraint(script, box);
    box.validate();
    return box;
}

double suggest_beta(const Trajectory& traj, const std::vector<PropertyPipeline>& properties,
                    const ShapingConfig& cfg) {
    ShapingConfig unit = cfg;
    unit.beta = 1;
    std::vector<ShapedStep> shaped = shape_rewards(traj, properties, unit);
    std::vector<double> rewards, signals;
    for (std::size_t t = 0; t < traj.size(); ++t) {
        rewards.push_back(std::abs(traj[t].reward));
        double sum = 0;
        for (std::size_t i = 0; i < properties.size(); ++i)
            sum += properties[i].weight * shaped[t].per_property_f[i];
        signals.push_back(std::abs(sum));
    }
    auto median = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    double num = median(rewards), den = median(signals);
    return den > 0 ? num / den : 1.0;
}

}  // namespace reinverify
