#pragma once

// Exhaustive activation-pattern enumeration oracle and witness checks shared
// by the unit and acceptance suites. Deliberately independent of the
// branch-and-bound search path: patterns are enumerated outright and each one
// gets a plain feasibility LP.

#include <random>
#include <sstream>
#include <vector>

#include "reinverify/drlp/parser.hpp"
#include "reinverify/drlp/printer.hpp"
#include "reinverify/simplex.hpp"
#include "reinverify/solver.hpp"
#include "test_helpers.hpp"

namespace testutil {

using namespace reinverify;

inline std::vector<std::pair<double, double>> oracle_preactivation_bounds(
    const Network& net, const std::vector<double>& lo, const std::vector<double>& hi) {
    std::vector<std::pair<double, double>> out;
    std::vector<double> cur_lo = lo, cur_hi = hi;
    int hidden = static_cast<int>(net.layers().size()) - 1;
    for (int li = 0; li < hidden; ++li) {
        const Layer& l = net.layers()[li];
        std::vector<double> nlo(l.rows()), nhi(l.rows());
        for (std::size_t r = 0; r < l.rows(); ++r) {
            double a = l.bias[r], b = l.bias[r];
            for (std::size_t c = 0; c < l.cols(); ++c) {
                double w = l.weights[r][c];
                a += w * (w >= 0 ? cur_lo[c] : cur_hi[c]);
                b += w * (w >= 0 ? cur_hi[c] : cur_lo[c]);
            }
            out.emplace_back(a, b);
            nlo[r] = std::max(a, 0.0);
            nhi[r] = std::max(b, 0.0);
        }
        cur_lo = std::move(nlo);
        cur_hi = std::move(nhi);
    }
    return out;
}

// Complete-by-enumeration reference for one-shot box queries.
inline Status oracle_solve(const ConstraintQuery& q) {
    const Network& net = *q.net;
    const int n = net.input_dim(), m = net.output_dim();

    std::vector<double> lo(n, -1e30), hi(n, 1e30);
    for (const Lit& l : q.linear.lits) {
        if (l.terms.size() != 1) continue;
        auto [v, w] = l.terms[0];
        if (v >= n) continue;
        if (w > 0) hi[v] = std::min(hi[v], l.rhs / w);
        else if (w < 0) lo[v] = std::max(lo[v], l.rhs / w);
    }
    auto zb = oracle_preactivation_bounds(net, lo, hi);

    std::vector<int> unstable;
    for (std::size_t i = 0; i < zb.size(); ++i)
        if (zb[i].first < 0 && zb[i].second > 0) unstable.push_back(static_cast<int>(i));

    std::vector<std::vector<Lit>> neg_cases{{}};
    for (const OrGroup& g : q.neg_groups) {
        std::vector<std::vector<Lit>> next;
        for (const auto& base : neg_cases) {
            for (const Conjunction& c : g.cases) {
                auto merged = base;
                merged.insert(merged.end(), c.lits.begin(), c.lits.end());
                next.push_back(merged);
            }
        }
        neg_cases = std::move(next);
    }

    int hidden = static_cast<int>(net.layers().size()) - 1;
    int num_neurons = static_cast<int>(zb.size());
    int total_vars = n + m + 2 * num_neurons;
    auto z_var = [&](int i) { return n + m + 2 * i; };
    auto a_var = [&](int i) { return n + m + 2 * i + 1; };

    for (std::size_t mask = 0; mask < (1ull << unstable.size()); ++mask) {
        std::vector<int> phase(num_neurons);
        for (int i = 0; i < num_neurons; ++i)
            phase[i] = zb[i].first >= 0 ? 1 : (zb[i].second <= 0 ? 2 : 0);
        for (std::size_t u = 0; u < unstable.size(); ++u)
            phase[unstable[u]] = (mask >> u) & 1 ? 1 : 2;

        for (const auto& neg : neg_cases) {
            SimplexFeasibility lp(total_vars, 1e-7);
            // margin applies to negated-post rows only, mirroring the solver
            auto add_lit = [&](const Lit& l, bool neg_side) {
                LinearRow row;
                for (auto [v, w] : l.terms) row.add_term(v, w);
                row.rhs = l.strict && neg_side ? l.rhs - 1e-6 : l.rhs;
                lp.add_row(row);
            };
            for (const Lit& l : q.linear.lits) add_lit(l, false);
            for (const Lit& l : q.neg_linear.lits) add_lit(l, true);
            for (const Lit& l : neg) add_lit(l, true);

            int ni = 0;
            std::vector<int> in_vars(n);
            for (int j = 0; j < n; ++j) in_vars[j] = j;
            for (int li = 0; li <= hidden; ++li) {
                const Layer& l = net.layers()[li];
                std::vector<int> out_vars;
                for (std::size_t r = 0; r < l.rows(); ++r) {
                    std::vector<std::pair<int, double>> terms;
                    int lhs = li < hidden ? z_var(ni + static_cast<int>(r))
                                          : n + static_cast<int>(r);
                    terms.emplace_back(lhs, 1.0);
                    for (std::size_t c = 0; c < l.cols(); ++c)
                        terms.emplace_back(in_vars[c], -l.weights[r][c]);
                    lp.add_equal(terms, l.bias[r]);
                    if (li < hidden) out_vars.push_back(a_var(ni + static_cast<int>(r)));
                }
                if (li < hidden) {
                    for (std::size_t r = 0; r < l.rows(); ++r) {
                        int i = ni + static_cast<int>(r);
                        if (phase[i] == 1) {
                            lp.add_equal({{a_var(i), 1.0}, {z_var(i), -1.0}}, 0.0);
                            lp.add_greater_equal({{z_var(i), 1.0}}, 0.0);
                        } else {
                            lp.add_equal({{a_var(i), 1.0}}, 0.0);
                            lp.add_less_equal({{z_var(i), 1.0}}, 0.0);
                        }
                    }
                    ni += static_cast<int>(l.rows());
                }
                in_vars = std::move(out_vars);
            }
            if (lp.solve()) return Status::Falsified;
        }
    }
    return Status::Proven;
}

// True when the witness satisfies the precondition, the negated post and the
// network relation within tol.
inline bool witness_valid(const ConstraintQuery& q, const Witness& w, double tol) {
    const int n = q.net->input_dim(), m = q.net->output_dim();
    std::vector<double> flat(q.depth * (n + m));
    for (int s = 0; s < q.depth; ++s) {
        std::vector<double> y = q.net->forward(w.x[s]);
        for (int j = 0; j < m; ++j)
            if (std::abs(y[j] - w.y[s][j]) > tol) return false;
        for (int j = 0; j < n; ++j) flat[s * (n + m) + j] = w.x[s][j];
        for (int j = 0; j < m; ++j) flat[s * (n + m) + n + j] = y[j];
    }
    auto lit_ok = [&](const Lit& l) {
        double acc = 0;
        for (auto [v, c] : l.terms) acc += c * flat[v];
        return acc <= l.rhs + tol;
    };
    for (const Lit& l : q.linear.lits)
        if (!lit_ok(l)) return false;
    for (const Lit& l : q.neg_linear.lits)
        if (!lit_ok(l)) return false;
    auto group_ok = [&](const OrGroup& g) {
        for (const Conjunction& c : g.cases) {
            bool all = true;
            for (const Lit& l : c.lits) all = all && lit_ok(l);
            if (all) return true;
        }
        return false;
    };
    for (const OrGroup& g : q.or_groups)
        if (!group_ok(g)) return false;
    for (const OrGroup& g : q.neg_groups)
        if (!group_ok(g)) return false;
    return true;
}

struct RandomInstance {
    Network net;
    drlp::Script script;
};

// Random one-shot box property over a random ReLU net, <= 12 ReLUs, dims <= 4.
inline RandomInstance random_box_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dim(1, 4), depth(1, 3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int n = dim(rng), m = dim(rng);
    std::vector<int> sizes{n};
    int layers = depth(rng);
    int relus = 0;
    for (int li = 0; li < layers; ++li) {
        int width = dim(rng);
        if (relus + width > 12) break;
        relus += width;
        sizes.push_back(width);
    }
    if (sizes.size() == 1) sizes.push_back(1 + dim(rng) % 3);
    sizes.push_back(m);
    Network net = random_relu_net(rng, sizes);

    std::vector<double> lo(n), hi(n);
    for (int j = 0; j < n; ++j) {
        double a = u(rng), b = u(rng);
        lo[j] = std::min(a, b);
        hi[j] = std::max(a, b);
    }
    std::vector<double> mid(n);
    for (int j = 0; j < n; ++j) mid[j] = (lo[j] + hi[j]) / 2;
    double b = net.forward(mid)[0] + 0.3 * u(rng);

    std::ostringstream src;
    src << "@Pre\nx_size = " << n << "\ny_size = " << m << "\n[";
    for (int j = 0; j < n; ++j) src << (j ? ", " : "") << drlp::format_number(lo[j]);
    src << "] <= x[0] <= [";
    for (int j = 0; j < n; ++j) src << (j ? ", " : "") << drlp::format_number(hi[j]);
    src << "]\n@Exp\ny[0][0] >= " << drlp::format_number(b) << "\n";
    return RandomInstance{std::move(net), drlp::parse_concrete(src.str())};
}

}  // namespace testutil
