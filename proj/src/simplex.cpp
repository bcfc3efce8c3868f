#include "reinverify/simplex.hpp"

#include <cmath>
#include <cstdlib>

#include "reinverify/errors.hpp"

namespace reinverify {

void SimplexFeasibility::add_less_equal(const std::vector<std::pair<int, double>>& terms,
                                        double rhs) {
    LinearRow r;
    for (auto [v, c] : terms) r.add_term(v, c);
    r.rhs = rhs;
    rows_.push_back(std::move(r));
}

void SimplexFeasibility::add_greater_equal(const std::vector<std::pair<int, double>>& terms,
                                           double rhs) {
    LinearRow r;
    for (auto [v, c] : terms) r.add_term(v, -c);
    r.rhs = -rhs;
    rows_.push_back(std::move(r));
}

void SimplexFeasibility::add_equal(const std::vector<std::pair<int, double>>& terms, double rhs) {
    add_less_equal(terms, rhs);
    add_greater_equal(terms, rhs);
}

// Phase 1 over the standard form A x' + s = b with x' >= 0 (free variables
// split as v = p - q). Rows with negative b get an artificial variable; the
// phase-1 objective minimizes the artificial sum. Bland's rule throughout,
// so cycling cannot occur.
std::optional<std::vector<double>> SimplexFeasibility::solve(LpStats* stats) const {
    const int m = static_cast<int>(rows_.size());
    if (m == 0) return std::vector<double>(num_vars_, 0.0);
    const int split = 2 * num_vars_;

    std::vector<int> art_of_row(m, -1);
    int num_art = 0;
    for (int i = 0; i < m; ++i)
        if (rows_[i].rhs < 0) art_of_row[i] = num_art++;

    const int ncols = split + m + num_art;  // split vars, slacks, artificials
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(ncols + 1, 0.0));
    std::vector<int> basis(m);

    for (int i = 0; i < m; ++i) {
        const LinearRow& row = rows_[i];
        double sign = row.rhs < 0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < row.vars.size(); ++k) {
            int v = row.vars[k];
            if (v < 0 || v >= num_vars_) throw LpError("constraint references unknown variable");
            t[i][2 * v] += sign * row.coeffs[k];
            t[i][2 * v + 1] -= sign * row.coeffs[k];
        }
        t[i][split + i] = sign;  // slack
        t[i][ncols] = sign * row.rhs;
        if (art_of_row[i] >= 0) {
            int ac = split + m + art_of_row[i];
            t[i][ac] = 1.0;
            basis[i] = ac;
        } else {
            basis[i] = split + i;
        }
    }

    // Phase-1 objective row: minimize sum of artificials. Expressed in terms
    // of the non-basic columns by subtracting the artificial rows; the basic
    // artificial columns themselves have zero reduced cost.
    for (int i = 0; i < m; ++i) {
        if (art_of_row[i] < 0) continue;
        for (int j = 0; j <= ncols; ++j) t[m][j] -= t[i][j];
    }
    for (int a = 0; a < num_art; ++a) t[m][split + m + a] = 0.0;

    long pivots = 0;
    const long pivot_cap = 200000;
    auto pivot = [&](int pr, int pc) {
        double inv = 1.0 / t[pr][pc];
        for (int j = 0; j <= ncols; ++j) t[pr][j] *= inv;
        t[pr][pc] = 1.0;
        for (int i = 0; i <= m; ++i) {
            if (i == pr) continue;
            double f = t[i][pc];
            if (f == 0.0) continue;
            for (int j = 0; j <= ncols; ++j) t[i][j] -= f * t[pr][j];
            t[i][pc] = 0.0;
        }
        basis[pr] = pc;
        ++pivots;
    };

    for (;;) {
        if (pivots > pivot_cap) throw LpError("simplex pivot cap exceeded");
        int pc = -1;
        for (int j = 0; j < split + m; ++j) {  // artificials never re-enter
            if (t[m][j] < -tol_) {             // Bland: first improving column
                pc = j;
                break;
            }
        }
        if (pc < 0) break;
        int pr = -1;
        double best_ratio = 0;
        for (int i = 0; i < m; ++i) {
            if (t[i][pc] <= tol_) continue;
            double ratio = t[i][ncols] / t[i][pc];
            if (pr < 0 || ratio < best_ratio - 1e-12 ||
                (std::abs(ratio - best_ratio) <= 1e-12 && basis[i] < basis[pr])) {
                pr = i;
                best_ratio = ratio;
            }
        }
        if (pr < 0) throw LpError("phase-1 objective unbounded");  // cannot happen
        pivot(pr, pc);
    }
    if (stats) stats->pivots += pivots;

    if (t[m][ncols] < -tol_) return std::nullopt;  // artificial sum positive

    // Drive any residual artificial out of the basis; a row with no eligible
    // column is redundant and can stay (its artificial is at zero level).
    for (int i = 0; i < m; ++i) {
        if (basis[i] < split + m) continue;
        for (int j = 0; j < split + m; ++j) {
            if (std::abs(t[i][j]) > tol_) {
                pivot(i, j);
                break;
            }
        }
    }

    std::vector<double> parts(split + m, 0.0);
    for (int i = 0; i < m; ++i)
        if (basis[i] < split + m) parts[basis[i]] = t[i][ncols];
    std::vector<double> x(num_vars_);
    for (int v = 0; v < num_vars_; ++v) x[v] = parts[2 * v] - parts[2 * v + 1];
    return x;
}

}  // namespace reinverify
