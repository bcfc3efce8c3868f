#pragma once

#include <optional>
#include <vector>

namespace reinverify {

/// One row of a feasibility system: sum(coeff_i * v_i) <= rhs over free
/// (sign-unrestricted) variables. Equalities are expressed as two rows.
struct LinearRow {
    std::vector<int> vars;
    std::vector<double> coeffs;
    double rhs = 0;

    void add_term(int var, double coeff) {
        vars.push_back(var);
        coeffs.push_back(coeff);
    }
};

struct LpStats {
    long pivots = 0;
};

/// Two-phase primal simplex feasibility check with Bland's rule.
///
/// Free variables are split into positive and negative parts internally.
/// Returns an assignment satisfying every row within `tol`, or nullopt when
/// the system is infeasible. Adequate for desk-scale systems (a few hundred
/// variables).
class SimplexFeasibility {
  public:
    explicit SimplexFeasibility(int num_vars, double tol = 1e-7)
        : num_vars_(num_vars), tol_(tol) {}

    void add_row(const LinearRow& row) { rows_.push_back(row); }
    void add_less_equal(const std::vector<std::pair<int, double>>& terms, double rhs);
    void add_greater_equal(const std::vector<std::pair<int, double>>& terms, double rhs);
    void add_equal(const std::vector<std::pair<int, double>>& terms, double rhs);

    std::optional<std::vector<double>> solve(LpStats* stats = nullptr) const;

  private:
    int num_vars_;
    double tol_;
    std::vector<LinearRow> rows_;
};

}  // namespace reinverify
