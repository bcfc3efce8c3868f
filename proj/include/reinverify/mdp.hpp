#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace reinverify {

/// Tabular MDP with row-stochastic transitions and reward r(s, a, s').
struct FiniteMdp {
    int num_states = 0;
    int num_actions = 0;
    // transition[s][a][s'] and reward[s][a][s']
    std::vector<std::vector<std::vector<double>>> transition;
    std::vector<std::vector<std::vector<double>>> reward;
    double discount = 0.9;

    void validate() const;  // throws on non-stochastic rows or discount >= 1

    std::string to_json() const;
    static FiniteMdp from_json(const std::string& text);
};

/// Iterates the Bellman optimality operator until the sup-norm change drops
/// below tol*(1-gamma)/gamma, which bounds the distance to Q* by tol.
std::vector<std::vector<double>> value_iteration(const FiniteMdp& mdp, double tol = 1e-10);

/// Same MDP with reward shifted by gamma*psi(s') - psi(s).
FiniteMdp shape_mdp(const FiniteMdp& mdp, const std::vector<double>& potential);

/// Greedy action per state; states whose top two Q-values are closer than
/// `margin` are reported as ties (nullopt) and excluded from policy-equality
/// assertions.
std::vector<std::optional<int>> greedy_policy(const std::vector<std::vector<double>>& q,
                                              double margin = 1e-6);

/// Dirichlet(1) transition rows and uniform [-1,1] rewards, reproducible from
/// the seed.
FiniteMdp random_mdp(std::uint64_t seed, int max_states = 6, int max_actions = 4);

std::vector<double> random_potential(std::uint64_t seed, int num_states, double scale = 5.0);

}  // namespace reinverify
