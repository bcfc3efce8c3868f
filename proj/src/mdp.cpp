#include "reinverify/mdp.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "reinverify/errors.hpp"

namespace reinverify {

void FiniteMdp::validate() const {
    if (discount < 0 || discount >= 1)
        throw SemanticError("discount must lie in [0, 1)");
    if (static_cast<int>(transition.size()) != num_states ||
        static_cast<int>(reward.size()) != num_states)
        throw DimensionError("transition/reward tensors do not match num_states");
    for (int s = 0; s < num_states; ++s) {
        if (static_cast<int>(transition[s].size()) != num_actions)
            throw DimensionError("transition row count mismatch");
        for (int a = 0; a < num_actions; ++a) {
            double sum = 0;
            for (double p : transition[s][a]) {
                if (p < 0) throw SemanticError("negative transition probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw SemanticError("transition row (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") sums to " + std::to_string(sum));
        }
    }
}

std::vector<std::vector<double>> value_iteration(const FiniteMdp& mdp, double tol) {
    if (tol <= 0) throw SemanticError("tolerance must be positive");
    const int S = mdp.num_states, A = mdp.num_actions;
    const double gamma = mdp.discount;
    std::vector<std::vector<double>> q(S, std::vector<double>(A, 0.0));
    std::vector<std::vector<double>> next = q;
    // contraction: ||Q_t - Q*|| <= gamma/(1-gamma) * ||Q_{t+1} - Q_t||
    double stop = gamma > 0 ? tol * (1 - gamma) / gamma : tol;
    for (;;) {
        double change = 0;
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                double acc = 0;
                for (int s2 = 0; s2 < S; ++s2) {
                    double p = mdp.transition[s][a][s2];
                    if (p == 0) continue;
                    double best = q[s2][0];
                    for (int a2 = 1; a2 < A; ++a2) best = std::max(best, q[s2][a2]);
                    acc += p * (mdp.reward[s][a][s2] + gamma * best);
                }
                next[s][a] = acc;
                change = std::max(change, std::abs(acc - q[s][a]));
            }
        }
        q.swap(next);
        if (change < stop) break;
    }
    return q;
}

FiniteMdp shape_mdp(const FiniteMdp& mdp, const std::vector<double>& potential) {
    if (static_cast<int>(potential.size()) != mdp.num_states)
        throw DimensionError("potential length must equal the state count");
    FiniteMdp out = mdp;
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            for (int s2 = 0; s2 < mdp.num_states; ++s2)
                out.reward[s][a][s2] += mdp.discount * potential[s2] - potential[s];
    return out;
}

std::vector<std::optional<int>> greedy_policy(const std::vector<std::vector<double>>& q,
                                              double margin) {
    if (margin <= 0) throw SemanticError("margin must be positive");
    std::vector<std::optional<int>> policy;
    policy.reserve(q.size());
    for (const auto& row : q) {
        int best = 0;
        for (int a = 1; a < static_cast<int>(row.size()); ++a)
            if (row[a] > row[best]) best = a;
        double runner_up = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < static_cast<int>(row.size()); ++a)
            if (a != best) runner_up = std::max(runner_up, row[a]);
        if (row.size() > 1 && row[best] - runner_up < margin)
            policy.push_back(std::nullopt);  // ambiguous tie
        else
            policy.push_back(best);
    }
    return policy;
}

FiniteMdp random_mdp(std::uint64_t seed, int max_states, int max_actions) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> sdist(2, max_states), adist(1, max_actions);
    std::uniform_real_distribution<double> unit(0.0, 1.0), rdist(-1.0, 1.0),
        gdist(0.5, 0.95);
    std::exponential_distribution<double> expo(1.0);

    FiniteMdp mdp;
    mdp.num_states = sdist(rng);
    mdp.num_actions = adist(rng);
    mdp.discount = gdist(rng);
    mdp.transition.assign(mdp.num_states,
                          std::vector<std::vector<double>>(
                              mdp.num_actions, std::vector<double>(mdp.num_states, 0.0)));
    mdp.reward = mdp.transition;
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            // Dirichlet(1): normalized exponentials
            double sum = 0;
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                mdp.transition[s][a][s2] = expo(rng);
                sum += mdp.transition[s][a][s2];
            }
            double acc = 0;
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                mdp.transition[s][a][s2] /= sum;
                acc += mdp.transition[s][a][s2];
                mdp.reward[s][a][s2] = rdist(rng);
            }
            mdp.transition[s][a][mdp.num_states - 1] += 1.0 - acc;  // exact row sum
        }
    }
    mdp.validate();
    return mdp;
}

std::vector<double> random_potential(std::uint64_t seed, int num_states, double scale) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> psi(num_states);
    for (double& v : psi) v = dist(rng);
    return psi;
}

std::string FiniteMdp::to_json() const {
    nlohmann::json j;
    j["num_states"] = num_states;
    j["num_actions"] = num_actions;
    j["discount"] = discount;
    j["transition"] = transition;
    j["reward"] = reward;
    return j.dump();
}

FiniteMdp FiniteMdp::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    FiniteMdp mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.discount = j.at("discount").get<double>();
    mdp.transition = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
    mdp.reward = j.at("reward").get<std::vector<std::vector<std::vector<double>>>>();
    mdp.validate();
    return mdp;
}

}  // namespace reinverify
