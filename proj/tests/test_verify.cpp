#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "reinverify/drlp/parser.hpp"
#include "reinverify/drlp/printer.hpp"
#include "reinverify/errors.hpp"
#include "reinverify/simplex.hpp"
#include "reinverify/solver.hpp"
#include "test_helpers.hpp"
#include "verify_oracle.hpp"

using namespace reinverify;

namespace {

drlp::Script parse_script(const std::string& src) { return drlp::parse_concrete(src); }

// y = x + 0.4 through an always-active ReLU; paired with the additive
// transition this drifts upward and first breaks y <= 1.5 at the third step.
Network drift_net() {
    return testutil::make_net({{{{1.0}}, {10.0}, Activation::Relu},
                               {{{1.0}}, {-9.6}, Activation::Identity}});
}

const char* kDriftScript =
    "@Pre\n"
    "x_size = 1\n"
    "y_size = 1\n"
    "for i in range(k):\n"
    "    [-10] <= x[i] <= [10]\n"
    "x[0] == [0]\n"
    "for i in range(k - 1):\n"
    "    x[i+1] == x[i] + y[i]\n"
    "@Exp\n"
    "for i in range(k):\n"
    "    y[i] <= [1.5]\n";

// clamp(x, 0.2, 0.8) = relu(x - 0.2) - relu(x - 0.8) + 0.2
Network clamp_net() {
    return testutil::make_net({{{{1.0}, {1.0}}, {-0.2, -0.8}, Activation::Relu},
                               {{{1.0, -1.0}}, {0.2}, Activation::Identity}});
}

const char* kClampScript =
    "@Pre\n"
    "x_size = 1\n"
    "y_size = 1\n"
    "for i in range(k):\n"
    "    [0] <= x[i] <= [1]\n"
    "x[0] == [0.5]\n"
    "for i in range(k - 1):\n"
    "    x[i+1] == y[i]\n"
    "@Exp\n"
    "for i in range(k):\n"
    "    [0.1] <= y[i] <= [0.9]\n";

// y = 0.1 + 0.8*relu(1 - x): safe from x0=0.6 but provable only at k=2.
Network contraction_net() {
    return testutil::make_net({{{{-1.0}}, {1.0}, Activation::Relu},
                               {{{0.8}}, {0.1}, Activation::Identity}});
}

const char* kContractionScript =
    "@Pre\n"
    "x_size = 1\n"
    "y_size = 1\n"
    "for i in range(k):\n"
    "    [0] <= x[i] <= [2]\n"
    "x[0] == [0.6]\n"
    "for i in range(k - 1):\n"
    "    x[i+1] == y[i]\n"
    "@Exp\n"
    "for i in range(k):\n"
    "    [0.1] <= y[i] <= [0.7]\n";

// Checks a witness against the query within tol: precondition lits hold, the
// negated post holds, and y is the network's true output.
void check_witness(const ConstraintQuery& q, const Witness& w, double tol) {
    const int n = q.net->input_dim(), m = q.net->output_dim();
    std::vector<double> flat(q.depth * (n + m));
    for (int s = 0; s < q.depth; ++s) {
        std::vector<double> y = q.net->forward(w.x[s]);
        for (int j = 0; j < m; ++j) CHECK(std::abs(y[j] - w.y[s][j]) <= tol);
        for (int j = 0; j < n; ++j) flat[s * (n + m) + j] = w.x[s][j];
        for (int j = 0; j < m; ++j) flat[s * (n + m) + n + j] = y[j];
    }
    auto lit_ok = [&](const Lit& l) {
        double acc = 0;
        for (auto [v, c] : l.terms) acc += c * flat[v];
        return acc <= l.rhs + tol;
    };
    for (const Lit& l : q.linear.lits) CHECK(lit_ok(l));
    for (const Lit& l : q.neg_linear.lits) CHECK(lit_ok(l));
    auto group_ok = [&](const OrGroup& g) {
        for (const Conjunction& c : g.cases) {
            bool all = true;
            for (const Lit& l : c.lits) all = all && lit_ok(l);
            if (all) return true;
        }
        return false;
    };
    for (const OrGroup& g : q.or_groups) CHECK(group_ok(g));
    for (const OrGroup& g : q.neg_groups) CHECK(group_ok(g));
}

}  // namespace

TEST_CASE("build_query shapes the multi-step safety property at k=2") {
    std::ifstream in(testutil::corpus_path("safety_multistep.drlp"));
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string body = buf.str();
    std::string src = "a = 0\n" + body.substr(body.find("@Pre"));
    drlp::Script script = parse_script(src);
    std::mt19937_64 rng(5);
    Network net = testutil::random_relu_net(rng, {2, 3, 1});
    ConstraintQuery q = build_query(script, net, 2);
    CHECK(q.depth == 2);
    int unary = 0;
    for (const Lit& l : q.linear.lits) unary += l.terms.size() == 1;
    CHECK(unary >= 8 + 4);           // per-step boxes plus the initial equality pairs
    CHECK(q.or_groups.size() == 2);  // one implication pair at k=2
    REQUIRE(q.neg_groups.size() == 1);
    CHECK(q.neg_groups[0].cases.size() == 2);  // Or over step-wise violations
    CHECK(!q.exist_post);
}

TEST_CASE("exist posts negate into conjunctions") {
    drlp::Script script = parse_script(
        "@Pre\nx_size = 1\ny_size = 1\nfor i in range(k):\n    [0] <= x[i] <= [1]\n"
        "x[0] == [0]\n"
        "@Exp\nfor i in orange(k):\n    y[i] >= [0]\n");
    Network net = testutil::identity1();
    ConstraintQuery q = build_query(script, net, 2);
    CHECK(q.exist_post);
    CHECK(q.neg_groups.empty());
    CHECK(q.neg_linear.lits.size() == 2);  // one strict violation per step
}

TEST_CASE("arity mismatch is rejected") {
    drlp::Script script =
        parse_script("@Pre\nx_size = 2\ny_size = 1\n[0]*2 <= x[0] <= [1]*2\n@Exp\ny[0] >= [0]");
    CHECK_THROWS_AS(build_query(script, testutil::identity1(), 1), ArityError);
}

TEST_CASE("solve on the identity net") {
    Network net = testutil::identity1();
    drlp::Script holds =
        parse_script("@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= [0]");
    VerifyResult r = solve(build_query(holds, net, 1));
    CHECK(r.status == Status::Proven);

    drlp::Script fails =
        parse_script("@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= [0.5]");
    VerifyResult f = solve(build_query(fails, net, 1));
    REQUIRE(f.status == Status::Falsified);
    REQUIRE(f.witness.has_value());
    CHECK(f.witness->x[0][0] < 0.5);
    check_witness(build_query(fails, net, 1), *f.witness, 1e-6);
}

TEST_CASE("solver refuses tanh and interval mode handles it") {
    Network tanh_net = parse_network_json(
        R"({"layers": [{"weights": [[1.0]], "bias": [0], "activation": "tanh"},
                       {"weights": [[1.0]], "bias": [0], "activation": "identity"}]})");
    drlp::Script script =
        parse_script("@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] <= [1]");
    CHECK_THROWS_AS(solve(build_query(script, tanh_net, 1)), NonPiecewiseLinear);
    VerifyResult r = solve_interval(build_query(script, tanh_net, 1));
    CHECK(r.status == Status::Proven);  // tanh image is inside (-1, 1)
}

TEST_CASE("solve_interval proves easy properties and never falsifies") {
    Network net = testutil::identity1();
    drlp::Script holds =
        parse_script("@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= [-0.5]");
    CHECK(solve_interval(build_query(holds, net, 1)).status == Status::Proven);

    drlp::Script violated =
        parse_script("@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= [0.5]");
    CHECK(solve_interval(build_query(violated, net, 1)).status == Status::Unknown);
}

TEST_CASE("solve_interval requires finite input bounds") {
    drlp::Script script =
        parse_script("@Pre\nx_size = 1\ny_size = 1\nx[0] >= 0\n@Exp\ny[0] >= [0]");
    CHECK_THROWS_AS(solve_interval(build_query(script, testutil::identity1(), 1)),
                    UnboundedInput);
}

TEST_CASE("bmc finds the drift violation at depth exactly 3") {
    drlp::Script script = parse_script(kDriftScript);
    Network net = drift_net();
    VerifyResult r = bmc(script, net, 10);
    REQUIRE(r.status == Status::Falsified);
    CHECK(r.depth == 3);
    REQUIRE(r.witness.has_value());
    // forward-simulate: transitions are equalities, so the trace is pinned
    check_witness(build_query(script, net, 3), *r.witness, 1e-6);
    CHECK(r.witness->y[2][0] > 1.5 - 1e-6);
}

TEST_CASE("bmc at k_max=1 equals a one-shot solve") {
    drlp::Script script =
        parse_script("@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= [0.5]");
    Network net = testutil::identity1();
    VerifyResult via_bmc = bmc(script, net, 1);
    VerifyResult direct = solve(build_query(script, net, 1));
    CHECK(via_bmc.status == direct.status);
    CHECK(via_bmc.depth == 1);
}

TEST_CASE("k-induction proves the clamped system at k=1") {
    drlp::Script script = parse_script(kClampScript);
    Network net = clamp_net();
    VerifyResult r = k_induction(script, net, 5);
    REQUIRE(r.status == Status::Proven);
    CHECK(r.depth == 1);
    VerifyResult bounded = bmc(script, net, 10);
    CHECK(bounded.status == Status::Proven);
    CHECK(bounded.depth == 10);  // bounded guarantee is reported at k_max
}

TEST_CASE("interval mode on multi-step systems") {
    drlp::Script script = parse_script(kClampScript);
    Network net = clamp_net();
    // k=1: the point initial box propagates exactly
    CHECK(solve_interval(build_query(script, net, 1)).status == Status::Proven);
    // k>=2: the two ReLUs share one input, and plain interval arithmetic
    // drops that correlation, widening the output box past the post bounds;
    // Unknown is the honest incomplete answer (the complete solver proves it)
    for (int k = 2; k <= 4; ++k) {
        VerifyResult r = solve_interval(build_query(script, net, k));
        CHECK(r.status == Status::Unknown);
    }
    // the drifting system is beyond interval reasoning too: never Falsified
    drlp::Script drift_script = parse_script(kDriftScript);
    Network drift = drift_net();
    VerifyResult u = solve_interval(build_query(drift_script, drift, 3));
    CHECK(u.status == Status::Unknown);
}

TEST_CASE("contracting system needs induction depth 2") {
    drlp::Script script = parse_script(kContractionScript);
    Network net = contraction_net();
    VerifyResult r = k_induction(script, net, 5);
    REQUIRE(r.status == Status::Proven);
    CHECK(r.depth == 2);
    // monotonicity: bmc can never falsify through 2*k
    CHECK(bmc(script, net, 4).status == Status::Proven);
}

TEST_CASE("k-induction falsifies unsafe systems via the base case") {
    drlp::Script script = parse_script(kDriftScript);
    Network net = drift_net();
    VerifyResult ki = k_induction(script, net, 10);
    VerifyResult bm = bmc(script, net, 10);
    REQUIRE(ki.status == Status::Falsified);
    CHECK(ki.depth == bm.depth);
    REQUIRE(ki.witness.has_value());
    REQUIRE(bm.witness.has_value());
    CHECK(ki.witness->x == bm.witness->x);  // identical deterministic witness
}

TEST_CASE("k-induction rejects exist posts") {
    drlp::Script script = parse_script(
        "@Pre\nx_size = 1\ny_size = 1\nfor i in range(k):\n    [0] <= x[i] <= [1]\n"
        "x[0] == [0]\n@Exp\nfor i in orange(k):\n    y[i] >= [0]\n");
    CHECK_THROWS_AS(k_induction(script, testutil::identity1(), 2), NotInductible);
}

TEST_CASE("cycle exclusion separates looping from progressing bad traces") {
    // constant action net y = -3: every step violates "eventually y >= -2"
    Network bad = testutil::make_net({{{{0.0}}, {-3.0}, Activation::Identity}});
    const char* base =
        "@Pre\nx_size = 1\ny_size = 1\n"
        "for i in range(k):\n    [-1] <= x[i] <= [1]\n"
        "x[0] == [0]\n"
        "for i in range(k - 1):\n    x[i+1] == x[i]\n";
    const char* cycles =
        "for i in range(k):\n    for j in range(i):\n        x[i] != x[j]\n";
    const char* post = "@Exp\nfor i in orange(k):\n    y[i] >= [-2]\n";

    // without cycle exclusion the constant trace is an all-bad counterexample
    drlp::Script plain = parse_script(std::string(base) + post);
    VerifyResult f = solve(build_query(plain, bad, 3));
    REQUIRE(f.status == Status::Falsified);
    check_witness(build_query(plain, bad, 3), *f.witness, 1e-6);

    // with cycle exclusion the only trajectory repeats its state, so no
    // cycle-free all-bad trace exists
    drlp::Script guarded = parse_script(std::string(base) + cycles + post);
    CHECK(solve(build_query(guarded, bad, 3)).status == Status::Proven);

    // a drifting variant keeps states distinct: falsified even with the guard
    const char* drift_base =
        "@Pre\nx_size = 1\ny_size = 1\n"
        "for i in range(k):\n    [-1] <= x[i] <= [1]\n"
        "x[0] == [0]\n"
        "for i in range(k - 1):\n    x[i+1] == x[i] + [0.1]\n";
    drlp::Script drifting = parse_script(std::string(drift_base) + cycles + post);
    VerifyResult g = solve(build_query(drifting, bad, 3));
    REQUIRE(g.status == Status::Falsified);
    check_witness(build_query(drifting, bad, 3), *g.witness, 1e-6);
}

TEST_CASE("node budget exhaustion yields Unknown") {
    // |x| over [-1,1] has two genuinely unstable neurons, so deciding the
    // property requires branching past the root
    Network vnet = testutil::make_net({{{{1.0}, {-1.0}}, {0.0, 0.0}, Activation::Relu},
                                       {{{1.0, 1.0}}, {0.0}, Activation::Identity}});
    drlp::Script script = parse_script(
        "@Pre\nx_size = 1\ny_size = 1\n[-1] <= x[0] <= [1]\n@Exp\ny[0] >= [0.5]\n");
    SolveOptions opts;
    opts.node_budget = 1;
    VerifyResult r = solve(build_query(script, vnet, 1), opts);
    CHECK(r.status == Status::Unknown);
    // with the default budget the same query is decided
    CHECK(solve(build_query(script, vnet, 1)).status == Status::Falsified);
}

TEST_CASE("solve agrees with the activation-pattern enumeration oracle") {
    std::mt19937_64 rng(2024);
    int falsified = 0, proven = 0;
    for (int trial = 0; trial < 60; ++trial) {
        testutil::RandomInstance inst = testutil::random_box_instance(rng);
        ConstraintQuery q = build_query(inst.script, inst.net, 1);
        VerifyResult r = solve(q);
        Status expect = testutil::oracle_solve(q);
        INFO("trial ", trial);
        REQUIRE(r.status == expect);
        if (r.status == Status::Falsified) {
            ++falsified;
            check_witness(q, *r.witness, 1e-6);
        } else {
            ++proven;
        }
    }
    CHECK(falsified > 5);
    CHECK(proven > 5);
}

TEST_CASE("solve_interval never returns Falsified") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 40; ++trial) {
        testutil::RandomInstance inst = testutil::random_box_instance(rng);
        ConstraintQuery q = build_query(inst.script, inst.net, 1);
        VerifyResult r = solve_interval(q);
        CHECK(r.status != Status::Falsified);
        // soundness: a Proven interval verdict must agree with the complete solver
        if (r.status == Status::Proven) CHECK(solve(q).status == Status::Proven);
    }
}

TEST_CASE("bmc agrees with forward simulation on deterministic closed loops") {
    // x_{i+1} == y_i with a point initial state pins the whole trajectory,
    // so plain simulation is an exact oracle for the bmc verdict and depth.
    std::mt19937_64 rng(13579);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int k_max = 6;
    for (int trial = 0; trial < 30; ++trial) {
        Network net = testutil::random_relu_net(rng, {1, 3, 1});
        double x0 = 0.5 * u(rng);
        double box = 2.0;
        double threshold = u(rng);

        std::ostringstream src;
        src << "@Pre\nx_size = 1\ny_size = 1\n"
            << "for i in range(k):\n    [" << -box << "] <= x[i] <= [" << box << "]\n"
            << "x[0] == [" << drlp::format_number(x0) << "]\n"
            << "for i in range(k - 1):\n    x[i+1] == y[i]\n"
            << "@Exp\nfor i in range(k):\n    y[i] <= [" << drlp::format_number(threshold)
            << "]\n";
        drlp::Script script = parse_script(src.str());

        // simulate: first depth k where the (unique) k-step trajectory stays
        // inside the box and some step violates the threshold
        int expected_depth = -1;
        {
            std::vector<double> xs{x0};
            std::vector<double> ys;
            for (int t = 0; t < k_max; ++t) {
                ys.push_back(net.forward({xs[t]})[0]);
                xs.push_back(ys[t]);
            }
            for (int k = 1; k <= k_max && expected_depth < 0; ++k) {
                bool in_box = true;
                for (int t = 0; t < k; ++t) in_box = in_box && std::abs(xs[t]) <= box;
                bool violated = false;
                for (int t = 0; t < k; ++t) violated = violated || ys[t] > threshold;
                if (in_box && violated) expected_depth = k;
            }
        }

        VerifyResult r = bmc(script, net, k_max);
        INFO("trial ", trial, " expected depth ", expected_depth);
        if (expected_depth > 0) {
            REQUIRE(r.status == Status::Falsified);
            CHECK(r.depth == expected_depth);
            check_witness(build_query(script, net, r.depth), *r.witness, 1e-6);
        } else {
            CHECK(r.status == Status::Proven);
        }
    }
}

TEST_CASE("determinism: identical inputs give identical outcomes") {
    std::mt19937_64 rng(7);
    testutil::RandomInstance inst = testutil::random_box_instance(rng);
    ConstraintQuery q = build_query(inst.script, inst.net, 1);
    VerifyResult a = solve(q);
    VerifyResult b = solve(q);
    CHECK(a.status == b.status);
    CHECK(a.depth == b.depth);
    if (a.witness) {
        REQUIRE(b.witness.has_value());
        CHECK(a.witness->x == b.witness->x);
    }
}
