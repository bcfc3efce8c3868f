#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "reinverify/breakpoints.hpp"
#include "reinverify/drlp/printer.hpp"
#include "reinverify/errors.hpp"
#include "test_helpers.hpp"

using namespace reinverify;

namespace {

drlp::Template threshold_template() {
    // identity net semantics: Proven iff z <= 0 over x in [0, 1]
    auto r = drlp::parse(
        "@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= z\n");
    return std::get<drlp::Template>(r);
}

VerifyFn make_verifier(const Network& net, long* probes = nullptr) {
    return [&net, probes](const drlp::Script& s) {
        if (probes) ++*probes;
        return bmc(s, net, 1);
    };
}

}  // namespace

TEST_CASE("binary search brackets the identity-net threshold flip") {
    Network net = testutil::identity1();
    drlp::Template tmpl = threshold_template();
    SearchSpec spec;
    spec.vars["z"] = VarSpec{-1, 1, 0.01, SearchMethod::Binary, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(net));
    REQUIRE(rep.breakpoints.size() == 1);
    const Breakpoint& bp = rep.breakpoints[0];
    CHECK(bp.variable == "z");
    CHECK(bp.value_hi - bp.value_lo <= 0.01 + 1e-12);
    CHECK(bp.value_lo <= 0.0 + 0.01);
    CHECK(bp.value_hi >= 0.0 - 0.01);
    CHECK(bp.from_status == Status::Proven);
    CHECK(bp.to_status == Status::Falsified);
}

TEST_CASE("all-proven slices report no breakpoint") {
    Network net = testutil::identity1();
    drlp::Template tmpl = threshold_template();
    SearchSpec spec;
    spec.vars["z"] = VarSpec{-5, -2, 0.01, SearchMethod::Binary, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(net));
    CHECK(rep.breakpoints.empty());
}

TEST_CASE("binary bracket matches a 10x-finer linear scan on seeded monotone templates") {
    std::mt19937_64 rng(321);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 12; ++trial) {
        double w = u(rng), b = u(rng) - 1.0;
        Network net = testutil::affine1(w, b);  // min over [0,1] at x=0: flip z* = b
        drlp::Template tmpl = threshold_template();
        double prec = 0.02;
        SearchSpec spec;
        spec.vars["z"] = VarSpec{b - 1.0, b + 1.0, prec, SearchMethod::Binary, 2.0};

        long probes = 0;
        SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(net, &probes));
        REQUIRE(rep.breakpoints.size() == 1);
        // probe bound: ceil(log2(range/precision)) + 2
        long bound = static_cast<long>(std::ceil(std::log2(2.0 / prec))) + 2;
        INFO("trial ", trial, " probes ", probes, " bound ", bound);
        CHECK(probes <= bound);

        SearchSpec fine;
        fine.vars["z"] = VarSpec{b - 1.0, b + 1.0, prec / 10, SearchMethod::Linear, 2.0};
        SearchReport lin = find_breakpoints(tmpl, fine, make_verifier(net));
        REQUIRE(lin.breakpoints.size() == 1);
        double truth = (lin.breakpoints[0].value_lo + lin.breakpoints[0].value_hi) / 2;
        CHECK(rep.breakpoints[0].value_lo - 1e-9 <= truth);
        CHECK(truth <= rep.breakpoints[0].value_hi + 1e-9);
    }
}

TEST_CASE("linear method records every flip of a V-shaped verdict") {
    // |x| <= z over x in [-1, 1] is Proven iff z >= 1: single flip; but
    // sliced pre-bounds give two flips for the slice template below.
    Network vnet = testutil::make_net({{{{1.0}, {-1.0}}, {0.0, 0.0}, Activation::Relu},
                                       {{{1.0, 1.0}}, {0.0}, Activation::Identity}});
    // property: x in [a-0.1, a+0.1] => y <= 0.5; holds iff |a| <= 0.4
    auto r = drlp::parse(
        "@Pre\nx_size = 1\ny_size = 1\n[a - 0.1] <= x[0] <= [a + 0.1]\n@Exp\ny[0] <= [0.5]\n");
    drlp::Template tmpl = std::get<drlp::Template>(r);
    SearchSpec spec;
    spec.vars["a"] = VarSpec{-1, 1, 0.05, SearchMethod::Linear, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(vnet));
    CHECK(rep.breakpoints.size() == 2);
    BreaklineSummary sum = analyze_breakpoints(rep.breakpoints);
    CHECK(!sum.monotone);
}

TEST_CASE("iterative method multiplies until the flip then bisects") {
    Network net = testutil::identity1();
    // Proven iff z >= 1 (max y over [0,1] is 1): searching upward from 0.1
    auto r = drlp::parse(
        "@Pre\nx_size = 1\ny_size = 1\n[0] <= x[0] <= [1]\n@Exp\ny[0] <= z\n");
    drlp::Template tmpl = std::get<drlp::Template>(r);
    SearchSpec spec;
    spec.vars["z"] = VarSpec{0.1, 16.0, 0.01, SearchMethod::Iterative, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(net));
    REQUIRE(rep.breakpoints.size() == 1);
    CHECK(rep.breakpoints[0].value_lo <= 1.0 + 0.01);
    CHECK(rep.breakpoints[0].value_hi >= 1.0 - 0.01);
    CHECK(rep.breakpoints[0].value_hi - rep.breakpoints[0].value_lo <= 0.01 + 1e-12);
}

TEST_CASE("outer variables step linearly and label slices") {
    Network sum2 = testutil::make_net({{{{1.0, 1.0}}, {0.0}, Activation::Identity}});
    // x0 in [a, a+0.5], x1 in [0, 0.5] => y >= z; flip z* = a
    auto r = drlp::parse(
        "@Pre\nx_size = 2\ny_size = 1\n[a, 0] <= x[0] <= [a + 0.5, 0.5]\n@Exp\ny[0] >= z\n");
    drlp::Template tmpl = std::get<drlp::Template>(r);
    SearchSpec spec;
    spec.vars["a"] = VarSpec{0, 1, 0.5, SearchMethod::Linear, 2.0};  // slices 0, 0.5, 1
    spec.vars["z"] = VarSpec{-1, 2, 0.01, SearchMethod::Binary, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(sum2));
    REQUIRE(rep.breakpoints.size() == 3);
    for (const Breakpoint& bp : rep.breakpoints) {
        double a = bp.slice.at("a");
        double mid = (bp.value_lo + bp.value_hi) / 2;
        CHECK(std::abs(mid - a) <= 0.011);
    }
    BreaklineSummary sum = analyze_breakpoints(rep.breakpoints);
    CHECK(sum.monotone);
    CHECK(sum.by_variable.at("z").size() == 3);
}

TEST_CASE("breakpoints re-verify to their recorded statuses") {
    Network net = testutil::identity1();
    drlp::Template tmpl = threshold_template();
    SearchSpec spec;
    spec.vars["z"] = VarSpec{-1, 1, 0.01, SearchMethod::Binary, 2.0};
    VerifyFn verify = make_verifier(net);
    SearchReport rep = find_breakpoints(tmpl, spec, verify);
    for (const Breakpoint& bp : rep.breakpoints) {
        auto lo = drlp::concretize(tmpl, bp.variable, bp.value_lo);
        auto hi = drlp::concretize(tmpl, bp.variable, bp.value_hi);
        CHECK(verify(std::get<drlp::Script>(lo)).status == bp.from_status);
        CHECK(verify(std::get<drlp::Script>(hi)).status == bp.to_status);
        CHECK(bp.from_status != bp.to_status);
    }
}

TEST_CASE("spec validation errors") {
    drlp::Template tmpl = threshold_template();
    SearchSpec empty;
    CHECK_THROWS_AS(find_breakpoints(tmpl, empty, make_verifier(testutil::identity1())),
                    EmptySpec);
    SearchSpec bad;
    bad.vars["z"] = VarSpec{1, -1, 0.01, SearchMethod::Binary, 2.0};
    CHECK_THROWS_AS(find_breakpoints(tmpl, bad, make_verifier(testutil::identity1())),
                    EmptySpec);
    SearchSpec extra;
    extra.vars["z"] = VarSpec{-1, 1, 0.01, SearchMethod::Binary, 2.0};
    extra.vars["w"] = VarSpec{-1, 1, 0.01, SearchMethod::Binary, 2.0};
    CHECK_THROWS_AS(find_breakpoints(tmpl, extra, make_verifier(testutil::identity1())),
                    EmptySpec);
}

TEST_CASE("unknown verdicts abort only the affected slice") {
    Network net = testutil::identity1();
    auto r = drlp::parse(
        "@Pre\nx_size = 1\ny_size = 1\n[a] <= x[0] <= [a + 1]\n@Exp\ny[0] >= z\n");
    drlp::Template tmpl = std::get<drlp::Template>(r);
    SearchSpec spec;
    spec.vars["a"] = VarSpec{0, 1, 1.0, SearchMethod::Linear, 2.0};  // slices a=0, a=1
    spec.vars["z"] = VarSpec{-1, 3, 0.01, SearchMethod::Binary, 2.0};
    int calls = 0;
    VerifyFn flaky = [&](const drlp::Script& s) {
        VerifyResult r0 = bmc(s, net, 1);
        // poison the first slice only (a=0)
        if (s.find_var("a")->value.scalar() == 0.0) r0.status = Status::Unknown;
        ++calls;
        return r0;
    };
    SearchReport rep = find_breakpoints(tmpl, spec, flaky);
    CHECK(rep.aborted_slices.size() == 1);
    REQUIRE(rep.breakpoints.size() == 1);  // slice a=1 still searched
    CHECK(rep.breakpoints[0].slice.at("a") == 1.0);
}

TEST_CASE("counterexample value reuse still lands in the bracket") {
    // the witness for y >= z on the identity net pins z to the witness x,
    // which must stay inside the current bracket or fall back to midpoint
    Network net = testutil::identity1();
    drlp::Template tmpl = threshold_template();
    SearchSpec spec;
    spec.vars["z"] = VarSpec{-1, 1, 1e-4, SearchMethod::Binary, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, make_verifier(net));
    REQUIRE(rep.breakpoints.size() == 1);
    CHECK(std::abs((rep.breakpoints[0].value_lo + rep.breakpoints[0].value_hi) / 2) <= 1e-3);
}

TEST_CASE("binary search over a multi-step template uses deep counterexamples") {
    // y = x + 0.4 with additive transitions: over 3 steps from x0 = 0 the
    // outputs are 0.4, 0.8 and 1.6, so "y <= c at every step" flips at 1.6
    Network net = testutil::make_net({{{{1.0}}, {10.0}, Activation::Relu},
                                      {{{1.0}}, {-9.6}, Activation::Identity}});
    auto r = drlp::parse(
        "@Pre\nx_size = 1\ny_size = 1\n"
        "for i in range(k):\n    [-10] <= x[i] <= [10]\n"
        "x[0] == [0]\n"
        "for i in range(k - 1):\n    x[i+1] == x[i] + y[i]\n"
        "@Exp\nfor i in range(k):\n    y[i] <= c\n");
    drlp::Template tmpl = std::get<drlp::Template>(r);
    VerifyFn verify = [&](const drlp::Script& s) { return bmc(s, net, 3); };
    SearchSpec spec;
    spec.vars["c"] = VarSpec{0.0, 3.0, 0.005, SearchMethod::Binary, 2.0};
    SearchReport rep = find_breakpoints(tmpl, spec, verify);
    REQUIRE(rep.breakpoints.size() == 1);
    double mid = (rep.breakpoints[0].value_lo + rep.breakpoints[0].value_hi) / 2;
    CHECK(mid == doctest::Approx(1.6).epsilon(0.01));
}

TEST_CASE("analyze_breakpoints on empty input") {
    BreaklineSummary sum = analyze_breakpoints({});
    CHECK(sum.total == 0);
    CHECK(sum.monotone);
    CHECK(sum.by_variable.empty());
}
