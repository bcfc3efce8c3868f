#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "reinverify/drlp/classify.hpp"
#include "reinverify/drlp/parser.hpp"
#include "reinverify/drlp/printer.hpp"
#include "reinverify/errors.hpp"
#include "test_helpers.hpp"

using namespace reinverify;
using namespace reinverify::drlp;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing file ", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const Script& as_script(const ParseResult& r) {
    REQUIRE(std::holds_alternative<Script>(r));
    return std::get<Script>(r);
}

const Template& as_template(const ParseResult& r) {
    REQUIRE(std::holds_alternative<Template>(r));
    return std::get<Template>(r);
}

}  // namespace

TEST_CASE("degenerate interval script parses concrete") {
    ParseResult r = parse("@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [0]\n@Exp\ny[0] >= [0]");
    const Script& s = as_script(r);
    CHECK(s.x_size == 1);
    CHECK(s.y_size == 1);
    REQUIRE(s.pre.children.size() == 1);
    CHECK(s.pre.children[0].kind == Node::Kind::Compare);
    CHECK(s.pre.children[0].cmp.ops.size() == 2);
}

TEST_CASE("multi-step safety script parses as a template with iterables") {
    ParseResult r = parse(read_file(testutil::corpus_path("safety_multistep.drlp")));
    const Template& t = as_template(r);
    CHECK(t.free_parameters == std::vector<std::string>{"a"});
    const Assign* a = t.script.find_var("a");
    REQUIRE(a);
    CHECK(a->iterable);
    CHECK(a->value.items == std::vector<double>{0, 1});
    CHECK(t.script.x_size == 2);
    CHECK(t.script.y_size == 1);
}

TEST_CASE("orange loop expands to an Or over iterations") {
    ParseResult r = parse(
        "@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [1]\n"
        "@Exp\nfor i in orange(0, 3):\n    y[0] >= [0]\n    y[0] <= [1]\n");
    const Script& s = as_script(r);
    REQUIRE(s.post.children.size() == 1);
    const Node& loop = s.post.children[0];
    CHECK(loop.kind == Node::Kind::ForLoop);
    CHECK(loop.loop_or);
    CHECK(loop.loop_var == "i");
    CHECK(loop.loop_range.size() == 2);
    CHECK(loop.children.size() == 2);  // each iteration is an And of its statements
}

TEST_CASE("every corpus file parses and round-trips") {
    namespace fs = std::filesystem;
    int count = 0;
    for (const auto& entry : fs::directory_iterator(std::string(TESTS_DIR) + "/corpus")) {
        if (entry.path().extension() != ".drlp") continue;
        ++count;
        INFO("file ", entry.path().filename().string());
        std::string source = read_file(entry.path().string());
        ParseResult first = parse(source);
        std::string printed = std::holds_alternative<Script>(first)
                                  ? to_source(std::get<Script>(first))
                                  : to_source(std::get<Template>(first));
        ParseResult second = parse(printed);
        CHECK(first == second);
    }
    CHECK(count >= 20);
}

TEST_CASE("expand_iterables produces the row-major cartesian product") {
    ParseResult r = parse(read_file(testutil::corpus_path("stress_iterables.drlp")));
    const Template& t = as_template(r);
    std::vector<Script> scripts = expand_iterables(t);
    REQUIRE(scripts.size() == 4);
    std::vector<std::pair<double, double>> seen;
    for (const Script& s : scripts) {
        CHECK(s.find_var("a")->value.scalar() == 1);
        seen.emplace_back(s.find_var("b")->value.scalar(), s.find_var("c")->value.scalar());
    }
    std::vector<std::pair<double, double>> want{{2, 4}, {2, 5}, {3, 4}, {3, 5}};
    CHECK(seen == want);
}

TEST_CASE("expand_iterables identity and singleton cases") {
    ParseResult r = parse("b = 7\n@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [b]\n@Exp\ny[0] >= [0]");
    const Script& s = as_script(r);  // no iterables, already concrete
    Template t{s, {}};
    std::vector<Script> expanded = expand_iterables(t);
    REQUIRE(expanded.size() == 1);
    CHECK(expanded[0] == s);

    ParseResult r2 =
        parse("_b = [7]\n@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [b]\n@Exp\ny[0] >= [0]");
    std::vector<Script> one = expand_iterables(as_template(r2));
    REQUIRE(one.size() == 1);
    CHECK(one[0].find_var("b")->value.scalar() == 7);
}

TEST_CASE("empty iterable list is an expansion error") {
    ParseResult r = parse("_b = []\n@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [b]\n@Exp\ny[0] >= [0]");
    CHECK_THROWS_AS(expand_iterables(as_template(r)), ExpansionError);
}

TEST_CASE("concretize reduces arity and rewrites the post") {
    ParseResult r = parse(read_file(testutil::corpus_path("stress_template.drlp")));
    const Template& t = as_template(r);
    CHECK(t.free_parameters == std::vector<std::string>{"z"});

    ParseResult c = concretize(t, "z", -5);
    const Script& s = as_script(c);
    CHECK(s.find_var("z")->value.scalar() == -5);

    CHECK_THROWS_AS(concretize(t, "nope", 1), UnknownParameter);
}

TEST_CASE("concretize over two parameters goes template -> template -> script") {
    ParseResult r = parse(
        "@Pre\nx_size=1\ny_size=1\n[a] <= x[0] <= [b]\n@Exp\ny[0] >= [0]");
    const Template& t = as_template(r);
    CHECK(t.free_parameters.size() == 2);
    ParseResult mid = concretize(t, "a", 0);
    const Template& t2 = as_template(mid);
    CHECK(t2.free_parameters == std::vector<std::string>{"b"});
    ParseResult done = concretize(t2, "b", 1);
    CHECK(std::holds_alternative<Script>(done));
}

TEST_CASE("syntax errors carry line and column") {
    try {
        parse("@Pre\nx_size=1\ny_size=1\n[0] <= <= x[0]\n@Exp\ny[0] >= [0]");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line == 4);
        CHECK(e.column > 1);
    }
}

TEST_CASE("semantic rejections") {
    // non-affine: product of two model variables
    CHECK_THROWS_AS(
        parse("@Pre\nx_size=1\ny_size=1\nx[0] * x[0] <= [1]\n@Exp\ny[0] >= [0]"),
        SemanticError);
    // approx without a declared tolerance
    CHECK_THROWS_AS(parse("@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [1]\n@Exp\ny[0] ~= 0"),
                    SemanticError);
    // feature subscript beyond the declared size
    CHECK_THROWS_AS(
        parse("@Pre\nx_size=2\ny_size=1\nx[0][3] <= 1\n@Exp\ny[0] >= [0]"),
        SemanticError);
    // unbound identifier in a dimension position
    CHECK_THROWS_AS(parse("@Pre\nx_size=n\ny_size=1\n[0] <= x[0] <= [1]\n@Exp\ny[0] >= [0]"),
                    SemanticError);
    // no way to infer x_size: no width hint and no feature subscript
    CHECK_THROWS_AS(parse("@Pre\ny_size=1\nx[0] >= 0\n@Exp\ny[0] >= [0]"), SemanticError);
    // maximal feature subscripts are a valid inference route
    ParseResult inferred = parse("@Pre\ny_size=1\nx[0][0] + x[0][1] <= 1\n@Exp\ny[0] >= [0]");
    CHECK(std::get<Script>(inferred).x_size == 2);
}

TEST_CASE("size inference from widths and subscripts") {
    ParseResult r = parse(read_file(testutil::corpus_path("stress_inference.drlp")));
    const Script& s = as_script(r);
    CHECK(s.x_size == 3);
    CHECK(s.y_size == 2);
    CHECK(!s.x_size_declared);
}

TEST_CASE("classify multi-step safety: S, I, T and a Forall post") {
    ParseResult r = parse(read_file(testutil::corpus_path("safety_multistep.drlp")));
    Script s = expand_iterables(as_template(r))[0];
    PartitionedProperty p = classify_parts(s);
    CHECK(p.state_boundary.size() == 1);
    CHECK(p.initial.size() == 1);
    CHECK(p.transition.size() == 1);  // the loop holding both implication pairs
    CHECK(p.other.empty());
    CHECK(!p.exist_post);
    CHECK(p.warnings.empty());
}

TEST_CASE("classify multi-step liveness: cycle exclusion lands in C, post is Exist") {
    ParseResult r = parse(read_file(testutil::corpus_path("liveness_multistep.drlp")));
    Script s = expand_iterables(as_template(r))[0];
    PartitionedProperty p = classify_parts(s);
    CHECK(p.state_boundary.size() == 1);
    CHECK(p.initial.size() == 1);
    CHECK(p.transition.size() == 1);
    CHECK(p.other.size() == 1);
    CHECK(p.exist_post);
}

TEST_CASE("classify one-shot script: only I and Q") {
    ParseResult r = parse(read_file(testutil::corpus_path("mountain_car_safety.drlp")));
    PartitionedProperty p = classify_parts(as_script(r));
    CHECK(p.state_boundary.empty());
    CHECK(p.initial.size() == 1);
    CHECK(p.transition.empty());
    CHECK(p.other.empty());
    CHECK(!p.exist_post);
}

TEST_CASE("classification is a partition of the precondition conjuncts") {
    for (const char* name : {"safety_multistep.drlp", "liveness_multistep.drlp", "reach_target_a.drlp",
                             "stay_in_region.drlp", "stress_slices.drlp"}) {
        ParseResult r = parse(read_file(testutil::corpus_path(name)));
        Script s;
        if (auto* t = std::get_if<Template>(&r)) s = expand_iterables(*t)[0];
        else s = std::get<Script>(r);
        PartitionedProperty p = classify_parts(s);
        INFO("file ", name);
        CHECK(p.state_boundary.size() + p.initial.size() + p.transition.size() +
                  p.other.size() ==
              s.pre.children.size());
    }
}

TEST_CASE("ast json dump carries structure") {
    ParseResult r = parse(read_file(testutil::corpus_path("safety_multistep.drlp")));
    std::string j = ast_json(as_template(r));
    CHECK(j.find("\"free_parameters\"") != std::string::npos);
    CHECK(j.find("range_loop") != std::string::npos);
    CHECK(j.find("implies") != std::string::npos);
}

TEST_CASE("comments and blank lines are skipped") {
    ParseResult r = parse(read_file(testutil::corpus_path("stress_comments.drlp")));
    const Script& s = as_script(r);
    CHECK(s.find_var("a")->value.scalar() == 0.25);
}

TEST_CASE("the corpus exercises every grammar production") {
    namespace fs = std::filesystem;
    struct Features {
        bool range_loop = false, orange_loop = false, with_block_or = false;
        bool implies = false, and_call = false, or_call = false;
        bool slice2 = false, slice3 = false, double_subscript = false;
        bool neq = false, approx = false, not_approx = false;
        bool repetition = false, arithmetic = false, iterable = false;
        bool declared_size = false, inferred_size = false, nested_loop = false;
    } seen;

    std::function<void(const Expr&)> scan_expr = [&](const Expr& e) {
        if (e.kind == Expr::Kind::Binary) {
            seen.arithmetic = true;
            if (e.op == '*' &&
                (e.elems[0].kind == Expr::Kind::List || e.elems[1].kind == Expr::Kind::List))
                seen.repetition = true;
        }
        if (e.kind == Expr::Kind::IoRef) {
            if (e.subs.size() == 2) seen.double_subscript = true;
            for (const Subscript& s : e.subs) {
                if (s.parts.size() == 2) seen.slice2 = true;
                if (s.parts.size() == 3) seen.slice3 = true;
            }
        }
        for (const Expr& el : e.elems) scan_expr(el);
        for (const Subscript& s : e.subs)
            for (const Expr& p : s.parts) scan_expr(p);
    };
    std::function<void(const Node&, bool)> scan_node = [&](const Node& n, bool inside_loop) {
        switch (n.kind) {
            case Node::Kind::ForLoop:
                (n.loop_or ? seen.orange_loop : seen.range_loop) = true;
                if (inside_loop) seen.nested_loop = true;
                for (const Expr& e : n.loop_range) scan_expr(e);
                for (const Node& c : n.children) scan_node(c, true);
                return;
            case Node::Kind::Or:
                seen.or_call = seen.with_block_or = true;
                break;
            case Node::Kind::And: seen.and_call = true; break;
            case Node::Kind::Implies: seen.implies = true; break;
            case Node::Kind::Compare:
                for (Cmp op : n.cmp.ops) {
                    if (op == Cmp::NE) seen.neq = true;
                    if (op == Cmp::Approx) seen.approx = true;
                    if (op == Cmp::NotApprox) seen.not_approx = true;
                }
                for (const Expr& e : n.cmp.operands) scan_expr(e);
                break;
        }
        for (const Node& c : n.children) scan_node(c, inside_loop);
    };

    for (const auto& entry : fs::directory_iterator(std::string(TESTS_DIR) + "/corpus")) {
        if (entry.path().extension() != ".drlp") continue;
        ParseResult r = parse(read_file(entry.path().string()));
        const Script& s = std::holds_alternative<Script>(r) ? std::get<Script>(r)
                                                            : std::get<Template>(r).script;
        for (const Assign& a : s.variables) seen.iterable |= a.iterable;
        seen.declared_size |= s.x_size_declared;
        seen.inferred_size |= !s.x_size_declared || !s.y_size_declared;
        scan_node(s.pre, false);
        scan_node(s.post, false);
    }
    CHECK(seen.range_loop);
    CHECK(seen.orange_loop);
    CHECK(seen.with_block_or);
    CHECK(seen.implies);
    CHECK(seen.and_call);
    CHECK(seen.or_call);
    CHECK(seen.slice2);
    CHECK(seen.slice3);
    CHECK(seen.double_subscript);
    CHECK(seen.neq);
    CHECK(seen.approx);
    CHECK(seen.not_approx);
    CHECK(seen.repetition);
    CHECK(seen.arithmetic);
    CHECK(seen.iterable);
    CHECK(seen.declared_size);
    CHECK(seen.inferred_size);
    CHECK(seen.nested_loop);
}

TEST_CASE("ambiguous conjuncts are reported and fall into C") {
    // x[0] and x[i] in one conjunct mixes the initial and per-step roles
    Script s = parse_concrete(
        "@Pre\nx_size = 1\ny_size = 1\n"
        "for i in range(k):\n    x[i] - x[0] <= [1]\n"
        "[0] <= x[0] <= [1]\n"
        "@Exp\ny[0] >= [0]\n");
    PartitionedProperty p = classify_parts(s);
    CHECK(p.other.size() == 1);
    CHECK(p.warnings.size() == 1);
    CHECK(p.initial.size() == 1);
}

TEST_CASE("mutated sources fail with typed errors, never crashes") {
    std::string base = read_file(testutil::corpus_path("safety_multistep.drlp"));
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
    std::uniform_int_distribution<int> mode(0, 2);
    std::uniform_int_distribution<int> ch(32, 126);
    for (int trial = 0; trial < 300; ++trial) {
        std::string s = base;
        switch (mode(rng)) {
            case 0: s.erase(pos(rng), 1); break;
            case 1: s[pos(rng)] = static_cast<char>(ch(rng)); break;
            case 2: s.insert(pos(rng), 1, static_cast<char>(ch(rng))); break;
        }
        try {
            parse(s);  // often still valid; that is fine
        } catch (const SyntaxError&) {
        } catch (const SemanticError&) {
        } catch (const ExpansionError&) {
        }
        // anything else (crash, bad_alloc, logic_error) fails the test
    }
    CHECK(true);
}

TEST_CASE("unicode comparison glyphs parse as aliases") {
    ParseResult a = parse("y_eps = 0.1\n@Pre\nx_size=1\ny_size=1\n[0] ≤ x[0] ≤ [1]\n"
                          "@Exp\ny[0] ≈ 0.5");
    ParseResult b = parse("y_eps = 0.1\n@Pre\nx_size=1\ny_size=1\n[0] <= x[0] <= [1]\n"
                          "@Exp\ny[0] ~= 0.5");
    CHECK(a == b);
}
