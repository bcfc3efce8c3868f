#include "reinverify/drlp/printer.hpp"

#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

namespace reinverify::drlp {

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

namespace {

int precedence(const Expr& e) {
    if (e.kind == Expr::Kind::Binary) return (e.op == '+' || e.op == '-') ? 1 : 2;
    if (e.kind == Expr::Kind::Neg) return 3;
    return 4;
}

void print_expr(std::ostream& os, const Expr& e, int parent_prec = 0) {
    int prec = precedence(e);
    bool parens = prec < parent_prec;
    if (parens) os << "(";
    switch (e.kind) {
        case Expr::Kind::Number: os << format_number(e.number); break;
        case Expr::Kind::Ident: os << e.ident; break;
        case Expr::Kind::Neg:
            os << "-";
            print_expr(os, e.elems[0], 3);
            break;
        case Expr::Kind::List:
            os << "[";
            for (std::size_t i = 0; i < e.elems.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, e.elems[i]);
            }
            os << "]";
            break;
        case Expr::Kind::Binary:
            print_expr(os, e.elems[0], prec);
            os << " " << e.op << " ";
            // left-associative: the right child needs one level more
            print_expr(os, e.elems[1], prec + 1);
            break;
        case Expr::Kind::IoRef:
            os << e.io;
            for (const Subscript& s : e.subs) {
                os << "[";
                for (std::size_t i = 0; i < s.parts.size(); ++i) {
                    if (i) os << ":";
                    print_expr(os, s.parts[i]);
                }
                os << "]";
            }
            break;
    }
    if (parens) os << ")";
}

void print_comparison(std::ostream& os, const Comparison& c) {
    print_expr(os, c.operands[0]);
    for (std::size_t i = 0; i < c.ops.size(); ++i) {
        os << " " << cmp_text(c.ops[i]) << " ";
        print_expr(os, c.operands[i + 1]);
    }
}

bool call_printable(const Node& n) {
    switch (n.kind) {
        case Node::Kind::Compare: return true;
        case Node::Kind::ForLoop: return false;
        default:
            for (const Node& c : n.children)
                if (!call_printable(c)) return false;
            return true;
    }
}

void print_arg_inline(std::ostream& os, const Node& n) {
    switch (n.kind) {
        case Node::Kind::Compare: print_comparison(os, n.cmp); break;
        case Node::Kind::And:
        case Node::Kind::Or:
        case Node::Kind::Implies: {
            os << (n.kind == Node::Kind::And ? "And("
                                             : n.kind == Node::Kind::Or ? "Or(" : "Implies(");
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i) os << ", ";
                print_arg_inline(os, n.children[i]);
            }
            os << ")";
            break;
        }
        case Node::Kind::ForLoop: break;  // not representable inline
    }
}

void print_node(std::ostream& os, const Node& n, int indent) {
    std::string pad(static_cast<std::size_t>(indent) * 4, ' ');
    switch (n.kind) {
        case Node::Kind::Compare:
            os << pad;
            print_comparison(os, n.cmp);
            os << "\n";
            break;
        case Node::Kind::ForLoop:
            os << pad << "for " << n.loop_var << " in " << (n.loop_or ? "orange" : "range") << "(";
            for (std::size_t i = 0; i < n.loop_range.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, n.loop_range[i]);
            }
            os << "):\n";
            for (const Node& c : n.children) print_node(os, c, indent + 1);
            break;
        case Node::Kind::And:
        case Node::Kind::Or:
            // Calls and with-blocks reparse to the same tree; blocks are
            // needed whenever a child is a loop.
            if (call_printable(n)) {
                os << pad;
                print_arg_inline(os, n);
                os << "\n";
            } else {
                os << pad << "with " << (n.kind == Node::Kind::Or ? "orange" : "range") << ":\n";
                for (const Node& c : n.children) print_node(os, c, indent + 1);
            }
            break;
        case Node::Kind::Implies:
            os << pad;
            print_arg_inline(os, n);
            os << "\n";
            break;
    }
}

void print_value(std::ostream& os, const Value& v) {
    if (v.is_list) {
        os << "[";
        for (std::size_t i = 0; i < v.items.size(); ++i) {
            if (i) os << ", ";
            os << format_number(v.items[i]);
        }
        os << "]";
    } else {
        os << format_number(v.scalar());
    }
}

std::string script_source(const Script& s) {
    std::ostringstream os;
    for (const Assign& a : s.variables) {
        os << (a.iterable ? "_" : "") << a.name << " = ";
        print_value(os, a.value);
        os << "\n";
    }
    os << "\n@Pre\n";
    if (s.x_size_declared) os << "x_size = " << s.x_size << "\n";
    if (s.y_size_declared) os << "y_size = " << s.y_size << "\n";
    for (const Node& n : s.pre.children) print_node(os, n, 0);
    os << "\n@Exp\n";
    for (const Node& n : s.post.children) print_node(os, n, 0);
    return os.str();
}

nlohmann::json expr_json(const Expr& e) {
    nlohmann::json j;
    switch (e.kind) {
        case Expr::Kind::Number:
            j["num"] = e.number;
            break;
        case Expr::Kind::Ident:
            j["ident"] = e.ident;
            break;
        case Expr::Kind::Neg:
            j["neg"] = expr_json(e.elems[0]);
            break;
        case Expr::Kind::List: {
            auto arr = nlohmann::json::array();
            for (const Expr& el : e.elems) arr.push_back(expr_json(el));
            j["list"] = arr;
            break;
        }
        case Expr::Kind::Binary:
            j["op"] = std::string(1, e.op);
            j["lhs"] = expr_json(e.elems[0]);
            j["rhs"] = expr_json(e.elems[1]);
            break;
        case Expr::Kind::IoRef: {
            j["io"] = std::string(1, e.io);
            auto subs = nlohmann::json::array();
            for (const Subscript& s : e.subs) {
                auto parts = nlohmann::json::array();
                for (const Expr& p : s.parts) parts.push_back(expr_json(p));
                subs.push_back(parts);
            }
            j["subs"] = subs;
            break;
        }
    }
    return j;
}

nlohmann::json node_json(const Node& n) {
    nlohmann::json j;
    switch (n.kind) {
        case Node::Kind::Compare: {
            j["kind"] = "compare";
            auto ops = nlohmann::json::array();
            for (Cmp op : n.cmp.ops) ops.push_back(cmp_text(op));
            auto operands = nlohmann::json::array();
            for (const Expr& e : n.cmp.operands) operands.push_back(expr_json(e));
            j["ops"] = ops;
            j["operands"] = operands;
            return j;
        }
        case Node::Kind::And: j["kind"] = "and"; break;
        case Node::Kind::Or: j["kind"] = "or"; break;
        case Node::Kind::Implies: j["kind"] = "implies"; break;
        case Node::Kind::ForLoop: {
            j["kind"] = n.loop_or ? "orange_loop" : "range_loop";
            j["var"] = n.loop_var;
            auto range = nlohmann::json::array();
            for (const Expr& e : n.loop_range) range.push_back(expr_json(e));
            j["range"] = range;
            break;
        }
    }
    auto kids = nlohmann::json::array();
    for (const Node& c : n.children) kids.push_back(node_json(c));
    j["children"] = kids;
    return j;
}

nlohmann::json script_json(const Script& s) {
    nlohmann::json j;
    auto vars = nlohmann::json::array();
    for (const Assign& a : s.variables) {
        nlohmann::json v;
        v["name"] = a.name;
        v["iterable"] = a.iterable;
        if (a.value.is_list) v["value"] = a.value.items;
        else v["value"] = a.value.scalar();
        vars.push_back(v);
    }
    j["variables"] = vars;
    j["x_size"] = s.x_size;
    j["y_size"] = s.y_size;
    j["precondition"] = node_json(s.pre);
    j["postcondition"] = node_json(s.post);
    return j;
}

}  // namespace

std::string to_source(const Script& script) { return script_source(script); }
std::string to_source(const Template& tmpl) { return script_source(tmpl.script); }

std::string ast_json(const Script& script) { return script_json(script).dump(2); }

std::string ast_json(const Template& tmpl) {
    nlohmann::json j = nlohmann::json::parse(script_json(tmpl.script).dump());
    j["free_parameters"] = tmpl.free_parameters;
    return j.dump(2);
}

}  // namespace reinverify::drlp
