#include "reinverify/drlp/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "reinverify/errors.hpp"

namespace reinverify::drlp {

double Value::scalar() const {
    if (is_list || items.size() != 1)
        throw SemanticError("expected a scalar value, got a list");
    return items[0];
}

const Assign* Script::find_var(const std::string& name) const {
    for (const Assign& a : variables)
        if (a.name == name) return &a;
    return nullptr;
}

const char* cmp_text(Cmp op) {
    switch (op) {
        case Cmp::LE: return "<=";
        case Cmp::LT: return "<";
        case Cmp::EQ: return "==";
        case Cmp::GE: return ">=";
        case Cmp::GT: return ">";
        case Cmp::NE: return "!=";
        case Cmp::Approx: return "~=";
        case Cmp::NotApprox: return "!~=";
    }
    return "?";
}

namespace {

enum class Tok {
    Ident, Number, Newline, Indent, Dedent, End,
    LParen, RParen, LBracket, RBracket, Colon, Comma, Assign, At,
    Le, Lt, Eq, Ge, Gt, Ne, Approx, NotApprox,
    Plus, Minus, Star, Slash,
};

struct Token {
    Tok kind;
    std::string text;
    double number = 0;
    int line = 0;
    int column = 0;
};

class Lexer {
  public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run() {
        indents_.push_back(0);
        while (pos_ < src_.size()) lex_line();
        while (indents_.back() > 0) {
            indents_.pop_back();
            emit(Tok::Dedent, "");
        }
        emit(Tok::End, "");
        return std::move(out_);
    }

  private:
    void emit(Tok k, std::string text, double num = 0) {
        out_.push_back({k, std::move(text), num, line_, col_});
    }

    [[noreturn]] void fail(const std::string& msg) { throw SyntaxError(line_, col_, msg); }

    void lex_line() {
        ++line_;
        int indent = 0;
        std::size_t start = pos_;
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) {
            indent += src_[pos_] == '\t' ? 8 - indent % 8 : 1;
            ++pos_;
        }
        col_ = static_cast<int>(pos_ - start) + 1;
        if (pos_ >= src_.size() || src_[pos_] == '\n' || src_[pos_] == '\r' || src_[pos_] == '#') {
            skip_to_eol();
            return;  // blank or comment-only line, no tokens
        }
        if (indent > indents_.back()) {
            indents_.push_back(indent);
            emit(Tok::Indent, "");
        } else {
            while (indent < indents_.back()) {
                indents_.pop_back();
                emit(Tok::Dedent, "");
            }
            if (indent != indents_.back()) fail("inconsistent indentation");
        }
        while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') {
            char c = src_[pos_];
            col_ = column_at(pos_, start);
            if (c == ' ' || c == '\t') {
                ++pos_;
            } else if (c == '#') {
                break;
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && pos_ + 1 < src_.size() &&
                        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                lex_number();
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t s = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    ++pos_;
                emit(Tok::Ident, src_.substr(s, pos_ - s));
            } else {
                lex_symbol();
            }
        }
        skip_to_eol();
        emit(Tok::Newline, "");
    }

    int column_at(std::size_t pos, std::size_t line_start) {
        return static_cast<int>(pos - line_start) + 1;
    }

    void skip_to_eol() {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        if (pos_ < src_.size()) ++pos_;
    }

    void lex_number() {
        std::size_t s = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark;  // 'e' begins an identifier, not an exponent
            }
        }
        std::string text = src_.substr(s, pos_ - s);
        try {
            emit(Tok::Number, text, std::stod(text));
        } catch (const std::exception&) {
            fail("malformed number '" + text + "'");
        }
    }

    bool match(const char* s) {
        std::size_t len = std::strlen(s);
        if (src_.compare(pos_, len, s) == 0) {
            pos_ += len;
            return true;
        }
        return false;
    }

    void lex_symbol() {
        // Unicode comparison glyphs are accepted as aliases.
        if (match("≈")) return emit(Tok::Approx, "~=");      // almost-equal sign
        if (match("≉")) return emit(Tok::NotApprox, "!~=");  // negated almost-equal
        if (match("≤")) return emit(Tok::Le, "<=");
        if (match("≥")) return emit(Tok::Ge, ">=");
        if (match("≠")) return emit(Tok::Ne, "!=");
        if (match("!~=")) return emit(Tok::NotApprox, "!~=");
        if (match("~=")) return emit(Tok::Approx, "~=");
        if (match("<=")) return emit(Tok::Le, "<=");
        if (match(">=")) return emit(Tok::Ge, ">=");
        if (match("==")) return emit(Tok::Eq, "==");
        if (match("!=")) return emit(Tok::Ne, "!=");
        char c = src_[pos_++];
        switch (c) {
            case '(': return emit(Tok::LParen, "(");
            case ')': return emit(Tok::RParen, ")");
            case '[': return emit(Tok::LBracket, "[");
            case ']': return emit(Tok::RBracket, "]");
            case ':': return emit(Tok::Colon, ":");
            case ',': return emit(Tok::Comma, ",");
            case '=': return emit(Tok::Assign, "=");
            case '<': return emit(Tok::Lt, "<");
            case '>': return emit(Tok::Gt, ">");
            case '+': return emit(Tok::Plus, "+");
            case '-': return emit(Tok::Minus, "-");
            case '*': return emit(Tok::Star, "*");
            case '/': return emit(Tok::Slash, "/");
            case '@': return emit(Tok::At, "@");
            default: fail(std::string("unexpected character '") + c + "'");
        }
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 0;
    int col_ = 1;
    std::vector<int> indents_;
    std::vector<Token> out_;
};

// Evaluates constant expressions in the variables segment (literals,
// previously assigned names, arithmetic, list repetition).
class ConstEval {
  public:
    explicit ConstEval(const std::map<std::string, Value>& env) : env_(env) {}

    Value eval(const Expr& e) const {
        switch (e.kind) {
            case Expr::Kind::Number: return Value(e.number);
            case Expr::Kind::Ident: {
                auto it = env_.find(e.ident);
                if (it == env_.end())
                    throw SemanticError("unknown variable '" + e.ident +
                                        "' in variables segment");
                return it->second;
            }
            case Expr::Kind::Neg: {
                Value v = eval(e.elems[0]);
                for (double& d : v.items) d = -d;
                return v;
            }
            case Expr::Kind::List: {
                Value v;
                v.is_list = true;
                for (const Expr& el : e.elems) {
                    Value ev = eval(el);
                    v.items.insert(v.items.end(), ev.items.begin(), ev.items.end());
                }
                return v;
            }
            case Expr::Kind::Binary: {
                Value a = eval(e.elems[0]);
                Value b = eval(e.elems[1]);
                if (e.op == '*' && (a.is_list || b.is_list)) {
                    // list repetition [v]*n
                    const Value& lst = a.is_list ? a : b;
                    const Value& cnt = a.is_list ? b : a;
                    if (cnt.is_list) throw SemanticError("cannot multiply two lists");
                    int reps = static_cast<int>(std::llround(cnt.scalar()));
                    if (reps < 0 || std::abs(cnt.scalar() - reps) > 1e-9)
                        throw SemanticError("list repetition count must be a non-negative integer");
                    Value v;
                    v.is_list = true;
                    for (int i = 0; i < reps; ++i)
                        v.items.insert(v.items.end(), lst.items.begin(), lst.items.end());
                    return v;
                }
                if (a.is_list || b.is_list) {
                    // elementwise with broadcast
                    std::size_t len = std::max(a.items.size(), b.items.size());
                    if (a.items.size() != len && a.items.size() != 1)
                        throw SemanticError("list length mismatch in arithmetic");
                    if (b.items.size() != len && b.items.size() != 1)
                        throw SemanticError("list length mismatch in arithmetic");
                    Value v;
                    v.is_list = true;
                    for (std::size_t i = 0; i < len; ++i)
                        v.items.push_back(apply(e.op, a.items[a.items.size() == 1 ? 0 : i],
                                                b.items[b.items.size() == 1 ? 0 : i]));
                    return v;
                }
                return Value(apply(e.op, a.scalar(), b.scalar()));
            }
            case Expr::Kind::IoRef:
                throw SemanticError("x/y cannot appear in the variables segment");
        }
        throw SemanticError("unreachable expression kind");
    }

  private:
    static double apply(char op, double a, double b) {
        switch (op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/':
                if (b == 0) throw SemanticError("division by zero");
                return a / b;
        }
        throw SemanticError("unknown operator");
    }

    const std::map<std::string, Value>& env_;
};

class Parser {
  public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ParseResult run() {
        Script script;
        parse_variables(script);
        expect_segment("Pre");
        script.pre = parse_segment(script, /*is_pre=*/true);
        expect_segment("Exp");
        script.post = parse_segment(script, /*is_pre=*/false);
        if (script.pre.children.empty()) throw SemanticError("precondition segment is empty");
        if (script.post.children.empty()) throw SemanticError("postcondition segment is empty");

        finish_sizes(script);
        validate(script);

        std::vector<std::string> free = collect_free(script);
        if (free.empty()) return script;
        return Template{std::move(script), std::move(free)};
    }

  private:
    const Token& cur() const { return toks_[idx_]; }
    const Token& peek(int d = 1) const {
        return toks_[std::min(idx_ + d, toks_.size() - 1)];
    }
    Token advance() { return toks_[idx_++]; }
    bool check(Tok k) const { return cur().kind == k; }
    bool accept(Tok k) {
        if (check(k)) {
            ++idx_;
            return true;
        }
        return false;
    }
    Token expect(Tok k, const char* what) {
        if (!check(k)) fail(std::string("expected ") + what);
        return advance();
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw SyntaxError(cur().line, cur().column, msg);
    }
    void skip_newlines() {
        while (check(Tok::Newline)) ++idx_;
    }

    bool at_segment_marker() const {
        return check(Tok::At) && peek().kind == Tok::Ident;
    }

    void expect_segment(const char* name) {
        skip_newlines();
        if (!at_segment_marker()) fail(std::string("expected @") + name + " segment marker");
        advance();  // '@'
        Token id = expect(Tok::Ident, "segment name");
        if (id.text != name)
            throw SyntaxError(id.line, id.column, "expected @" + std::string(name) +
                                                      ", got @" + id.text);
        if (!check(Tok::End)) expect(Tok::Newline, "newline after segment marker");
    }

    // --- variables segment -------------------------------------------------

    void parse_variables(Script& script) {
        skip_newlines();
        while (!check(Tok::End) && !at_segment_marker()) {
            parse_assign_line(script);
            skip_newlines();
        }
    }

    void parse_assign_line(Script& script) {
        for (;;) {
            Token name = expect(Tok::Ident, "variable name");
            expect(Tok::Assign, "'=' in assignment");
            Expr value = parse_expr();
            Assign a;
            a.iterable = !name.text.empty() && name.text[0] == '_';
            a.name = a.iterable ? name.text.substr(1) : name.text;
            if (a.name.empty())
                throw SyntaxError(name.line, name.column, "empty variable name");
            ConstEval ev(env_);
            a.value = ev.eval(value);
            if (a.iterable && !a.value.is_list)
                throw SemanticError("iterable variable '_" + a.name + "' must hold a list");
            env_[a.name] = a.value;
            script.variables.push_back(std::move(a));
            if (!accept(Tok::Comma)) break;
        }
        if (!check(Tok::End)) expect(Tok::Newline, "newline after assignment");
    }

    // --- condition segments -------------------------------------------------

    Node parse_segment(Script& script, bool is_pre) {
        Node root;
        root.kind = Node::Kind::And;
        skip_newlines();
        while (!check(Tok::End) && !at_segment_marker()) {
            if (is_pre && check(Tok::Ident) &&
                (cur().text == "x_size" || cur().text == "y_size") &&
                peek().kind == Tok::Assign) {
                parse_size_decl(script);
            } else {
                root.children.push_back(parse_statement());
            }
            skip_newlines();
        }
        return root;
    }

    void parse_size_decl(Script& script) {
        Token name = advance();
        advance();  // '='
        Expr e = parse_expr();
        ConstEval ev(env_);
        Value v;
        try {
            v = ev.eval(e);
        } catch (const SemanticError&) {
            throw SemanticError("unbound identifier in dimension declaration " + name.text);
        }
        int size = static_cast<int>(std::llround(v.scalar()));
        if (size < 1 || std::abs(v.scalar() - size) > 1e-9)
            throw SemanticError(name.text + " must be a positive integer");
        if (name.text == "x_size") {
            script.x_size = size;
            script.x_size_declared = true;
        } else {
            script.y_size = size;
            script.y_size_declared = true;
        }
        if (!check(Tok::End)) expect(Tok::Newline, "newline after size declaration");
    }

    Node parse_statement() {
        if (check(Tok::Ident)) {
            const std::string& t = cur().text;
            if (t == "for") return parse_for();
            if (t == "with") return parse_with();
            if (t == "Implies" || t == "And" || t == "Or") {
                if (peek().kind == Tok::LParen) {
                    Node n = parse_call();
                    if (!check(Tok::End) && !check(Tok::Dedent))
                        expect(Tok::Newline, "newline after call");
                    return n;
                }
            }
        }
        Node n = Node::compare(parse_comparison());
        if (!check(Tok::End) && !check(Tok::Dedent)) expect(Tok::Newline, "newline after constraint");
        return n;
    }

    Node parse_for() {
        advance();  // 'for'
        Token var = expect(Tok::Ident, "loop variable");
        Token kw = expect(Tok::Ident, "'in'");
        if (kw.text != "in") throw SyntaxError(kw.line, kw.column, "expected 'in'");
        Token range = expect(Tok::Ident, "'range' or 'orange'");
        if (range.text != "range" && range.text != "orange")
            throw SyntaxError(range.line, range.column, "expected 'range' or 'orange'");
        Node n;
        n.kind = Node::Kind::ForLoop;
        n.loop_or = range.text == "orange";
        n.loop_var = var.text;
        expect(Tok::LParen, "'('");
        n.loop_range.push_back(parse_expr());
        while (accept(Tok::Comma)) n.loop_range.push_back(parse_expr());
        if (n.loop_range.size() > 3) fail("range takes at most 3 arguments");
        expect(Tok::RParen, "')'");
        expect(Tok::Colon, "':'");
        loop_vars_.push_back(var.text);
        n.children = parse_block();
        loop_vars_.pop_back();
        return n;
    }

    Node parse_with() {
        advance();  // 'with'
        Token range = expect(Tok::Ident, "'range' or 'orange'");
        if (range.text != "range" && range.text != "orange")
            throw SyntaxError(range.line, range.column, "expected 'range' or 'orange'");
        Node n;
        n.kind = range.text == "orange" ? Node::Kind::Or : Node::Kind::And;
        expect(Tok::Colon, "':'");
        n.children = parse_block();
        if (n.children.empty()) fail("empty block");
        return n;
    }

    std::vector<Node> parse_block() {
        std::vector<Node> body;
        if (check(Tok::Newline)) {
            skip_newlines();
            expect(Tok::Indent, "indented block");
            skip_newlines();
            while (!check(Tok::Dedent) && !check(Tok::End)) {
                body.push_back(parse_statement());
                skip_newlines();
            }
            accept(Tok::Dedent);
        } else {
            body.push_back(parse_statement());  // inline simple statement
        }
        if (body.empty()) fail("empty block");
        return body;
    }

    Node parse_call() {
        Token name = advance();
        expect(Tok::LParen, "'('");
        std::vector<Node> args;
        if (!check(Tok::RParen)) {
            args.push_back(parse_call_arg());
            while (accept(Tok::Comma)) args.push_back(parse_call_arg());
        }
        expect(Tok::RParen, "')'");
        Node n;
        if (name.text == "Implies") {
            if (args.size() != 2)
                throw SyntaxError(name.line, name.column, "Implies takes exactly 2 arguments");
            n.kind = Node::Kind::Implies;
        } else {
            if (args.empty())
                throw SyntaxError(name.line, name.column, name.text + " needs at least 1 argument");
            n.kind = name.text == "And" ? Node::Kind::And : Node::Kind::Or;
        }
        n.children = std::move(args);
        return n;
    }

    Node parse_call_arg() {
        if (check(Tok::Ident) && peek().kind == Tok::LParen &&
            (cur().text == "Implies" || cur().text == "And" || cur().text == "Or"))
            return parse_call();
        return Node::compare(parse_comparison());
    }

    Comparison parse_comparison() {
        Comparison c;
        c.operands.push_back(parse_expr());
        for (;;) {
            Cmp op;
            if (accept(Tok::Le)) op = Cmp::LE;
            else if (accept(Tok::Lt)) op = Cmp::LT;
            else if (accept(Tok::Eq)) op = Cmp::EQ;
            else if (accept(Tok::Ge)) op = Cmp::GE;
            else if (accept(Tok::Gt)) op = Cmp::GT;
            else if (accept(Tok::Ne)) op = Cmp::NE;
            else if (accept(Tok::Approx)) op = Cmp::Approx;
            else if (accept(Tok::NotApprox)) op = Cmp::NotApprox;
            else break;
            c.ops.push_back(op);
            c.operands.push_back(parse_expr());
        }
        if (c.ops.empty()) fail("expected a comparison operator");
        return c;
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        while (check(Tok::Plus) || check(Tok::Minus)) {
            char op = advance().kind == Tok::Plus ? '+' : '-';
            Expr rhs = parse_term();
            lhs = make_binary(op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Expr parse_term() {
        Expr lhs = parse_unary();
        while (check(Tok::Star) || check(Tok::Slash)) {
            char op = advance().kind == Tok::Star ? '*' : '/';
            Expr rhs = parse_unary();
            lhs = make_binary(op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    Expr parse_unary() {
        if (accept(Tok::Minus)) {
            Expr e;
            e.kind = Expr::Kind::Neg;
            e.elems.push_back(parse_unary());
            return e;
        }
        return parse_primary();
    }

    Expr parse_primary() {
        if (check(Tok::Number)) return Expr::make_number(advance().number);
        if (accept(Tok::LParen)) {
            Expr e = parse_expr();
            expect(Tok::RParen, "')'");
            return e;
        }
        if (accept(Tok::LBracket)) {
            Expr e;
            e.kind = Expr::Kind::List;
            if (!check(Tok::RBracket)) {
                e.elems.push_back(parse_expr());
                while (accept(Tok::Comma)) e.elems.push_back(parse_expr());
            }
            expect(Tok::RBracket, "']'");
            return e;
        }
        if (check(Tok::Ident)) {
            Token id = advance();
            if (id.text == "x" || id.text == "y") {
                Expr e;
                e.kind = Expr::Kind::IoRef;
                e.io = id.text[0];
                while (e.subs.size() < 2 && check(Tok::LBracket)) e.subs.push_back(parse_subscript());
                return e;
            }
            return Expr::make_ident(id.text);
        }
        fail("expected an expression");
    }

    Subscript parse_subscript() {
        expect(Tok::LBracket, "'['");
        Subscript s;
        s.parts.push_back(parse_expr());
        while (s.parts.size() < 3 && accept(Tok::Colon)) s.parts.push_back(parse_expr());
        expect(Tok::RBracket, "']'");
        return s;
    }

    // --- size resolution and validation --------------------------------------

    struct SizeHints {
        std::optional<int> x, y;
        int max_x_feature = -1, max_y_feature = -1;
    };

    void infer_from_comparison(const Comparison& c, SizeHints& h) {
        // widths of evaluable list operands adjacent to a bare-row reference
        for (std::size_t i = 0; i + 1 < c.operands.size(); ++i) {
            for (int side = 0; side < 2; ++side) {
                const Expr& io_side = c.operands[i + side];
                const Expr& other = c.operands[i + 1 - side];
                const Expr* ref = row_ref(io_side);
                if (!ref) continue;
                std::optional<int> w = literal_width(other);
                if (!w) continue;
                std::optional<int>& target = ref->io == 'x' ? h.x : h.y;
                if (target && *target != *w)
                    throw SemanticError(std::string(1, ref->io) +
                                        " row width is ambiguous: " + std::to_string(*target) +
                                        " vs " + std::to_string(*w));
                target = *w;
            }
        }
    }

    // x[i] / x[i] + e style: the unique row-shaped io reference inside e.
    static const Expr* row_ref(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::IoRef:
                return e.subs.size() == 1 && !e.subs[0].is_slice() ? &e : nullptr;
            case Expr::Kind::Neg: return row_ref(e.elems[0]);
            case Expr::Kind::Binary: {
                const Expr* a = row_ref(e.elems[0]);
                const Expr* b = row_ref(e.elems[1]);
                return a ? a : b;
            }
            default: return nullptr;
        }
    }

    // structural width of a list expression, if it is list-shaped
    static std::optional<int> literal_width(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::List: return static_cast<int>(e.elems.size());
            case Expr::Kind::Neg: return literal_width(e.elems[0]);
            case Expr::Kind::Binary: {
                std::optional<int> a = literal_width(e.elems[0]);
                std::optional<int> b = literal_width(e.elems[1]);
                if (e.op == '*' && a && !b && e.elems[1].kind == Expr::Kind::Number)
                    return *a * static_cast<int>(e.elems[1].number);
                if (e.op == '*' && b && !a && e.elems[0].kind == Expr::Kind::Number)
                    return *b * static_cast<int>(e.elems[0].number);
                if (a && b) return std::max(*a, *b);  // broadcast keeps the wider side
                return a ? a : b;
            }
            default: return std::nullopt;
        }
    }

    void scan_features(const Expr& e, SizeHints& h) {
        if (e.kind == Expr::Kind::IoRef && e.subs.size() == 2) {
            int& mx = e.io == 'x' ? h.max_x_feature : h.max_y_feature;
            const auto& parts = e.subs[1].parts;
            if (parts[0].kind == Expr::Kind::Number)
                mx = std::max(mx, static_cast<int>(parts[0].number));
            if (parts.size() >= 2 && parts[1].kind == Expr::Kind::Number)
                mx = std::max(mx, static_cast<int>(parts[1].number) - 1);  // [a:b] touches b-1
        }
        for (const Expr& el : e.elems) scan_features(el, h);
        for (const Subscript& s : e.subs)
            for (const Expr& p : s.parts) scan_features(p, h);
    }

    void walk_exprs(const Node& n, SizeHints& h) {
        if (n.kind == Node::Kind::Compare) {
            infer_from_comparison(n.cmp, h);
            for (const Expr& e : n.cmp.operands) scan_features(e, h);
        }
        for (const Node& c : n.children) walk_exprs(c, h);
    }

    void finish_sizes(Script& script) {
        SizeHints h;
        walk_exprs(script.pre, h);
        walk_exprs(script.post, h);
        if (!script.x_size_declared) {
            if (h.x) script.x_size = *h.x;
            else if (h.max_x_feature >= 0) script.x_size = h.max_x_feature + 1;
            else throw SemanticError("cannot infer x_size; declare it in the @Pre segment");
        } else if (h.x && *h.x != script.x_size) {
            throw SemanticError("declared x_size=" + std::to_string(script.x_size) +
                                " conflicts with a width-" + std::to_string(*h.x) + " comparison");
        }
        if (!script.y_size_declared) {
            if (h.y) script.y_size = *h.y;
            else if (h.max_y_feature >= 0) script.y_size = h.max_y_feature + 1;
            else throw SemanticError("cannot infer y_size; declare it in the @Pre segment");
        } else if (h.y && *h.y != script.y_size) {
            throw SemanticError("declared y_size=" + std::to_string(script.y_size) +
                                " conflicts with a width-" + std::to_string(*h.y) + " comparison");
        }
        if (h.max_x_feature >= script.x_size)
            throw SemanticError("x feature subscript " + std::to_string(h.max_x_feature) +
                                " out of range for x_size=" + std::to_string(script.x_size));
        if (h.max_y_feature >= script.y_size)
            throw SemanticError("y feature subscript " + std::to_string(h.max_y_feature) +
                                " out of range for y_size=" + std::to_string(script.y_size));
    }

    // --- free parameters and validation --------------------------------------

    void collect_idents(const Expr& e, std::set<std::string>& bound,
                        std::vector<std::string>& order, std::set<std::string>& seen) {
        if (e.kind == Expr::Kind::Ident) {
            if (!bound.count(e.ident) && !seen.count(e.ident)) {
                seen.insert(e.ident);
                order.push_back(e.ident);
            }
        }
        for (const Expr& el : e.elems) collect_idents(el, bound, order, seen);
        for (const Subscript& s : e.subs)
            for (const Expr& p : s.parts) collect_idents(p, bound, order, seen);
    }

    void collect_node(const Node& n, std::set<std::string>& bound,
                      std::vector<std::string>& order, std::set<std::string>& seen) {
        if (n.kind == Node::Kind::ForLoop) {
            for (const Expr& e : n.loop_range) collect_idents(e, bound, order, seen);
            bool fresh = bound.insert(n.loop_var).second;
            for (const Node& c : n.children) collect_node(c, bound, order, seen);
            if (fresh) bound.erase(n.loop_var);
            return;
        }
        if (n.kind == Node::Kind::Compare)
            for (const Expr& e : n.cmp.operands) collect_idents(e, bound, order, seen);
        for (const Node& c : n.children) collect_node(c, bound, order, seen);
    }

    std::vector<std::string> collect_free(const Script& script) {
        std::set<std::string> bound{"k"};
        std::vector<std::string> order;
        std::set<std::string> seen;
        // iterable variables stay free until expansion, in declaration order
        for (const Assign& a : script.variables) {
            if (a.iterable) {
                if (!seen.count(a.name)) {
                    seen.insert(a.name);
                    order.push_back(a.name);
                }
            }
            bound.insert(a.name);
        }
        collect_node(script.pre, bound, order, seen);
        collect_node(script.post, bound, order, seen);
        return order;
    }

    void check_approx_tolerance(const Node& n, const Script& script) const {
        if (n.kind == Node::Kind::Compare) {
            for (Cmp op : n.cmp.ops) {
                if (op == Cmp::Approx || op == Cmp::NotApprox) {
                    if (!script.find_var("y_eps"))
                        throw SemanticError(
                            "'~=' requires the tolerance variable y_eps to be declared");
                }
            }
        }
        for (const Node& c : n.children) check_approx_tolerance(c, script);
    }

    void check_affine(const Expr& e, bool* has_io = nullptr) const {
        bool io_here = false;
        if (e.kind == Expr::Kind::IoRef) io_here = true;
        bool io_l = false, io_r = false;
        if (e.kind == Expr::Kind::Binary) {
            check_affine(e.elems[0], &io_l);
            check_affine(e.elems[1], &io_r);
            if ((e.op == '*' && io_l && io_r) || (e.op == '/' && io_r))
                throw SemanticError(
                    "non-affine expression: products of model variables are rejected");
        } else {
            for (const Expr& el : e.elems) {
                bool sub = false;
                check_affine(el, &sub);
                io_l = io_l || sub;
            }
        }
        if (has_io) *has_io = io_here || io_l || io_r;
    }

    void check_affine_node(const Node& n) const {
        if (n.kind == Node::Kind::Compare)
            for (const Expr& e : n.cmp.operands) check_affine(e);
        for (const Node& c : n.children) check_affine_node(c);
    }

    void validate(const Script& script) const {
        check_approx_tolerance(script.pre, script);
        check_approx_tolerance(script.post, script);
        check_affine_node(script.pre);
        check_affine_node(script.post);
    }

    std::vector<Token> toks_;
    std::size_t idx_ = 0;
    std::map<std::string, Value> env_;
    std::vector<std::string> loop_vars_;

    static Expr make_binary(char op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = Expr::Kind::Binary;
        e.op = op;
        e.elems.push_back(std::move(lhs));
        e.elems.push_back(std::move(rhs));
        return e;
    }
};

}  // namespace

ParseResult parse(const std::string& source) {
    Lexer lex(source);
    Parser parser(lex.run());
    return parser.run();
}

Script parse_concrete(const std::string& source) {
    ParseResult r = parse(source);
    if (auto* s = std::get_if<Script>(&r)) return std::move(*s);
    const auto& t = std::get<Template>(r);
    std::string names;
    for (const auto& p : t.free_parameters) names += (names.empty() ? "" : ", ") + p;
    throw SemanticError("script has free parameters (" + names + "); concretize it first");
}

ParseResult parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SemanticError("cannot open DRLP file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

namespace {

// Rebuilds free-parameter bookkeeping after substitutions.
ParseResult reparse_state(Script script) {
    std::set<std::string> assigned;
    for (const Assign& a : script.variables) assigned.insert(a.name);

    struct Collector {
        std::set<std::string> bound;
        std::vector<std::string> order;
        std::set<std::string> seen;

        void expr(const Expr& e) {
            if (e.kind == Expr::Kind::Ident && !bound.count(e.ident) && !seen.count(e.ident)) {
                seen.insert(e.ident);
                order.push_back(e.ident);
            }
            for (const Expr& el : e.elems) expr(el);
            for (const Subscript& s : e.subs)
                for (const Expr& p : s.parts) expr(p);
        }
        void node(const Node& n) {
            if (n.kind == Node::Kind::ForLoop) {
                for (const Expr& e : n.loop_range) expr(e);
                bool fresh = bound.insert(n.loop_var).second;
                for (const Node& c : n.children) node(c);
                if (fresh) bound.erase(n.loop_var);
                return;
            }
            if (n.kind == Node::Kind::Compare)
                for (const Expr& e : n.cmp.operands) expr(e);
            for (const Node& c : n.children) node(c);
        }
    } col;
    col.bound = assigned;
    col.bound.insert("k");

    std::vector<std::string> free;
    std::set<std::string> seen_free;
    for (const Assign& a : script.variables)
        if (a.iterable && seen_free.insert(a.name).second) free.push_back(a.name);
    col.node(script.pre);
    col.node(script.post);
    for (const std::string& name : col.order)
        if (seen_free.insert(name).second) free.push_back(name);

    if (free.empty()) return script;
    return Template{std::move(script), std::move(free)};
}

}  // namespace

std::vector<Script> expand_iterables(const Template& tmpl) {
    std::vector<const Assign*> iterables;
    for (const Assign& a : tmpl.script.variables)
        if (a.iterable) iterables.push_back(&a);
    for (const Assign* a : iterables)
        if (a->value.items.empty())
            throw ExpansionError("iterable variable '_" + a->name + "' has an empty list");
    for (const std::string& p : tmpl.free_parameters) {
        bool is_iterable = false;
        for (const Assign* a : iterables) is_iterable |= a->name == p;
        if (!is_iterable)
            throw ExpansionError("cannot expand: parameter '" + p +
                                 "' is unassigned; concretize it first");
    }

    std::size_t count = 1;
    for (const Assign* a : iterables) count *= a->value.items.size();

    std::vector<Script> out;
    out.reserve(count);
    for (std::size_t index = 0; index < count; ++index) {
        Script s = tmpl.script;
        // row-major: the last-declared iterable varies fastest
        std::size_t rem = index;
        for (std::size_t vi = iterables.size(); vi-- > 0;) {
            const Assign* src = iterables[vi];
            std::size_t len = src->value.items.size();
            double chosen = src->value.items[rem % len];
            rem /= len;
            for (Assign& a : s.variables) {
                if (a.name == src->name && a.iterable) {
                    a.iterable = false;
                    a.value = Value(chosen);
                }
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

ParseResult concretize(const Template& tmpl, const std::string& var, double value) {
    return concretize_all(tmpl, {{var, value}});
}

ParseResult concretize_all(const Template& tmpl,
                           const std::vector<std::pair<std::string, double>>& values) {
    Script s = tmpl.script;
    for (const auto& [var, value] : values) {
        bool is_free = std::find(tmpl.free_parameters.begin(), tmpl.free_parameters.end(), var) !=
                       tmpl.free_parameters.end();
        if (!is_free)
            throw UnknownParameter("'" + var + "' is not a free parameter of this template");
        bool updated = false;
        for (Assign& a : s.variables) {
            if (a.name == var) {
                a.iterable = false;
                a.value = Value(value);
                updated = true;
            }
        }
        if (!updated) {
            Assign a;
            a.name = var;
            a.value = Value(value);
            s.variables.push_back(std::move(a));
        }
    }
    return reparse_state(std::move(s));
}

}  // namespace reinverify::drlp
