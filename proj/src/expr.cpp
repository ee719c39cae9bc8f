#include "vortex/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

namespace vortex::expr {

namespace {

enum class BinaryOp { Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnaryOp { Neg, Not };

const char* op_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Mod: return "%";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
        case BinaryOp::Eq: return "==";
        case BinaryOp::Ne: return "!=";
        case BinaryOp::And: return "and";
        case BinaryOp::Or: return "or";
    }
    return "?";
}

}  // namespace

struct Node {
    enum class Kind { Number, String, Bool, Identifier, Unary, Binary, Call };
    explicit Node(Kind k) : kind(k) {}
    Kind kind;
    double number = 0;
    std::string text;  // string literal, identifier, or function name
    UnaryOp unary_op = UnaryOp::Neg;
    BinaryOp binary_op = BinaryOp::Add;
    std::vector<NodePtr> children;
};

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class TokKind {
    Number, String, Identifier,
    Plus, Minus, Star, Slash, Percent,
    Lt, Le, Gt, Ge, Eq, Ne,
    LParen, RParen, Comma,
    End
};

struct Token {
    TokKind kind;
    std::size_t offset;
    std::string text;   // identifier name or decoded string literal
    double number = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_ws();
            std::size_t at = pos_;
            if (pos_ >= src_.size()) {
                out.push_back({TokKind::End, at, "", 0});
                break;
            }
            char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && pos_ + 1 < src_.size() &&
                 std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                out.push_back(lex_number());
            } else if (c == '\'' || c == '"') {
                out.push_back(lex_string());
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    ++pos_;
                out.push_back({TokKind::Identifier, start, src_.substr(start, pos_ - start), 0});
            } else {
                out.push_back(lex_symbol());
            }
        }
        return out;
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    Token lex_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark;  // bare 'e' is not an exponent
            }
        }
        std::string digits = src_.substr(start, pos_ - start);
        double value = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (ec != std::errc() || p != digits.data() + digits.size())
            throw ParseError(start, "malformed number '" + digits + "'");
        return {TokKind::Number, start, digits, value};
    }

    Token lex_string() {
        std::size_t start = pos_;
        char quote = src_[pos_++];
        std::string decoded;
        while (pos_ < src_.size() && src_[pos_] != quote) {
            char c = src_[pos_++];
            if (c == '\\' && pos_ < src_.size()) {
                char esc = src_[pos_++];
                switch (esc) {
                    case 'n': decoded += '\n'; break;
                    case 't': decoded += '\t'; break;
                    case '\\': decoded += '\\'; break;
                    case '\'': decoded += '\''; break;
                    case '"': decoded += '"'; break;
                    default:
                        throw ParseError(pos_ - 1, std::string("unknown escape '\\") + esc + "'");
                }
            } else {
                decoded += c;
            }
        }
        if (pos_ >= src_.size()) throw ParseError(start, "unterminated string literal");
        ++pos_;  // closing quote
        return {TokKind::String, start, decoded, 0};
    }

    Token lex_symbol() {
        std::size_t at = pos_;
        char c = src_[pos_++];
        auto two = [&](char next, TokKind with, TokKind without) {
            if (pos_ < src_.size() && src_[pos_] == next) {
                ++pos_;
                return with;
            }
            return without;
        };
        switch (c) {
            case '+': return {TokKind::Plus, at, "+", 0};
            case '-': return {TokKind::Minus, at, "-", 0};
            case '*': return {TokKind::Star, at, "*", 0};
            case '/': return {TokKind::Slash, at, "/", 0};
            case '%': return {TokKind::Percent, at, "%", 0};
            case '(': return {TokKind::LParen, at, "(", 0};
            case ')': return {TokKind::RParen, at, ")", 0};
            case ',': return {TokKind::Comma, at, ",", 0};
            case '<': return {two('=', TokKind::Le, TokKind::Lt), at, "<", 0};
            case '>': return {two('=', TokKind::Ge, TokKind::Gt), at, ">", 0};
            case '=':
                if (pos_ < src_.size() && src_[pos_] == '=') {
                    ++pos_;
                    return {TokKind::Eq, at, "==", 0};
                }
                throw ParseError(at, "unexpected '='; use '==' for comparison");
            case '!':
                if (pos_ < src_.size() && src_[pos_] == '=') {
                    ++pos_;
                    return {TokKind::Ne, at, "!=", 0};
                }
                throw ParseError(at, "unexpected '!'; use 'not' or '!='");
            default:
                throw ParseError(at, std::string("unexpected character '") + c + "'");
        }
    }

    const std::string& src_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Parser (precedence: or < and < not < comparison < additive < multiplicative
// < unary < call/primary)
// ---------------------------------------------------------------------------

const std::set<std::string> kFunctions = {"int", "float", "min", "max", "ceil", "floor", "contains"};

std::size_t function_arity(const std::string& name) {
    return (name == "min" || name == "max" || name == "contains") ? 2 : 1;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    NodePtr run() {
        NodePtr root = parse_or();
        expect(TokKind::End, "end of expression");
        return root;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    Token take() { return toks_[pos_++]; }

    bool peek_word(const char* w) const {
        return peek().kind == TokKind::Identifier && peek().text == w;
    }

    void expect(TokKind k, const char* what) {
        if (peek().kind != k)
            throw ParseError(peek().offset, std::string("expected ") + what);
        ++pos_;
    }

    static NodePtr make(Node n) { return std::make_shared<Node>(std::move(n)); }

    NodePtr parse_or() {
        NodePtr left = parse_and();
        while (peek_word("or")) {
            take();
            Node n{Node::Kind::Binary};
            n.binary_op = BinaryOp::Or;
            n.children = {left, parse_and()};
            left = make(std::move(n));
        }
        return left;
    }

    NodePtr parse_and() {
        NodePtr left = parse_not();
        while (peek_word("and")) {
            take();
            Node n{Node::Kind::Binary};
            n.binary_op = BinaryOp::And;
            n.children = {left, parse_not()};
            left = make(std::move(n));
        }
        return left;
    }

    NodePtr parse_not() {
        if (peek_word("not")) {
            take();
            Node n{Node::Kind::Unary};
            n.unary_op = UnaryOp::Not;
            n.children = {parse_not()};
            return make(std::move(n));
        }
        return parse_comparison();
    }

    NodePtr parse_comparison() {
        NodePtr left = parse_additive();
        while (true) {
            BinaryOp op;
            switch (peek().kind) {
                case TokKind::Lt: op = BinaryOp::Lt; break;
                case TokKind::Le: op = BinaryOp::Le; break;
                case TokKind::Gt: op = BinaryOp::Gt; break;
                case TokKind::Ge: op = BinaryOp::Ge; break;
                case TokKind::Eq: op = BinaryOp::Eq; break;
                case TokKind::Ne: op = BinaryOp::Ne; break;
                default: return left;
            }
            take();
            Node n{Node::Kind::Binary};
            n.binary_op = op;
            n.children = {left, parse_additive()};
            left = make(std::move(n));
        }
    }

    NodePtr parse_additive() {
        NodePtr left = parse_multiplicative();
        while (peek().kind == TokKind::Plus || peek().kind == TokKind::Minus) {
            BinaryOp op = take().kind == TokKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            Node n{Node::Kind::Binary};
            n.binary_op = op;
            n.children = {left, parse_multiplicative()};
            left = make(std::move(n));
        }
        return left;
    }

    NodePtr parse_multiplicative() {
        NodePtr left = parse_unary();
        while (peek().kind == TokKind::Star || peek().kind == TokKind::Slash ||
               peek().kind == TokKind::Percent) {
            TokKind k = take().kind;
            BinaryOp op = k == TokKind::Star    ? BinaryOp::Mul
                          : k == TokKind::Slash ? BinaryOp::Div
                                                : BinaryOp::Mod;
            Node n{Node::Kind::Binary};
            n.binary_op = op;
            n.children = {left, parse_unary()};
            left = make(std::move(n));
        }
        return left;
    }

    NodePtr parse_unary() {
        if (peek().kind == TokKind::Minus) {
            take();
            Node n{Node::Kind::Unary};
            n.unary_op = UnaryOp::Neg;
            n.children = {parse_unary()};
            return make(std::move(n));
        }
        if (peek().kind == TokKind::Plus) {
            take();
            return parse_unary();
        }
        return parse_primary();
    }

    NodePtr parse_primary() {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::Number: {
                Token tok = take();
                Node n{Node::Kind::Number};
                n.number = tok.number;
                return make(std::move(n));
            }
            case TokKind::String: {
                Token tok = take();
                Node n{Node::Kind::String};
                n.text = std::move(tok.text);
                return make(std::move(n));
            }
            case TokKind::LParen: {
                take();
                NodePtr inner = parse_or();
                expect(TokKind::RParen, "')'");
                return inner;
            }
            case TokKind::Identifier: {
                Token tok = take();
                if (tok.text == "true" || tok.text == "false") {
                    Node n{Node::Kind::Bool};
                    n.number = tok.text == "true" ? 1 : 0;
                    return make(std::move(n));
                }
                if (tok.text == "and" || tok.text == "or" || tok.text == "not")
                    throw ParseError(tok.offset, "expected a value, found '" + tok.text + "'");
                if (peek().kind == TokKind::LParen) {
                    if (!kFunctions.count(tok.text))
                        throw ParseError(tok.offset, "unknown function '" + tok.text + "'");
                    take();  // '('
                    Node n{Node::Kind::Call};
                    n.text = tok.text;
                    if (peek().kind != TokKind::RParen) {
                        n.children.push_back(parse_or());
                        while (peek().kind == TokKind::Comma) {
                            take();
                            n.children.push_back(parse_or());
                        }
                    }
                    expect(TokKind::RParen, "')'");
                    if (n.children.size() != function_arity(n.text))
                        throw ParseError(tok.offset, "function '" + n.text + "' takes " +
                                                         std::to_string(function_arity(n.text)) +
                                                         " argument(s)");
                    return make(std::move(n));
                }
                Node n{Node::Kind::Identifier};
                n.text = std::move(tok.text);
                return make(std::move(n));
            }
            default:
                throw ParseError(t.offset, "expected a value, '(' or unary operator");
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double as_number(const Value& v, const char* what) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    throw EvalError(std::string(what) + " requires a number, got " + type_name(v));
}

bool as_bool(const Value& v, const char* what) {
    if (const bool* b = std::get_if<bool>(&v)) return *b;
    throw EvalError(std::string(what) + " requires a boolean, got " + type_name(v));
}

Value eval_node(const Node& n, const EvalContext& ctx);

Value eval_call(const Node& n, const EvalContext& ctx) {
    if (n.text == "contains") {
        Value hay = eval_node(*n.children[0], ctx);
        Value needle = eval_node(*n.children[1], ctx);
        if (const auto* list = std::get_if<std::vector<std::string>>(&hay)) {
            if (const auto* s = std::get_if<std::string>(&needle))
                return std::find(list->begin(), list->end(), *s) != list->end();
            throw EvalError(std::string("contains() item must be a string, got ") +
                            type_name(needle));
        }
        if (const auto* s = std::get_if<std::string>(&hay)) {
            if (const auto* sub = std::get_if<std::string>(&needle))
                return s->find(*sub) != std::string::npos;
            throw EvalError(std::string("contains() item must be a string, got ") +
                            type_name(needle));
        }
        throw EvalError(std::string("contains() requires a list or string, got ") +
                        type_name(hay));
    }
    double x = as_number(eval_node(*n.children[0], ctx), n.text.c_str());
    if (n.text == "int") return std::trunc(x);
    if (n.text == "float") return x;
    if (n.text == "ceil") return std::ceil(x);
    if (n.text == "floor") return std::floor(x);
    double y = as_number(eval_node(*n.children[1], ctx), n.text.c_str());
    if (n.text == "min") return std::min(x, y);
    return std::max(x, y);  // max
}

Value eval_binary(const Node& n, const EvalContext& ctx) {
    BinaryOp op = n.binary_op;

    // and/or short-circuit left to right
    if (op == BinaryOp::And || op == BinaryOp::Or) {
        bool left = as_bool(eval_node(*n.children[0], ctx), "'and'/'or'");
        if (op == BinaryOp::And && !left) return false;
        if (op == BinaryOp::Or && left) return true;
        return as_bool(eval_node(*n.children[1], ctx), "'and'/'or'");
    }

    Value lv = eval_node(*n.children[0], ctx);
    Value rv = eval_node(*n.children[1], ctx);

    if (op == BinaryOp::Eq || op == BinaryOp::Ne) {
        if (lv.index() != rv.index())
            throw EvalError(std::string("cannot compare ") + type_name(lv) + " with " +
                            type_name(rv));
        bool eq = values_equal(lv, rv);
        return op == BinaryOp::Eq ? eq : !eq;
    }

    if (op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt || op == BinaryOp::Ge) {
        int cmp;
        if (std::holds_alternative<double>(lv) && std::holds_alternative<double>(rv)) {
            double a = std::get<double>(lv), b = std::get<double>(rv);
            cmp = a < b ? -1 : (a > b ? 1 : 0);
        } else if (std::holds_alternative<std::string>(lv) &&
                   std::holds_alternative<std::string>(rv)) {
            cmp = std::get<std::string>(lv).compare(std::get<std::string>(rv));
            cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
        } else {
            throw EvalError(std::string("cannot order ") + type_name(lv) + " against " +
                            type_name(rv));
        }
        switch (op) {
            case BinaryOp::Lt: return cmp < 0;
            case BinaryOp::Le: return cmp <= 0;
            case BinaryOp::Gt: return cmp > 0;
            default: return cmp >= 0;
        }
    }

    // + allows string concatenation; everything else is numeric only
    if (op == BinaryOp::Add && std::holds_alternative<std::string>(lv) &&
        std::holds_alternative<std::string>(rv))
        return std::get<std::string>(lv) + std::get<std::string>(rv);

    double a = as_number(lv, op_symbol(op));
    double b = as_number(rv, op_symbol(op));
    switch (op) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div:
            if (b == 0) throw EvalError("division by zero");
            return a / b;
        case BinaryOp::Mod:
            if (b == 0) throw EvalError("modulo by zero");
            return std::fmod(a, b);
        default: throw EvalError("internal: bad binary op");
    }
}

Value eval_node(const Node& n, const EvalContext& ctx) {
    switch (n.kind) {
        case Node::Kind::Number: return n.number;
        case Node::Kind::String: return n.text;
        case Node::Kind::Bool: return n.number != 0;
        case Node::Kind::Identifier: {
            const Value* v = ctx.find(n.text);
            if (!v) throw EvalError("unbound identifier '" + n.text + "'");
            return *v;
        }
        case Node::Kind::Unary: {
            Value v = eval_node(*n.children[0], ctx);
            if (n.unary_op == UnaryOp::Neg) return -as_number(v, "unary '-'");
            return !as_bool(v, "'not'");
        }
        case Node::Kind::Binary: return eval_binary(n, ctx);
        case Node::Kind::Call: return eval_call(n, ctx);
    }
    throw EvalError("internal: bad node kind");
}

void collect_identifiers(const Node& n, std::vector<std::string>& out) {
    if (n.kind == Node::Kind::Identifier) {
        if (std::find(out.begin(), out.end(), n.text) == out.end()) out.push_back(n.text);
    }
    for (const auto& c : n.children) collect_identifiers(*c, out);
}

}  // namespace

const char* type_name(const Value& v) {
    switch (v.index()) {
        case 0: return "number";
        case 1: return "string";
        case 2: return "boolean";
        default: return "list";
    }
}

std::string to_display_string(const Value& v) {
    if (const double* d = std::get_if<double>(&v)) {
        double x = *d;
        if (std::trunc(x) == x && std::abs(x) < 1e15)
            return std::to_string(static_cast<long long>(x));
        char buf[64];
        auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
        (void)ec;
        return std::string(buf, p);
    }
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    const auto& list = std::get<std::vector<std::string>>(v);
    std::string out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (i) out += ",";
        out += list[i];
    }
    return out;
}

bool values_equal(const Value& a, const Value& b) {
    return a == b;
}

Expression Expression::parse(std::string source) {
    Lexer lexer(source);
    Parser parser(lexer.run());
    Expression e;
    e.root_ = parser.run();
    e.source_ = std::move(source);
    return e;
}

Value Expression::evaluate(const EvalContext& ctx) const {
    if (!root_) throw EvalError("evaluating an empty expression");
    return eval_node(*root_, ctx);
}

std::vector<std::string> Expression::free_identifiers() const {
    std::vector<std::string> out;
    if (root_) collect_identifiers(*root_, out);
    return out;
}

namespace {

// Walks a template, appending literal text via on_text and handing each
// {expr} segment (offset, source) to on_segment.
template <class TextFn, class SegmentFn>
void scan_template(const std::string& tmpl, TextFn on_text, SegmentFn on_segment) {
    std::size_t i = 0;
    while (i < tmpl.size()) {
        char c = tmpl[i];
        if (c == '{') {
            if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
                on_text('{');
                i += 2;
                continue;
            }
            std::size_t start = i + 1;
            std::size_t j = start;
            char quote = 0;
            while (j < tmpl.size()) {
                char d = tmpl[j];
                if (quote) {
                    if (d == '\\') ++j;
                    else if (d == quote) quote = 0;
                } else if (d == '\'' || d == '"') {
                    quote = d;
                } else if (d == '}') {
                    break;
                }
                ++j;
            }
            if (j >= tmpl.size()) throw ParseError(i, "unterminated '{' in template");
            on_segment(i, tmpl.substr(start, j - start));
            i = j + 1;
        } else if (c == '}') {
            if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
                on_text('}');
                i += 2;
                continue;
            }
            throw ParseError(i, "unmatched '}' in template; use '}}' for a literal");
        } else {
            on_text(c);
            ++i;
        }
    }
}

}  // namespace

std::string interpolate(const std::string& tmpl, const EvalContext& ctx) {
    std::string out;
    out.reserve(tmpl.size());
    scan_template(
        tmpl, [&](char c) { out += c; },
        [&](std::size_t offset, const std::string& segment) {
            try {
                Expression e = Expression::parse(segment);
                out += to_display_string(e.evaluate(ctx));
            } catch (const VortexError& err) {
                throw EvalError("in template segment at offset " + std::to_string(offset) + ": " +
                                err.what());
            }
        });
    return out;
}

std::optional<std::string> check_template(const std::string& tmpl) {
    try {
        scan_template(
            tmpl, [](char) {},
            [](std::size_t offset, const std::string& segment) {
                try {
                    Expression::parse(segment);
                } catch (const ParseError& err) {
                    throw ParseError(offset, err.detail);
                }
            });
    } catch (const VortexError& err) {
        return err.what();
    }
    return std::nullopt;
}

}  // namespace vortex::expr
