#include "dnpvi/expr.hpp"

#include "dnpvi/error.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>

namespace dnpvi {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

struct FunctionInfo {
    std::string_view name;
    Function fn;
    int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"sin", Function::Sin, 1},   {"cos", Function::Cos, 1},   {"exp", Function::Exp, 1},
    {"log", Function::Log, 1},   {"tanh", Function::Tanh, 1}, {"abs", Function::Abs, 1},
    {"sqrt", Function::Sqrt, 1}, {"min", Function::Min, 2},   {"max", Function::Max, 2},
    {"pow", Function::Pow, 2},
};

std::optional<FunctionInfo> lookup_function(std::string_view name) {
    for (const auto& info : kFunctions) {
        if (info.name == name) return info;
    }
    return std::nullopt;
}

enum class TokenKind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string_view text;
    std::size_t offset = 0;
    double number = 0.0;
};

std::string_view describe(TokenKind kind) {
    switch (kind) {
        case TokenKind::Number: return "number";
        case TokenKind::Ident: return "identifier";
        case TokenKind::Plus: return "'+'";
        case TokenKind::Minus: return "'-'";
        case TokenKind::Star: return "'*'";
        case TokenKind::Slash: return "'/'";
        case TokenKind::Caret: return "'^'";
        case TokenKind::LParen: return "'('";
        case TokenKind::RParen: return "')'";
        case TokenKind::Comma: return "','";
        case TokenKind::End: return "end of input";
    }
    return "?";
}

class Parser {
public:
    Parser(std::string_view source, const ParseContext& context)
        : src_(source), ctx_(context) {
        advance();
    }

    NodePtr parse() {
        NodePtr root = expr();
        if (tok_.kind != TokenKind::End) {
            fail(tok_.offset, fmt::format("syntax error: unexpected {}", describe(tok_.kind)));
        }
        return root;
    }

private:
    [[noreturn]] void fail(std::size_t offset, const std::string& message) const {
        int line = 1;
        int column = 1;
        for (std::size_t i = 0; i < offset && i < src_.size(); ++i) {
            if (src_[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError(fmt::format("{} at line {}, column {}", message, line, column), line, column);
    }

    SourceSpan span_from(std::size_t begin) const {
        SourceSpan s;
        s.offset = begin;
        s.length = prev_end_ - begin;
        for (std::size_t i = 0; i < begin && i < src_.size(); ++i) {
            if (src_[i] == '\n') {
                ++s.line;
                s.column = 1;
            } else {
                ++s.column;
            }
        }
        return s;
    }

    void advance() {
        prev_end_ = tok_.offset + tok_.text.size();
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_ = Token{};
        tok_.offset = pos_;
        if (pos_ >= src_.size()) {
            tok_.kind = TokenKind::End;
            return;
        }
        const char c = src_[pos_];
        const auto single = [&](TokenKind kind) {
            tok_.kind = kind;
            tok_.text = src_.substr(pos_, 1);
            ++pos_;
        };
        switch (c) {
            case '+': return single(TokenKind::Plus);
            case '-': return single(TokenKind::Minus);
            case '*': return single(TokenKind::Star);
            case '/': return single(TokenKind::Slash);
            case '^': return single(TokenKind::Caret);
            case '(': return single(TokenKind::LParen);
            case ')': return single(TokenKind::RParen);
            case ',': return single(TokenKind::Comma);
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
                ++end;
            }
            tok_.kind = TokenKind::Ident;
            tok_.text = src_.substr(pos_, end - pos_);
            pos_ = end;
            return;
        }
        fail(pos_, fmt::format("syntax error: unexpected character '{}'", c));
    }

    void lex_number() {
        const auto digit = [&](std::size_t i) {
            return i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]));
        };
        std::size_t end = pos_;
        while (digit(end)) ++end;
        if (end < src_.size() && src_[end] == '.') {
            ++end;
            while (digit(end)) ++end;
        }
        // Exponent only when followed by digits, so "2*e" keeps e as the constant.
        if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
            std::size_t k = end + 1;
            if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
            if (digit(k)) {
                end = k;
                while (digit(end)) ++end;
            }
        }
        const std::string_view text = src_.substr(pos_, end - pos_);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            fail(pos_, fmt::format("syntax error: malformed number '{}'", text));
        }
        tok_.kind = TokenKind::Number;
        tok_.text = text;
        tok_.number = value;
        pos_ = end;
    }

    void expect(TokenKind kind) {
        if (tok_.kind != kind) {
            fail(tok_.offset, fmt::format("syntax error: expected {} but found {}", describe(kind),
                                          describe(tok_.kind)));
        }
        advance();
    }

    static NodePtr binary(BinaryOp op, NodePtr lhs, NodePtr rhs, SourceSpan span) {
        auto node = std::make_shared<ExprNode>();
        node->kind = NodeKind::Binary;
        node->op = op;
        node->children = {std::move(lhs), std::move(rhs)};
        node->span = span;
        return node;
    }

    NodePtr expr() {
        const std::size_t begin = tok_.offset;
        NodePtr lhs = term();
        while (tok_.kind == TokenKind::Plus || tok_.kind == TokenKind::Minus) {
            const BinaryOp op = tok_.kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            advance();
            NodePtr rhs = term();
            lhs = binary(op, std::move(lhs), std::move(rhs), span_from(begin));
        }
        return lhs;
    }

    NodePtr term() {
        const std::size_t begin = tok_.offset;
        NodePtr lhs = factor();
        while (tok_.kind == TokenKind::Star || tok_.kind == TokenKind::Slash) {
            const BinaryOp op = tok_.kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div;
            advance();
            NodePtr rhs = factor();
            lhs = binary(op, std::move(lhs), std::move(rhs), span_from(begin));
        }
        return lhs;
    }

    NodePtr factor() {
        const std::size_t begin = tok_.offset;
        NodePtr base = unary();
        if (tok_.kind == TokenKind::Caret) {
            advance();
            NodePtr exponent = factor();  // right-associative
            return binary(BinaryOp::Pow, std::move(base), std::move(exponent), span_from(begin));
        }
        return base;
    }

    NodePtr unary() {
        if (tok_.kind == TokenKind::Minus) {
            const std::size_t begin = tok_.offset;
            advance();
            auto node = std::make_shared<ExprNode>();
            node->kind = NodeKind::Negate;
            node->children = {unary()};
            node->span = span_from(begin);
            return node;
        }
        return atom();
    }

    NodePtr atom() {
        const std::size_t begin = tok_.offset;
        switch (tok_.kind) {
            case TokenKind::Number: {
                auto node = std::make_shared<ExprNode>();
                node->kind = NodeKind::Constant;
                node->value = tok_.number;
                advance();
                node->span = span_from(begin);
                return node;
            }
            case TokenKind::LParen: {
                advance();
                NodePtr inner = expr();
                expect(TokenKind::RParen);
                return inner;
            }
            case TokenKind::Ident: return identifier();
            default:
                fail(tok_.offset, fmt::format("syntax error: unexpected {}", describe(tok_.kind)));
        }
    }

    NodePtr identifier() {
        const std::size_t begin = tok_.offset;
        const std::string_view name = tok_.text;
        advance();
        if (tok_.kind == TokenKind::LParen) {
            const auto info = lookup_function(name);
            if (!info) fail(begin, fmt::format("unknown function '{}'", name));
            advance();
            auto node = std::make_shared<ExprNode>();
            node->kind = NodeKind::Call;
            node->fn = info->fn;
            node->children.push_back(expr());
            while (tok_.kind == TokenKind::Comma) {
                advance();
                node->children.push_back(expr());
            }
            expect(TokenKind::RParen);
            if (static_cast<int>(node->children.size()) != info->arity) {
                fail(begin, fmt::format("arity mismatch: '{}' takes {} argument(s), got {}", name,
                                        info->arity, node->children.size()));
            }
            node->span = span_from(begin);
            return node;
        }
        auto node = std::make_shared<ExprNode>();
        if (name == "pi" || name == "e") {
            node->kind = NodeKind::Constant;
            node->name = std::string(name);
            node->value = name == "pi" ? std::numbers::pi : std::numbers::e;
        } else {
            node->kind = NodeKind::Variable;
            node->var = resolve_variable(name, begin);
        }
        node->span = span_from(begin);
        return node;
    }

    VarRef resolve_variable(std::string_view name, std::size_t offset) const {
        VarRef v;
        if (name == "x") {
            v.kind = VarRef::Kind::X;
        } else if (name == "y") {
            if (ctx_.dim == 1) fail(offset, "unknown identifier 'y' (spatial dimension is 1)");
            v.kind = VarRef::Kind::Y;
        } else if (name == "t") {
            v.kind = VarRef::Kind::T;
        } else if (name.size() >= 2 && name[0] == 'u' && name[1] != '0') {
            int index = 0;
            const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
            if (ec != std::errc{} || ptr != name.data() + name.size() || index < 1 ||
                (ctx_.components > 0 && index > ctx_.components)) {
                fail(offset, fmt::format("unknown identifier '{}'", name));
            }
            v.kind = VarRef::Kind::U;
            v.component = index - 1;
        } else {
            fail(offset, fmt::format("unknown identifier '{}'", name));
        }
        return v;
    }

    std::string_view src_;
    ParseContext ctx_;
    std::size_t pos_ = 0;
    std::size_t prev_end_ = 0;
    Token tok_;
};

template <class T>
T apply(Function fn, const T& a, const T& b) {
    using std::abs, std::cos, std::exp, std::log, std::max, std::min, std::pow, std::sin,
        std::sqrt, std::tanh;
    switch (fn) {
        case Function::Sin: return sin(a);
        case Function::Cos: return cos(a);
        case Function::Exp: return exp(a);
        case Function::Log: return log(a);
        case Function::Tanh: return tanh(a);
        case Function::Abs: return abs(a);
        case Function::Sqrt: return sqrt(a);
        case Function::Min: return min(a, b);
        case Function::Max: return max(a, b);
        case Function::Pow: return pow(a, b);
    }
    return a;
}

template <class T>
T eval_node(const ExprNode& node, const EvalPoint<T>& point) {
    T result{};
    switch (node.kind) {
        case NodeKind::Constant: return T(node.value);
        case NodeKind::Variable:
            switch (node.var.kind) {
                case VarRef::Kind::X: return T(point.x);
                case VarRef::Kind::Y: return T(point.y);
                case VarRef::Kind::T: return T(point.t);
                case VarRef::Kind::U:
                    if (static_cast<std::size_t>(node.var.component) >= point.u.size()) {
                        throw EvalError(fmt::format("unbound variable '{}'", variable_name(node.var)));
                    }
                    return point.u[static_cast<std::size_t>(node.var.component)];
            }
            break;
        case NodeKind::Negate: result = -eval_node(*node.children[0], point); break;
        case NodeKind::Binary: {
            const T a = eval_node(*node.children[0], point);
            const T b = eval_node(*node.children[1], point);
            using std::pow;
            switch (node.op) {
                case BinaryOp::Add: result = a + b; break;
                case BinaryOp::Sub: result = a - b; break;
                case BinaryOp::Mul: result = a * b; break;
                case BinaryOp::Div: result = a / b; break;
                case BinaryOp::Pow: result = pow(a, b); break;
            }
            break;
        }
        case NodeKind::Call: {
            const T a = eval_node(*node.children[0], point);
            const T b = node.children.size() > 1 ? eval_node(*node.children[1], point) : T{};
            result = apply(node.fn, a, b);
            break;
        }
    }
    if (!all_finite(result)) {
        throw EvalError(fmt::format("domain error: non-finite value at column {} (offset {})",
                                    node.span.column, node.span.offset));
    }
    return result;
}

void collect(const ExprNode& node, std::set<VarRef>& out) {
    if (node.kind == NodeKind::Variable) out.insert(node.var);
    for (const auto& c : node.children) collect(*c, out);
}

void print(const ExprNode& node, std::string& out) {
    switch (node.kind) {
        case NodeKind::Constant:
            out += node.name.empty() ? fmt::format("{}", node.value) : node.name;
            return;
        case NodeKind::Variable: out += variable_name(node.var); return;
        case NodeKind::Negate:
            out += "(-";
            print(*node.children[0], out);
            out += ")";
            return;
        case NodeKind::Binary: {
            static constexpr std::string_view ops[] = {" + ", " - ", " * ", " / ", "^"};
            out += "(";
            print(*node.children[0], out);
            out += ops[static_cast<int>(node.op)];
            print(*node.children[1], out);
            out += ")";
            return;
        }
        case NodeKind::Call:
            out += function_name(node.fn);
            out += "(";
            for (std::size_t i = 0; i < node.children.size(); ++i) {
                if (i > 0) out += ", ";
                print(*node.children[i], out);
            }
            out += ")";
            return;
    }
}

bool same_tree(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
    switch (a.kind) {
        case NodeKind::Constant:
            if (a.value != b.value) return false;
            break;
        case NodeKind::Variable:
            if (a.var != b.var) return false;
            break;
        case NodeKind::Binary:
            if (a.op != b.op) return false;
            break;
        case NodeKind::Call:
            if (a.fn != b.fn) return false;
            break;
        case NodeKind::Negate: break;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!same_tree(*a.children[i], *b.children[i])) return false;
    }
    return true;
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const ExprNode> root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {}

Expr Expr::constant(double value) {
    auto node = std::make_shared<ExprNode>();
    node->kind = NodeKind::Constant;
    node->value = value;
    return Expr(std::move(node), fmt::format("{}", value));
}

std::string Expr::to_string() const {
    std::string out;
    print(*root_, out);
    return out;
}

std::set<VarRef> Expr::variables() const {
    std::set<VarRef> out;
    collect(*root_, out);
    return out;
}

bool Expr::depends_on_u() const {
    const auto vars = variables();
    return std::any_of(vars.begin(), vars.end(),
                       [](const VarRef& v) { return v.kind == VarRef::Kind::U; });
}

bool Expr::is_zero() const noexcept {
    return root_->kind == NodeKind::Constant && root_->value == 0.0;
}

double Expr::evaluate(const EvalPoint<double>& point) const { return eval_node(*root_, point); }

Dual Expr::evaluate(const EvalPoint<Dual>& point) const { return eval_node(*root_, point); }

bool operator==(const Expr& a, const Expr& b) { return same_tree(*a.root_, *b.root_); }

Expr parse_expr(std::string_view source, const ParseContext& context) {
    Parser parser(source, context);
    return Expr(parser.parse(), std::string(source));
}

double eval_expr(const Expr& expr, const std::map<std::string, double>& bindings) {
    EvalPoint<double> point;
    std::vector<double> u;
    for (const VarRef& v : expr.variables()) {
        const std::string name = variable_name(v);
        const auto it = bindings.find(name);
        if (it == bindings.end()) throw EvalError(fmt::format("unbound variable '{}'", name));
        switch (v.kind) {
            case VarRef::Kind::X: point.x = it->second; break;
            case VarRef::Kind::Y: point.y = it->second; break;
            case VarRef::Kind::T: point.t = it->second; break;
            case VarRef::Kind::U:
                if (u.size() <= static_cast<std::size_t>(v.component)) {
                    u.resize(static_cast<std::size_t>(v.component) + 1, 0.0);
                }
                u[static_cast<std::size_t>(v.component)] = it->second;
                break;
        }
    }
    point.u = u;
    return expr.evaluate(point);
}

std::string_view function_name(Function fn) noexcept {
    for (const auto& info : kFunctions) {
        if (info.fn == fn) return info.name;
    }
    return "?";
}

std::string variable_name(const VarRef& var) {
    switch (var.kind) {
        case VarRef::Kind::X: return "x";
        case VarRef::Kind::Y: return "y";
        case VarRef::Kind::T: return "t";
        case VarRef::Kind::U: return fmt::format("u{}", var.component + 1);
    }
    return "?";
}

}  // namespace dnpvi
