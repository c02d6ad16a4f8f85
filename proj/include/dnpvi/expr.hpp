#pragma once

// Arithmetic expression DSL used for coefficient functions.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := unary ('^' factor)?
//   unary  := '-' unary | atom
//   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables: u1..um, x, y, t. Constants: pi, e.
// Functions: sin cos exp log tanh abs sqrt (unary), min max pow (binary).

#include "dnpvi/dual.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dnpvi {

enum class NodeKind { Constant, Variable, Negate, Binary, Call };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class Function { Sin, Cos, Exp, Log, Tanh, Abs, Sqrt, Min, Max, Pow };

struct VarRef {
    enum class Kind { U, X, Y, T };
    Kind kind = Kind::X;
    int component = 0;  // 0-based, meaningful for Kind::U

    friend bool operator==(const VarRef&, const VarRef&) = default;
    friend auto operator<=>(const VarRef&, const VarRef&) = default;
};

struct SourceSpan {
    std::size_t offset = 0;
    std::size_t length = 0;
    int line = 1;
    int column = 1;
};

struct ExprNode {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;     // Constant
    std::string name;       // identifier of named constants ("pi", "e"), empty otherwise
    VarRef var;             // Variable
    BinaryOp op = BinaryOp::Add;
    Function fn = Function::Sin;
    std::vector<std::shared_ptr<const ExprNode>> children;
    SourceSpan span;
};

/// Values the variables of an expression are bound to.
template <class T>
struct EvalPoint {
    std::span<const T> u;
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
};

/// Immutable expression tree. Copies share the tree.
class Expr {
public:
    /// The constant zero.
    Expr();
    explicit Expr(std::shared_ptr<const ExprNode> root, std::string source = {});

    static Expr constant(double value);

    [[nodiscard]] const ExprNode& root() const noexcept { return *root_; }
    [[nodiscard]] const std::string& source() const noexcept { return source_; }

    /// Fully parenthesized rendering that reparses to the same tree.
    [[nodiscard]] std::string to_string() const;

    [[nodiscard]] std::set<VarRef> variables() const;
    [[nodiscard]] bool depends_on_u() const;
    /// True when the tree is a literal constant equal to zero.
    [[nodiscard]] bool is_zero() const noexcept;

    /// Throws EvalError when a node produces a non-finite value or a
    /// component index is out of range of `point.u`.
    [[nodiscard]] double evaluate(const EvalPoint<double>& point) const;
    [[nodiscard]] Dual evaluate(const EvalPoint<Dual>& point) const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    std::shared_ptr<const ExprNode> root_;
    std::string source_;
};

/// Restricts which identifiers may appear.
struct ParseContext {
    int components = 0;  // 0: accept any u<k>, k >= 1
    int dim = 2;         // y is rejected when dim == 1
};

/// Throws ParseError with 1-based line/column on syntax errors, unknown
/// identifiers and function arity mismatches.
[[nodiscard]] Expr parse_expr(std::string_view source, const ParseContext& context = {});

/// Map-based evaluation: keys "u1".."um", "x", "y", "t".
[[nodiscard]] double eval_expr(const Expr& expr, const std::map<std::string, double>& bindings);

[[nodiscard]] std::string_view function_name(Function fn) noexcept;
[[nodiscard]] std::string variable_name(const VarRef& var);

}  // namespace dnpvi
