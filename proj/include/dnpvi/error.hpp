#pragma once

#include <stdexcept>
#include <string>

namespace dnpvi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression or problem/mesh file. Line and column are 1-based;
/// zero means "not known".
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error(what), line_(line), column_(column) {}

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Unbound variable or non-finite intermediate value during evaluation.
class EvalError : public Error {
public:
    using Error::Error;
};

/// A structurally inconsistent problem, mesh or configuration.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Nonlinear or linear solver breakdown.
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace dnpvi
