#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdde/errors.hpp"

namespace sdde {

enum class EvalErrc { division_by_zero, domain, unbound_variable, non_finite };

struct EvalError {
    EvalErrc code;
    std::string message;
};

/// Outcome of a checked evaluation: either a finite value or an error, never NaN.
struct EvalResult {
    double value = 0.0;
    std::optional<EvalError> error;

    explicit operator bool() const noexcept { return !error.has_value(); }
};

class EvalException : public Error {
public:
    explicit EvalException(EvalError err) : Error(err.message), error_(std::move(err)) {}
    const EvalError& error() const noexcept { return error_; }

private:
    EvalError error_;
};

using Env = std::map<std::string, double, std::less<>>;

/// Immutable scalar expression over a fixed list of declared variables.
///
/// Grammar (whitespace insignificant):
///   expr   := term (("+"|"-") term)*
///   term   := factor (("*"|"/") factor)*
///   factor := "-" factor | base ("^" factor)?
///   base   := number | ident | ident "(" expr ")" | "(" expr ")"
///
/// so that power binds tighter than unary minus (-2^2 == -4) and is
/// right-associative. Functions: exp log sqrt abs tanh sin cos.
class Expr {
public:
    enum class Kind { number, variable, add, sub, mul, div, pow, neg, call };
    enum class Func { exp, log, sqrt, abs, tanh, sin, cos };

    struct Node {
        Kind kind;
        double number = 0.0;     // Kind::number
        std::size_t slot = 0;    // Kind::variable
        Func func = Func::exp;   // Kind::call
        int lhs = -1;            // child indices into the node arena
        int rhs = -1;
    };

    Expr();

    static Expr parse(std::string_view source, std::vector<std::string> declared_vars);
    static Expr constant(double value);

    /// Positional evaluation; args[i] binds variables()[i].
    EvalResult try_eval(std::span<const double> args) const noexcept;
    double eval(std::span<const double> args) const;

    double eval(std::initializer_list<double> args) const {
        return eval(std::span<const double>(args.begin(), args.size()));
    }

    EvalResult try_eval(const Env& env) const;
    double eval(const Env& env) const;

    const std::vector<std::string>& variables() const noexcept;
    std::optional<std::size_t> slot_of(std::string_view name) const noexcept;

    /// Value if the expression references no variable.
    std::optional<double> constant_value() const noexcept;

    /// Canonical text that parses back to the same tree.
    std::string to_string() const;
    const std::string& source() const noexcept;

    const std::vector<Node>& nodes() const noexcept;
    int root() const noexcept;

private:
    struct Impl;
    explicit Expr(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

/// Central difference (e(p+step) - e(p-step)) / (2 step) in `var`.
double diff_fd(const Expr& e, std::string_view var, const Env& point, double step);

std::string_view function_name(Expr::Func f) noexcept;

} // namespace sdde
