#pragma once

#include <functional>
#include <optional>
#include <string>

#include "sdde/expr.hpp"
#include "sdde/report.hpp"

namespace sdde {

struct ModelParams {
    double x1 = 1.0;  // initial maturity
    double x2 = 2.0;  // full maturity
    double mu = 0.2;  // mature-cell decay rate
    double eps = 0.5; // lower bound of g on the maturity ball
    double K = 2.0;   // upper bound of g on the maturity ball
    double b = 5.0;   // maturity ball radius around x2
};

/// Sampling plan for validation and bound derivation over
/// [x2 - b, x2 + b] x [v_lo, v_hi].
struct ValidationGrid {
    std::size_t nx = 41;
    std::size_t nv = 401;
    double tol_consistency = 1e-4;
    double fd_step = 1e-5;
};

/// The stem-cell maturation model: rate functions as expressions plus
/// scalar parameters. q, beta, gamma are in `v`; g, d1g, d in `x, v`.
/// Exactly one of beta / gamma is supplied; beta = gamma / g(x1, .) otherwise.
class ModelSpec {
public:
    struct Functions {
        Expr q;
        std::optional<Expr> beta;
        std::optional<Expr> gamma;
        Expr g;
        Expr d1g;
        Expr d;
    };

    ModelSpec(Functions f, ModelParams p, double v_lo = -10.0, double v_hi = 10.0);

    /// Parse textual rate functions; the variable lists are fixed.
    static ModelSpec from_strings(const std::string& q, const std::optional<std::string>& beta,
                                  const std::optional<std::string>& gamma, const std::string& g,
                                  const std::string& d1g, const std::string& d, ModelParams p, double v_lo = -10.0,
                                  double v_hi = 10.0);

    /// Built-in demonstration model satisfying both assumption sets.
    static ModelSpec demo();

    double q(double v) const;
    double beta(double v) const;
    double g(double x, double v) const;
    double d1g(double x, double v) const;
    double d(double x, double v) const;
    /// d - D1g, the exponent integrand of the progenitor growth factor.
    double k(double x, double v) const;
    bool k_is_constant() const noexcept { return k_const_.has_value(); }

    const ModelParams& params() const noexcept { return p_; }
    const Functions& functions() const noexcept { return f_; }
    double h() const noexcept { return p_.b / p_.K; }
    double min_delay() const noexcept { return (p_.x2 - p_.x1) / p_.K; }
    double max_delay() const noexcept { return (p_.x2 - p_.x1) / p_.eps; }
    /// Nested maturation step: at least 50 steps before the earliest crossing.
    double default_dt_y() const noexcept { return (p_.x2 - p_.x1) / (50.0 * p_.K); }
    double v_lo() const noexcept { return v_lo_; }
    double v_hi() const noexcept { return v_hi_; }
    bool in_range(double v) const noexcept { return v >= v_lo_ && v <= v_hi_; }

    ModelSpec with_params(ModelParams p) const;

private:
    Functions f_;
    ModelParams p_;
    double v_lo_, v_hi_;
    std::optional<double> k_const_;
};

/// v -> gamma(v) / g(x1, v); throws EvalException where g(x1, v) == 0.
std::function<double(double)> derive_beta(const Expr& gamma, const Expr& g, double x1);

struct DerivedBounds {
    double M_q = 0.0;    // sup |q|
    double M_k = 0.0;    // sup |d - D1g| over ball x range
    double M_G = 0.0;    // K exp(h M_k)
    double L_g = 0.0;    // empirical Lipschitz constant of g
    double C_beta = 0.0; // |beta(v)| <= C_beta |v| + a_beta
    double a_beta = 0.0;
    double M_beta = 0.0; // sup |beta|
    double L_q = 0.0;
    double L_beta = 0.0;
    double L_d = 0.0;
};

CheckReport validate(const ModelSpec& spec, const ValidationGrid& grid = {});
DerivedBounds derive_bounds(const ModelSpec& spec, const ValidationGrid& grid = {});

} // namespace sdde
