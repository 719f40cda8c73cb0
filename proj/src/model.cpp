#include "sdde/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace sdde {

namespace {

const std::vector<std::string>& vars_v() {
    static const std::vector<std::string> v{"v"};
    return v;
}

const std::vector<std::string>& vars_xv() {
    static const std::vector<std::string> v{"x", "v"};
    return v;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (i + 1 == n) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

// Grid maximum of |f| followed by golden-section refinement in the two
// neighbouring cells.
double sup_abs_1d(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
    const auto xs = linspace(lo, hi, std::max<std::size_t>(n, 3));
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = std::fabs(f(xs[i]));
        if (!std::isfinite(v)) throw Error("non-finite function value on the sampling grid at v = " + std::to_string(xs[i]));
        if (v > best) best = v, arg = i;
    }
    double a = xs[arg == 0 ? 0 : arg - 1];
    double b = xs[std::min(arg + 1, xs.size() - 1)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = std::fabs(f(c)), fd = std::fabs(f(d));
    for (int it = 0; it < 80 && b - a > 1e-13 * std::max(1.0, std::fabs(a)); ++it) {
        if (fc > fd) {
            b = d, d = c, fd = fc;
            c = b - phi * (b - a);
            fc = std::fabs(f(c));
        } else {
            a = c, c = d, fc = fd;
            d = a + phi * (b - a);
            fd = std::fabs(f(d));
        }
        best = std::max({best, fc, fd});
    }
    return best;
}

double lipschitz_1d(const std::function<double(double)>& f, const std::vector<double>& xs) {
    double L = 0.0;
    double prev = f(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double cur = f(xs[i]);
        L = std::max(L, std::fabs(cur - prev) / (xs[i] - xs[i - 1]));
        prev = cur;
    }
    return L;
}

} // namespace

ModelSpec::ModelSpec(Functions f, ModelParams p, double v_lo, double v_hi)
    : f_(std::move(f)), p_(p), v_lo_(v_lo), v_hi_(v_hi) {
    if (f_.beta.has_value() == f_.gamma.has_value())
        throw std::invalid_argument("ModelSpec: supply exactly one of beta and gamma");
    auto cd = f_.d.constant_value();
    auto cg = f_.d1g.constant_value();
    if (cd && cg) k_const_ = *cd - *cg;
}

ModelSpec ModelSpec::from_strings(const std::string& q, const std::optional<std::string>& beta,
                                  const std::optional<std::string>& gamma, const std::string& g,
                                  const std::string& d1g, const std::string& d, ModelParams p, double v_lo,
                                  double v_hi) {
    Functions f{Expr::parse(q, vars_v()),
                beta ? std::optional<Expr>(Expr::parse(*beta, vars_v())) : std::nullopt,
                gamma ? std::optional<Expr>(Expr::parse(*gamma, vars_v())) : std::nullopt,
                Expr::parse(g, vars_xv()),
                Expr::parse(d1g, vars_xv()),
                Expr::parse(d, vars_xv())};
    return ModelSpec(std::move(f), p, v_lo, v_hi);
}

ModelSpec ModelSpec::demo() {
    return from_strings("0.5/(1+v^2)", std::nullopt, std::string("1"), "0.5 + 1/(1+v^2)", "0", "0",
                        ModelParams{1.0, 2.0, 0.2, 0.5, 2.0, 5.0});
}

double ModelSpec::q(double v) const { return f_.q.eval({v}); }

double ModelSpec::beta(double v) const {
    if (f_.beta) return f_.beta->eval({v});
    const double den = f_.g.eval({p_.x1, v});
    if (den == 0.0) throw EvalException({EvalErrc::division_by_zero, "beta: g(x1, v) vanishes"});
    return f_.gamma->eval({v}) / den;
}

double ModelSpec::g(double x, double v) const { return f_.g.eval({x, v}); }
double ModelSpec::d1g(double x, double v) const { return f_.d1g.eval({x, v}); }
double ModelSpec::d(double x, double v) const { return f_.d.eval({x, v}); }

double ModelSpec::k(double x, double v) const {
    if (k_const_) return *k_const_;
    return d(x, v) - d1g(x, v);
}

ModelSpec ModelSpec::with_params(ModelParams p) const { return ModelSpec(f_, p, v_lo_, v_hi_); }

std::function<double(double)> derive_beta(const Expr& gamma, const Expr& g, double x1) {
    return [gamma, g, x1](double v) {
        const double den = g.eval({x1, v});
        if (den == 0.0) throw EvalException({EvalErrc::division_by_zero, "beta: g(x1, v) vanishes"});
        return gamma.eval({v}) / den;
    };
}

CheckReport validate(const ModelSpec& spec, const ValidationGrid& grid) {
    CheckReport r;
    const auto& p = spec.params();
    r.add_flag("param.x1_lt_x2", p.x1 < p.x2, "x1 < x2", p.x1, p.x2);
    r.add_flag("param.eps_positive", p.eps > 0.0, "eps > 0", p.eps, 0.0);
    r.add_flag("param.K_ge_eps", p.K >= p.eps, "K >= eps", p.eps, p.K);
    r.add_flag("param.b_positive", p.b > 0.0, "b > 0", p.b, 0.0);
    r.add_flag("param.mu_nonneg", p.mu >= 0.0, "mu >= 0", p.mu, 0.0);
    const double gap = p.x2 - p.x1, gap_max = p.b * p.eps / p.K;
    r.add_flag("param.maturity_gap", gap > 0.0 && gap < gap_max, "x2 - x1 in the open interval (0, b eps / K)", gap,
               gap_max);
    const bool range_ok = std::isfinite(spec.v_lo()) && std::isfinite(spec.v_hi()) && spec.v_lo() < spec.v_hi();
    r.add_flag("param.v_range", range_ok, fmt("validated v-range [%g, %g]", spec.v_lo(), spec.v_hi()));
    if (!range_ok || grid.nx < 2 || grid.nv < 2) {
        r.add_skip("g.bounds", "grid checks need a finite v-range and at least 2x2 grid points");
        return r;
    }

    const auto xs = linspace(p.x2 - p.b, p.x2 + p.b, grid.nx);
    const auto vs = linspace(spec.v_lo(), spec.v_hi(), grid.nv);
    double g_min = std::numeric_limits<double>::infinity(), g_max = -g_min;
    std::size_t below = 0, above = 0, total = 0;
    double consistency = 0.0;
    std::string first_error;
    for (double x : xs) {
        for (double v : vs) {
            ++total;
            try {
                const double gv = spec.g(x, v);
                g_min = std::min(g_min, gv);
                g_max = std::max(g_max, gv);
                below += gv < p.eps;
                above += gv > p.K;
                const double fd = diff_fd(spec.functions().g, "x", Env{{"x", x}, {"v", v}}, grid.fd_step);
                consistency = std::max(consistency, std::fabs(spec.d1g(x, v) - fd));
            } catch (const EvalException& e) {
                if (first_error.empty()) first_error = fmt("at (x, v) = (%g, %g): ", x, v) + e.what();
            }
        }
    }
    if (!first_error.empty()) {
        r.add_flag("eval.g_d1g", false, first_error);
    }
    r.add_bound("g.lower_bound", p.eps, g_min,
                "eps <= g; violated at " + std::to_string(below) + " of " + std::to_string(total) + " grid points");
    r.add_bound("g.upper_bound", g_max, p.K,
                "g <= K; violated at " + std::to_string(above) + " of " + std::to_string(total) + " grid points");
    r.add_bound("d1g.consistency", consistency, grid.tol_consistency,
                fmt("max |D1g - central difference of g in x|, step %g", grid.fd_step));

    auto lip_item = [&](const char* id, const std::function<double(double)>& f) {
        try {
            const double L = lipschitz_1d(f, vs);
            r.add_flag(id, std::isfinite(L), "empirical Lipschitz constant on the v-grid", L,
                       std::numeric_limits<double>::infinity());
        } catch (const EvalException& e) {
            r.add_flag(id, false, e.what());
        }
    };
    lip_item("lipschitz.q", [&](double v) { return spec.q(v); });
    lip_item("lipschitz.beta", [&](double v) { return spec.beta(v); });
    try {
        double L = 0.0;
        for (double x : xs) L = std::max(L, lipschitz_1d([&](double v) { return spec.d(x, v); }, vs));
        r.add_flag("lipschitz.d", std::isfinite(L), "empirical Lipschitz constant of d in v", L,
                   std::numeric_limits<double>::infinity());
    } catch (const EvalException& e) {
        r.add_flag("lipschitz.d", false, e.what());
    }
    return r;
}

DerivedBounds derive_bounds(const ModelSpec& spec, const ValidationGrid& grid) {
    const auto& p = spec.params();
    DerivedBounds out;
    const std::size_t nv = std::max<std::size_t>(grid.nv, 3);
    const auto vs = linspace(spec.v_lo(), spec.v_hi(), nv);
    const auto xs = linspace(p.x2 - p.b, p.x2 + p.b, std::max<std::size_t>(grid.nx, 2));
    auto q = [&](double v) { return spec.q(v); };
    auto beta = [&](double v) { return spec.beta(v); };

    out.M_q = sup_abs_1d(q, spec.v_lo(), spec.v_hi(), nv);
    out.M_beta = sup_abs_1d(beta, spec.v_lo(), spec.v_hi(), nv);
    out.L_q = lipschitz_1d(q, vs);
    out.L_beta = lipschitz_1d(beta, vs);

    const Expr& g = spec.functions().g;
    for (double x : xs) {
        for (double v : vs) {
            const double kv = spec.k(x, v);
            if (!std::isfinite(kv)) throw Error("non-finite d - D1g on the sampling grid");
            out.M_k = std::max(out.M_k, std::fabs(kv));
            const Env at{{"x", x}, {"v", v}};
            const double gx = std::fabs(diff_fd(g, "x", at, grid.fd_step));
            const double gv = std::fabs(diff_fd(g, "v", at, grid.fd_step));
            out.L_g = std::max({out.L_g, gx, gv});
        }
        out.L_d = std::max(out.L_d, lipschitz_1d([&](double v) { return spec.d(x, v); }, vs));
    }
    out.M_G = p.K * std::exp(spec.h() * out.M_k);

    // Least-squares line for |beta| against |v|, then lifted to dominate every sample.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> ax(vs.size()), ay(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        ax[i] = std::fabs(vs[i]);
        ay[i] = std::fabs(beta(vs[i]));
        sx += ax[i], sy += ay[i], sxx += ax[i] * ax[i], sxy += ax[i] * ay[i];
    }
    const double n = static_cast<double>(vs.size());
    const double den = n * sxx - sx * sx;
    const double slope = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    out.C_beta = std::max(slope, 0.0);
    double lift = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) lift = std::max(lift, ay[i] - out.C_beta * ax[i]);
    out.a_beta = std::max(lift, 0.0);
    return out;
}

} // namespace sdde
