// One line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdde/rhs.hpp"
#include "sdde/solver.hpp"
#include "sdde/verify.hpp"

using namespace sdde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* pattern, double a = 0, double b = 0, double c = 0) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ModelSpec constant_model(double q0, double b0, double c, ModelParams p = {}) {
    return ModelSpec::from_strings(num(q0), num(b0), std::nullopt, num(c), "0", "0", p);
}

Prehistory demo_prehistory(const ModelSpec& spec) {
    const double h = spec.h();
    return Prehistory(History::constant(1.0, -h, 0.0),
                      History::from_function([h](double t) { return 0.1 * (1.0 + t / h); },
                                             [h](double) { return 0.1 / h; }, -h, 0.0, 41));
}

RandomHistory admissible(const ModelSpec& spec, double alpha = 1.0) {
    RandomHistory gen;
    gen.a = -spec.h();
    gen.alpha = alpha;
    return gen;
}

// 1. tau = (x2 - x1)/c for a constant maturation rate.
Outcome threshold_exactness() {
    constexpr double tol = 1e-10;
    const ModelParams p;
    double worst = 0.0;
    for (double c : {p.eps, 1.0, p.K}) {
        const ModelSpec spec = constant_model(0.0, 0.0, c, p);
        const double tau = mature(History::constant(0.0, -spec.h(), 0.0), spec, spec.default_dt_y()).tau;
        worst = std::max(worst, std::fabs(tau - (p.x2 - p.x1) / c));
    }
    return {worst <= tol, fmt("max |tau - (x2-x1)/c| = %.3g over c in {eps, 1, K} (tol %.0e)", worst, tol)};
}

// 2. Envelope of tau and of every maturity node.
Outcome tau_envelope() {
    constexpr double tol = 1e-8;
    const ModelSpec spec = ModelSpec::demo();
    const auto& p = spec.params();
    std::mt19937_64 rng(2);
    const RandomHistory gen = admissible(spec);
    double worst = -INFINITY;
    for (int k = 0; k < 100; ++k) {
        const MaturationResult m = mature(gen(rng), spec, spec.default_dt_y());
        worst = std::max({worst, (p.x2 - p.x1) / p.K - m.tau, m.tau - (p.x2 - p.x1) / p.eps});
        const auto s = m.y.times();
        const auto y = m.y.values();
        for (std::size_t i = 0; i < s.size(); ++i)
            worst = std::max({worst, (p.x2 - p.K * s[i]) - y[i], y[i] - (p.x2 - p.eps * s[i])});
    }
    return {worst <= tol, fmt("worst envelope excess %.3g over 100 prehistories (tol %.0e)", worst, tol)};
}

// 3. Sobolev embedding on random piecewise cubics.
Outcome sobolev() {
    constexpr double tol = 1e-9;
    const double h = ModelSpec::demo().h();
    const double c = std::sqrt(h) + 1.0 / std::sqrt(h);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> amp(0.1, 10.0), off(-2.0, 2.0);
    RandomHistory gen;
    gen.a = -h;
    gen.alpha = INFINITY;
    double worst = -INFINITY, tightest = 0.0;
    for (int k = 0; k < 200; ++k) {
        gen.amplitude = amp(rng);
        gen.offset = off(rng);
        const History f = gen(rng);
        worst = std::max(worst, f.sup_norm() - c * f.h1_norm());
        tightest = std::max(tightest, f.sup_norm() / (c * f.h1_norm()));
    }
    return {worst <= tol, fmt("max sup - C |f|_H1 = %.3g, tightest ratio %.3f over 200 samples (tol %.0e)", worst,
                              tightest, tol)};
}

// 4. Empirical tau-Lipschitz ratio against the closed-form constant.
Outcome tau_lipschitz() {
    constexpr double tol = 1e-6;
    const ModelSpec spec = ModelSpec::demo();
    const DerivedBounds b = derive_bounds(spec);
    const double bound = tau_lip_bound(spec, b.L_g);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const RandomHistory gen = admissible(spec);
    const double dt_y = spec.default_dt_y();
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const History a = gen(rng);
        History c = gen(rng);
        if (k % 2) {
            const double lam = std::pow(10.0, -3.0 * unit(rng));
            c = a.scaled(1.0 - lam) + c.scaled(lam);
        }
        const double d = (a - c).h1_norm();
        if (!(d > 0.0)) continue;
        worst = std::max(worst, std::fabs(mature(a, spec, dt_y).tau - mature(c, spec, dt_y).tau) / d);
    }
    return {worst <= bound + tol, fmt("worst |dtau|/|dpsi|_H1 = %.4g <= bound %.4g (+%.0e)", worst, bound, tol)};
}

// 5. Method of steps against the Picard fixed point.
Outcome oracle_equivalence() {
    constexpr double tol = 1e-6;
    const ModelSpec spec = ModelSpec::demo();
    const double T0 = std::min(0.5, spec.min_delay());
    SolveSettings st;
    st.dt = 1e-3;
    st.T = T0;
    PicardSettings ps;
    ps.T0 = T0;
    ps.tol = 1e-9;
    std::vector<Prehistory> cases{demo_prehistory(spec)};
    std::mt19937_64 rng(5);
    RandomHistory gen = admissible(spec, 0.5);
    gen.amplitude = 0.5;
    for (int k = 0; k < 5; ++k) {
        gen.offset = 1.0;
        History w = gen(rng);
        gen.offset = 0.0;
        cases.emplace_back(std::move(w), gen(rng));
    }
    double worst = 0.0;
    for (const auto& pre : cases)
        worst = std::max(worst, sup_distance(picard_solve(spec, pre, ps).traj, integrate(spec, pre, st), T0));
    return {worst <= tol, fmt("max sup-difference %.3g on [0, %g] over 6 prehistories (tol %.0e)", worst, T0, tol)};
}

// 6. Closed-form decoupled solutions.
Outcome decoupled() {
    constexpr double tol = 1e-9;
    const ModelParams p;
    SolveSettings st;
    st.dt = 1e-3;
    st.T = 1.0;
    const ModelSpec nob = constant_model(0.0, 0.0, 1.5, p);
    const Trajectory a = integrate(nob, Prehistory(History::constant(1.0, -nob.h(), 0.0),
                                                   History::constant(0.7, -nob.h(), 0.0)),
                                   st);
    double ev = 0.0;
    for (std::size_t i = a.origin_index(); i < a.v().size(); ++i)
        ev = std::max(ev, std::fabs(a.v().values()[i] - 0.7 * std::exp(-p.mu * a.v().times()[i])));
    const double q0 = 0.4;
    const ModelSpec grow = constant_model(q0, 0.0, 1.5, p);
    const Trajectory b = integrate(grow, Prehistory(History::constant(0.8, -grow.h(), 0.0),
                                                    History::constant(0.2, -grow.h(), 0.0)),
                                   st);
    double ew = 0.0;
    for (std::size_t i = b.origin_index(); i < b.w().size(); ++i)
        ew = std::max(ew, std::fabs(b.w().values()[i] - 0.8 * std::exp(q0 * b.w().times()[i])));
    return {ev <= tol && ew <= tol, fmt("beta=0: max |v - psi(0)e^{-mu t}| = %.3g; q=q0: max |w - phi(0)e^{q0 t}| = %.3g "
                                        "(tol %.0e)",
                                        ev, ew, tol)};
}

// 7. A priori bounds on the demo run.
Outcome apriori() {
    constexpr double rel = 1e-6;
    const ModelSpec spec = ModelSpec::demo();
    const DerivedBounds b = derive_bounds(spec);
    SolveSettings st;
    st.dt = 1e-3;
    st.T = 5.0;
    const Trajectory tr = integrate(spec, demo_prehistory(spec), st);
    const std::size_t o = tr.origin_index();
    const double phi0 = std::fabs(tr.w().values()[o]), c = std::fabs(tr.v().values()[o]);
    const double kappa = spec.params().mu + b.M_q;
    const double C = b.M_beta * b.M_G * phi0 / kappa;
    double rw = 0.0, rv = 0.0;
    const auto t = tr.w().times();
    for (std::size_t i = o; i < t.size(); ++i) {
        rw = std::max(rw, std::fabs(tr.w().values()[i]) / (phi0 * std::exp(t[i] * b.M_q)));
        rv = std::max(rv, std::fabs(tr.v().values()[i]) / (c + C * std::exp(kappa * t[i])));
    }
    return {rw <= 1.0 + rel && rv <= 1.0 + rel,
            fmt("T = 5: max |w|/bound = %.4f, max |v|/bound = %.4f (relative slack %.0e)", rw, rv, rel)};
}

// 8. Observed order against a fine reference.
Outcome convergence() {
    const ModelSpec spec = ModelSpec::demo();
    const std::vector<double> dts{4e-3, 2e-3, 1e-3, 5e-4, 2.5e-5};
    auto w = [](double t) { return 1.0 + 0.3 * std::sin(30 * t); };
    auto dw = [](double t) { return 9.0 * std::cos(30 * t); };
    const double h = spec.h();
    auto v = [h](double t) { return 0.1 * (1 + t / h) + 0.3 * std::sin(30 * t); };
    auto dv = [h](double t) { return 0.1 / h + 9.0 * std::cos(30 * t); };
    auto min_order = [&](const Prehistory& pre, std::string& table) {
        double m = INFINITY;
        for (const auto& row : convergence_study(spec, pre, 1.0, dts)) {
            table += fmt(" %.3g", row.sup_error);
            if (!std::isnan(row.order)) m = std::min(m, row.order);
        }
        return m;
    };
    std::string tc, ti;
    const double compatible = min_order(make_compatible(spec, w, dw, v, dv, 401), tc);
    const Prehistory raw(History::from_function(w, dw, -h, 0.0, 401), History::from_function(v, dv, -h, 0.0, 401));
    const double incompatible = min_order(raw, ti);
    return {compatible >= 3.0 && incompatible >= 2.0,
            fmt("min order %.2f compatible (>= 3), %.2f incompatible (>= 2);", compatible, incompatible) +
                " errors" + tc + " /" + ti};
}

// 9. Sign-changing prehistory with a nonzero compatibility defect.
Outcome no_positivity() {
    const ModelSpec spec = ModelSpec::demo();
    const double h = spec.h();
    const Prehistory pre(History::constant(1.0, -h, 0.0),
                         History::from_function([](double t) { return 0.1 * std::sin(5 * t); },
                                                [](double t) { return 0.5 * std::cos(5 * t); }, -h, 0.0, 101));
    const double defect = compatibility_defect(spec, pre);
    SolveSettings st;
    st.dt = 1e-3;
    st.T = 5.0;
    const Trajectory tr = integrate(spec, pre, st);
    const DerivedBounds b = derive_bounds(spec);
    CheckReport r = check_apriori_w(tr, spec, b);
    r.merge(check_apriori_v(tr, spec, b));
    r.merge(check_deriv_bound(tr, spec, b));
    const bool negative = *std::min_element(tr.v().values().begin(), tr.v().values().end()) < 0.0;
    const bool reached = std::fabs(tr.t_end() - 5.0) <= 1e-12;
    return {defect > 0.0 && reached && negative && r.all_pass(),
            fmt("defect %.3g, T reached %.3f, v changes sign: ", defect, tr.t_end()) + (negative ? "yes" : "no") +
                ", bound checks " + (r.all_pass() ? "pass" : "fail")};
}

// 10. Two identical simulate invocations of the command-line tool.
Outcome determinism() {
    const fs::path base = fs::temp_directory_path() / "sdde_acceptance";
    fs::remove_all(base);
    std::vector<std::string> csv;
    for (const char* run : {"a", "b"}) {
        const fs::path out = base / run;
        const std::string cmd = std::string("\"") + SDDE_TOOL + "\" simulate --config \"" + SDDE_CONFIG_DIR +
                                "/demo.json\" --out \"" + out.string() + "\" > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) return {false, "simulate exited nonzero"};
        std::ifstream f(out / "trajectory.csv", std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        csv.push_back(s.str());
    }
    fs::remove_all(base);
    const bool same = !csv[0].empty() && csv[0] == csv[1];
    return {same, fmt("two runs of demo.json, %.0f bytes each, ", static_cast<double>(csv[0].size())) +
                      (same ? "byte-identical" : "different")};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"threshold-delay exactness", threshold_exactness},
        {"tau envelope", tau_envelope},
        {"Sobolev embedding", sobolev},
        {"tau Lipschitz bound", tau_lipschitz},
        {"oracle equivalence", oracle_equivalence},
        {"analytic decoupled case", decoupled},
        {"a priori bounds", apriori},
        {"convergence order", convergence},
        {"no-positivity generalization", no_positivity},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %2zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
