#include "sdde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "sdde/rhs.hpp"

namespace sdde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

// Worst sample of an aggregated check, judged by margin plus allowed slack.
class Worst {
public:
    Worst(std::string id, bool lower = false) : id_(std::move(id)), lower_(lower), slack_(slack_for(id_)) {}

    void offer(double measured, double bound) {
        ++n_;
        const double key = (lower_ ? measured - bound : bound - measured) + slack_.at(bound);
        if (!(key >= 0.0)) ++bad_;
        if (nan_) return;
        if (std::isnan(key) || key < key_) {
            nan_ = std::isnan(key);
            key_ = key;
            measured_ = measured;
            bound_ = bound;
        }
    }

    void emit(CheckReport& r, const std::string& what) const {
        if (n_ == 0) {
            r.add_skip(id_, what + ": no samples");
            return;
        }
        const std::string ctx = what + "; worst of " + std::to_string(n_) + ", " + std::to_string(bad_) + " violations";
        CheckItem& item = lower_ ? r.add_lower_bound(id_, measured_, bound_, ctx) : r.add_bound(id_, measured_, bound_, ctx);
        if (bad_ > 0) item.status = CheckStatus::fail;
    }

private:
    std::string id_;
    bool lower_;
    Slack slack_;
    std::size_t n_ = 0, bad_ = 0;
    bool nan_ = false;
    double key_ = std::numeric_limits<double>::infinity();
    double measured_ = kNaN, bound_ = kNaN;
};

double resolve_dt_y(const ModelSpec& spec, double dt_y) { return dt_y > 0.0 ? dt_y : spec.default_dt_y(); }

RandomHistory admissible(const ModelSpec& spec, double alpha) {
    RandomHistory gen;
    gen.a = -spec.h();
    gen.b = 0.0;
    gen.alpha = alpha;
    return gen;
}

// Sup over the prehistory and the value at t = 0 of one channel.
struct Start {
    double at0;
    double sup;
};

Start start_of(const History& ch, std::size_t origin) {
    double sup = 0.0;
    const auto y = ch.values();
    for (std::size_t i = 0; i <= origin; ++i) sup = std::max(sup, std::fabs(y[i]));
    return {std::fabs(y[origin]), sup};
}

// Node derivative used for the derivative estimate: the right derivative,
// except at the final node where only the left one exists.
double node_deriv(const History& ch, std::size_t i) {
    return i + 1 == ch.size() ? ch.left_derivs()[i] : ch.right_derivs()[i];
}

} // namespace

History RandomHistory::operator()(std::mt19937_64& rng) const {
    if (!(b > a) || min_nodes < 2 || max_nodes < min_nodes)
        throw std::invalid_argument("RandomHistory: need a < b and 2 <= min_nodes <= max_nodes");
    std::uniform_int_distribution<std::size_t> count(min_nodes, max_nodes);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const std::size_t n = count(rng);
    const double cell = (b - a) / static_cast<double>(n - 1);
    std::vector<double> t(n), y(n), dy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double jitter = (i == 0 || i + 1 == n) ? 0.0 : 0.3 * unit(rng);
        t[i] = i + 1 == n ? b : a + cell * (static_cast<double>(i) + jitter);
        y[i] = amplitude * unit(rng);
        dy[i] = amplitude * unit(rng);
    }
    const double lip = History(t, y, dy).lip_bound();
    const double s = (std::isfinite(alpha) && lip > alpha) ? alpha / lip : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = offset + s * y[i];
        dy[i] *= s;
    }
    return History(std::move(t), std::move(y), std::move(dy));
}

CheckReport check_sobolev(std::size_t samples, std::uint64_t seed, double h) {
    if (samples < 1) throw std::invalid_argument("check_sobolev: need at least one sample");
    if (!(h > 0.0)) throw std::invalid_argument("check_sobolev: interval length must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.1, 10.0), off(-2.0, 2.0);
    RandomHistory gen;
    gen.a = -h;
    gen.alpha = std::numeric_limits<double>::infinity();
    const double c = std::sqrt(h) + 1.0 / std::sqrt(h);
    Worst worst("sobolev");
    for (std::size_t k = 0; k < samples; ++k) {
        gen.amplitude = amp(rng);
        gen.offset = off(rng);
        const History f = gen(rng);
        worst.offer(f.sup_norm(), c * f.h1_norm());
    }
    CheckReport r;
    worst.emit(r, fmt("sup <= (h^1/2 + h^-1/2) |f|_H1 on [-%g, 0]", h));
    return r;
}

CheckReport check_apriori_w(const Trajectory& traj, const ModelSpec&, const DerivedBounds& bounds) {
    const std::size_t o = traj.origin_index();
    const auto t = traj.w().times();
    const auto w = traj.w().values();
    const double w0 = std::fabs(w[o]);
    Worst worst("apriori_w");
    // Compared after dividing by e^{t M_q}, so the absolute slack scales with it.
    for (std::size_t i = o; i < t.size(); ++i) worst.offer(std::fabs(w[i]) * std::exp(-t[i] * bounds.M_q), w0);
    CheckReport r;
    worst.emit(r, fmt("|w(t)| e^{-t M_q} <= |phi(0)|, M_q = %.6g", bounds.M_q));
    return r;
}

CheckReport check_apriori_v(const Trajectory& traj, const ModelSpec& spec, const DerivedBounds& bounds,
                            bool force_gronwall) {
    const std::size_t o = traj.origin_index();
    const auto t = traj.v().times();
    const auto v = traj.v().values();
    const Start W0 = start_of(traj.w(), o), V0 = start_of(traj.v(), o);
    const double W = std::max(W0.at0, W0.sup);
    const double c = V0.at0;
    const double mu = spec.params().mu, Mq = bounds.M_q, MG = bounds.M_G;
    const double kappa = mu + Mq;
    CheckReport r;

    if (!force_gronwall && std::isfinite(bounds.M_beta)) {
        const double A = bounds.M_beta * MG * W;
        Worst worst("apriori_v");
        for (std::size_t i = o; i < t.size(); ++i) {
            const double bound = kappa > 0.0 ? c + A / kappa * std::exp(kappa * t[i]) : c + A * t[i];
            worst.offer(std::fabs(v[i]), bound);
        }
        worst.emit(r, fmt("|v(t)| <= c + C e^{(mu + M_q) t}, c = %.6g, C = %.6g", c, kappa > 0.0 ? A / kappa : A));
        return r;
    }

    // u(t) <= alpha(t) + int_0^t beta(s) u(s) ds with alpha(t) = C e^{M_q t} and
    // beta(s) = W C_beta M_G e^{kappa s}; the inner integral of beta is closed form.
    const double lin = W * MG * (bounds.a_beta + bounds.C_beta * V0.sup);
    const double Bc = W * bounds.C_beta * MG;
    auto alpha = [&](double s) { return kappa > 0.0 ? (c + lin / kappa) * std::exp(Mq * s) : c + lin * s; };
    auto beta = [&](double s) { return Bc * std::exp(kappa * s); };
    auto B = [&](double s) { return kappa > 0.0 ? Bc * std::expm1(kappa * s) / kappa : Bc * s; };
    auto integrand = [&](double s) { return alpha(s) * beta(s) * std::exp(-B(s)); };
    Worst worst("apriori_v");
    double J = 0.0; // int_0^t alpha beta e^{-B}
    for (std::size_t i = o; i < t.size(); ++i) {
        if (i > o) {
            const double a = t[i - 1], b = t[i];
            J += (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b));
        }
        worst.offer(std::fabs(v[i]), alpha(t[i]) + std::exp(B(t[i])) * J);
    }
    worst.emit(r, "|v(t)| below the Gronwall-form estimate (Simpson quadrature on the nodes)");
    return r;
}

CheckReport check_deriv_bound(const Trajectory& traj, const ModelSpec& spec, const DerivedBounds& bounds) {
    const std::size_t o = traj.origin_index();
    const auto t = traj.w().times();
    const auto v = traj.v().values();
    const auto tau = traj.tau();
    const Start W0 = start_of(traj.w(), o);
    const double w0 = W0.at0, W = std::max(W0.at0, W0.sup);
    const double mu = spec.params().mu, Mq = bounds.M_q, MG = bounds.M_G;
    Worst worst("deriv_bound");
    for (std::size_t i = o; i < t.size(); ++i) {
        const double dw = node_deriv(traj.w(), i), dv = node_deriv(traj.v(), i);
        const double beta = spec.beta(traj.v().eval(t[i] - tau[i - o]));
        const double e = std::exp(2.0 * t[i] * Mq);
        const double bound = Mq * Mq * w0 * w0 * e + 2.0 * beta * beta * W * W * e * MG * MG + 2.0 * mu * mu * v[i] * v[i];
        worst.offer(dw * dw + dv * dv, bound);
    }
    CheckReport r;
    worst.emit(r, "|u'(t)|^2 against the a priori derivative estimate with observed beta(v(t - tau))");
    return r;
}

CheckReport check_tau_envelope(const std::vector<MaturationResult>& results, const ModelSpec& spec) {
    const auto& p = spec.params();
    const double gap = p.x2 - p.x1;
    Worst tau_lo("tau_envelope.tau_lower", true), tau_hi("tau_envelope.tau_upper");
    Worst y_lo("tau_envelope.y_lower", true), y_hi("tau_envelope.y_upper");
    for (const auto& m : results) {
        tau_lo.offer(m.tau, gap / p.K);
        tau_hi.offer(m.tau, gap / p.eps);
        const auto s = m.y.times();
        const auto y = m.y.values();
        for (std::size_t i = 0; i < s.size(); ++i) {
            y_lo.offer(y[i], p.x2 - p.K * s[i]);
            y_hi.offer(y[i], p.x2 - p.eps * s[i]);
        }
    }
    CheckReport r;
    tau_lo.emit(r, "tau >= (x2 - x1) / K");
    tau_hi.emit(r, "tau <= (x2 - x1) / eps");
    y_lo.emit(r, "y(s) >= x2 - K s at every node");
    y_hi.emit(r, "y(s) <= x2 - eps s at every node");
    return r;
}

CheckReport check_tau_lipschitz(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t pairs, double alpha,
                                std::uint64_t seed, double dt_y) {
    dt_y = resolve_dt_y(spec, dt_y);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const RandomHistory gen = admissible(spec, alpha);
    double worst = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < pairs; ++k) {
        const History a = gen(rng);
        History b = gen(rng);
        // Every other pair is a near neighbour: a convex combination keeps the
        // derivative bound.
        if (k % 2 == 1) {
            const double lam = std::pow(10.0, -3.0 * unit(rng));
            b = a.scaled(1.0 - lam) + b.scaled(lam);
        }
        const double dist = (a - b).h1_norm();
        if (!(dist > 0.0)) continue;
        const double ta = mature(a, spec, dt_y).tau, tb = mature(b, spec, dt_y).tau;
        worst = std::max(worst, std::fabs(ta - tb) / dist);
        ++used;
    }
    CheckReport r;
    const double bound = tau_lip_bound(spec, bounds.L_g);
    if (used == 0) r.add_skip("tau_lipschitz", "no distinct pairs");
    else
        r.add_bound("tau_lipschitz", worst, bound,
                    "worst |d tau| / |d psi|_H1 over " + std::to_string(used) + fmt(" pairs, alpha = %g, L = %.6g", alpha, bounds.L_g));
    return r;
}

CheckReport check_calG_domination(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t samples,
                                  double alpha, std::uint64_t seed, double dt_y) {
    dt_y = resolve_dt_y(spec, dt_y);
    std::mt19937_64 rng(seed);
    const RandomHistory gen = admissible(spec, alpha);
    const double MG = calG_bound(spec, bounds);
    Worst upper("calG_domination.upper");
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples; ++k) {
        const double G = calG(gen(rng), spec, dt_y);
        upper.offer(G, MG);
        lowest = std::min(lowest, G);
    }
    CheckReport r;
    upper.emit(r, "calG(psi) <= K exp(h M_k)");
    if (samples == 0) r.add_skip("calG_domination.positive", "no samples");
    else r.add_flag("calG_domination.positive", lowest > 0.0, "min calG(psi) > 0", lowest, 0.0).margin = lowest;
    return r;
}

CheckReport check_calG_stability(const ModelSpec& spec, std::size_t pairs, double alpha, double delta,
                                 std::uint64_t seed, double dt_y) {
    dt_y = resolve_dt_y(spec, dt_y);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    const RandomHistory gen = admissible(spec, alpha);
    RandomHistory bump = admissible(spec, std::numeric_limits<double>::infinity());
    const History base = gen(rng);
    auto perturbed = [&] {
        const History d = bump(rng);
        const double sup = d.sup_norm();
        return sup > 0.0 ? base + d.scaled(delta * unit(rng) / sup) : base;
    };
    double fine = 0.0, coarse = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < pairs; ++k) {
        const History a = perturbed(), b = perturbed();
        const double dist = (a - b).h1_norm();
        if (!(dist > 0.0)) continue;
        fine = std::max(fine, std::fabs(calG(a, spec, dt_y) - calG(b, spec, dt_y)) / dist);
        coarse = std::max(coarse, std::fabs(calG(a, spec, 2.0 * dt_y) - calG(b, spec, 2.0 * dt_y)) / dist);
        ++used;
    }
    CheckReport r;
    if (used == 0) r.add_skip("calG_lipschitz_stability", "no distinct pairs");
    else
        r.add_bound("calG_lipschitz_stability", fine, 10.0 * coarse,
                    "worst |d calG| / |d psi|_H1 at dt_y within 10x the worst at 2 dt_y; " + std::to_string(used) +
                        fmt(" pairs in a sup-ball of radius %g", delta));
    return r;
}

CheckReport check_rhs_local_bound(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t samples,
                                  double alpha, std::uint64_t seed, double dt_y) {
    dt_y = resolve_dt_y(spec, dt_y);
    std::mt19937_64 rng(seed);
    const RandomHistory gen = admissible(spec, alpha);
    const double mu = spec.params().mu;
    Worst worst("rhs_local_bound");
    for (std::size_t k = 0; k < samples; ++k) {
        const History phi = gen(rng), psi = gen(rng);
        const double M = std::max(phi.sup_norm(), psi.sup_norm());
        const RhsValue F = rhs_F(phi, psi, spec, dt_y);
        const double bound = bounds.M_q * M + (bounds.C_beta * M + bounds.a_beta) * M * bounds.M_G + mu * M;
        worst.offer(std::fabs(F.f1) + std::fabs(F.f2), bound);
    }
    CheckReport r;
    worst.emit(r, "|F1| + |F2| <= M_q M + (C_beta M + a_beta) M M_G + mu M");
    return r;
}

CheckReport check_maturation_estimates(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t samples,
                                       double alpha, std::uint64_t seed, double dt_y) {
    dt_y = resolve_dt_y(spec, dt_y);
    std::mt19937_64 rng(seed);
    const RandomHistory gen = admissible(spec, alpha);
    const double L = bounds.L_g;
    Worst growth("y_growth"), lip("y_history_lipschitz");
    for (std::size_t k = 0; k < samples; ++k) {
        const History a = gen(rng), b = gen(rng);
        const MaturationResult m = mature(a, spec, dt_y);
        const auto s = m.y.times();
        const auto y = m.y.values();
        for (std::size_t i = 0; i < s.size(); ++i) growth.offer(std::fabs(y[i]), y_growth_bound(a, spec, L, s[i]));
        lip.offer(y_history_lip_margin(a, b, spec, L, dt_y), 0.0);
    }
    CheckReport r;
    growth.emit(r, fmt("|y(s)| below the Gronwall growth estimate, L = %.6g", L));
    lip.emit(r, "|y_a(s) - y_b(s)| - L |a - b|_sup s e^{L s} <= 0");
    return r;
}

std::vector<ConvergenceRow> convergence_study(const ModelSpec& spec, const Prehistory& pre, double T,
                                              const std::vector<double>& dts, double dt_y) {
    if (dts.size() < 2) throw std::invalid_argument("convergence_study: need at least one step size and a reference");
    for (std::size_t i = 1; i < dts.size(); ++i)
        if (!(dts[i] < dts[i - 1])) throw std::invalid_argument("convergence_study: step sizes must be descending");
    SolveSettings st;
    st.T = T;
    st.dt_y = dt_y;
    st.dt = dts.back();
    const Trajectory ref = integrate(spec, pre, st);
    std::vector<ConvergenceRow> rows;
    for (std::size_t i = 0; i + 1 < dts.size(); ++i) {
        st.dt = dts[i];
        ConvergenceRow row;
        row.dt = dts[i];
        row.sup_error = sup_distance(integrate(spec, pre, st), ref, T);
        row.order = rows.empty() ? kNaN
                                 : std::log(rows.back().sup_error / row.sup_error) / std::log(rows.back().dt / row.dt);
        rows.push_back(row);
    }
    return rows;
}

CheckReport run_suite(const ModelSpec& spec, const DerivedBounds& bounds, const Trajectory& traj,
                      const SuiteSettings& s) {
    const double dt_y = resolve_dt_y(spec, s.dt_y);
    CheckReport r;
    r.merge(check_sobolev(s.sobolev_samples, s.seed, spec.h()));

    std::mt19937_64 rng(s.seed + 1);
    const RandomHistory gen = admissible(spec, s.alpha);
    std::vector<MaturationResult> results;
    results.reserve(s.envelope_samples);
    for (std::size_t k = 0; k < s.envelope_samples; ++k) results.push_back(mature(gen(rng), spec, dt_y));
    r.merge(check_tau_envelope(results, spec));

    r.merge(check_tau_lipschitz(spec, bounds, s.tau_pairs, s.alpha, s.seed + 2, dt_y));
    r.merge(check_calG_domination(spec, bounds, s.calG_samples, s.alpha, s.seed + 3, dt_y));
    r.merge(check_calG_stability(spec, s.calG_pairs, s.alpha, s.delta, s.seed + 4, dt_y));
    r.merge(check_rhs_local_bound(spec, bounds, s.rhs_samples, s.alpha, s.seed + 5, dt_y));
    r.merge(check_maturation_estimates(spec, bounds, s.maturation_samples, s.alpha, s.seed + 6, dt_y));
    r.merge(check_apriori_w(traj, spec, bounds));
    r.merge(check_apriori_v(traj, spec, bounds));
    r.merge(check_deriv_bound(traj, spec, bounds));
    return r;
}

} // namespace sdde
