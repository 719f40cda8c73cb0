#include "sdde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace sdde {

namespace {

double pick_dt_y(const ModelSpec& spec, double dt_y) { return dt_y > 0.0 ? dt_y : spec.default_dt_y(); }

// Root in [0, 1] of the quadratic through (0, d0), (1/2, d1), (1, d2), given
// d0 < 0 <= d2; falls back to the secant when the quadratic misbehaves.
double crossing_fraction(double d0, double d1, double d2) {
    const double secant = d0 / (d0 - d2);
    const double a = 2.0 * d2 - 4.0 * d1 + 2.0 * d0;
    const double b = 4.0 * d1 - 3.0 * d0 - d2;
    if (std::fabs(a) < 1e-14 * (std::fabs(b) + std::fabs(d0))) return secant;
    const double disc = b * b - 4.0 * a * d0;
    if (disc < 0.0) return secant;
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    for (double x : {q / a, q != 0.0 ? d0 / q : -1.0})
        if (x >= 0.0 && x <= 1.0) return x;
    return secant;
}

void require_window(const History& x, double h, const char* which) {
    const double tol = 1e-9 * (1.0 + h);
    if (std::fabs(x.a() + h) > tol || std::fabs(x.b()) > tol)
        throw std::invalid_argument(std::string("prehistory ") + which + " must live on [-h, 0] with h = " +
                                    std::to_string(h) + ", got [" + std::to_string(x.a()) + ", " +
                                    std::to_string(x.b()) + "]");
}

} // namespace

Prehistory::Prehistory(History w_in, History v_in) {
    if (std::fabs(w_in.a() - v_in.a()) > 1e-12 * (1.0 + std::fabs(w_in.a())) ||
        std::fabs(w_in.b() - v_in.b()) > 1e-12 * (1.0 + std::fabs(w_in.a())))
        throw std::invalid_argument("Prehistory: channel domains differ");
    const auto tw = w_in.times(), tv = v_in.times();
    if (std::equal(tw.begin(), tw.end(), tv.begin(), tv.end())) {
        w = std::move(w_in);
        v = std::move(v_in);
        return;
    }
    auto mesh = merge_meshes(tw, tv);
    mesh.front() = w_in.a();
    mesh.back() = w_in.b();
    w = w_in.resampled(mesh);
    v = v_in.resampled(mesh);
}

Trajectory::Trajectory(const Prehistory& pre)
    : w_(pre.w), v_(pre.v), h_(pre.w.b() - pre.w.a()), origin_(pre.w.size() - 1) {}

void Trajectory::start(const RhsValue& f0) {
    if (w_.size() != origin_ + 1) throw std::logic_error("Trajectory::start after append");
    w_.set_right_deriv_at_end(f0.f1);
    v_.set_right_deriv_at_end(f0.f2);
    tau_.assign(1, f0.tau);
    calG_.assign(1, f0.calG);
}

void Trajectory::append(double t, double w, double v, const RhsValue& f) {
    w_.append(t, w, f.f1);
    v_.append(t, v, f.f2);
    tau_.push_back(f.tau);
    calG_.push_back(f.calG);
}

void Trajectory::write_csv(std::ostream& os) const {
    os << "t,w,v,dw,dv,tau,calG\n";
    const auto t = w_.times();
    char buf[256];
    for (std::size_t i = 0; i < t.size(); ++i) {
        const bool last = i + 1 == t.size();
        const double dw = last ? w_.left_derivs()[i] : w_.right_derivs()[i];
        const double dv = last ? v_.left_derivs()[i] : v_.right_derivs()[i];
        int n = std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,", t[i], w_.values()[i],
                              v_.values()[i], dw, dv);
        if (i >= origin_ && i - origin_ < tau_.size())
            std::snprintf(buf + n, sizeof buf - static_cast<std::size_t>(n), "%.17g,%.17g\n", tau_[i - origin_],
                          calG_[i - origin_]);
        else
            std::snprintf(buf + n, sizeof buf - static_cast<std::size_t>(n), ",\n");
        os << buf;
    }
}

Trajectory integrate(const ModelSpec& spec, const Prehistory& pre, const SolveSettings& st) {
    const double h = spec.h();
    const double dt_y = pick_dt_y(spec, st.dt_y);
    if (!(st.dt > 0.0) || st.dt > spec.min_delay() * (1.0 + 1e-12))
        throw std::invalid_argument("step dt = " + std::to_string(st.dt) + " must lie in (0, (x2 - x1)/K] = (0, " +
                                    std::to_string(spec.min_delay()) + "]");
    if (!(st.T > 0.0)) throw std::invalid_argument("horizon T must be positive");
    require_window(pre.w, h, "w");
    require_window(pre.v, h, "v");
    const double alpha = std::max(pre.w.lip_bound(), pre.v.lip_bound());
    if (alpha > st.alpha_cap)
        throw AssumptionViolation("prehistory Lipschitz bound " + std::to_string(alpha) + " exceeds alpha_cap " +
                                  std::to_string(st.alpha_cap));

    Trajectory tr(pre);
    auto F = [&](double t, std::optional<HermitePiece> tw, std::optional<HermitePiece> tv) {
        try {
            return rhs_F(tr.window_w(t, tw), tr.window_v(t, tv), spec, dt_y);
        } catch (const RangeExit& e) {
            // Window offsets to absolute time.
            const double at = t + e.time();
            throw RangeExit("v = " + std::to_string(e.value()) + " left the declared range at t = " +
                                std::to_string(at) + " (" + e.what() + ")",
                            at, e.value());
        }
    };
    const RhsValue f0 = F(0.0, std::nullopt, std::nullopt);
    tr.start(f0);

    struct Advance {
        double w, v;
        RhsValue mid, end;
    };
    double w = pre.w.values().back(), v = pre.v.values().back();
    double kw = f0.f1, kv = f0.f2;
    auto advance = [&](double t, double t1) {
        const double dt = t1 - t;
        // Predictor: classical stages; the uncommitted sliver is a straight line to the stage value.
        auto stage = [&](double c, double yw, double yv) {
            const double tc = t + c * dt;
            return F(tc, HermitePiece::linear(t, w, tc, yw), HermitePiece::linear(t, v, tc, yv));
        };
        const RhsValue k2 = stage(0.5, w + 0.5 * dt * kw, v + 0.5 * dt * kv);
        const RhsValue k3 = stage(0.5, w + 0.5 * dt * k2.f1, v + 0.5 * dt * k2.f2);
        const RhsValue k4 = stage(1.0, w + dt * k3.f1, v + dt * k3.f2);
        const double pw = w + dt / 6.0 * (kw + 2.0 * k2.f1 + 2.0 * k3.f1 + k4.f1);
        const double pv = v + dt / 6.0 * (kv + 2.0 * k2.f2 + 2.0 * k3.f2 + k4.f2);

        // Corrector: Simpson with the provisional Hermite step as the sliver.
        const HermitePiece Pw{t, t1, w, pw, kw, k4.f1};
        const HermitePiece Pv{t, t1, v, pv, kv, k4.f2};
        const double tm = t + 0.5 * dt;
        Advance r;
        r.mid = F(tm, Pw.restricted(tm), Pv.restricted(tm));
        r.end = F(t1, Pw, Pv);
        r.w = w + dt / 6.0 * (kw + 4.0 * r.mid.f1 + r.end.f1);
        r.v = v + dt / 6.0 * (kv + 4.0 * r.mid.f2 + r.end.f2);
        return r;
    };
    auto commit = [&](double t1, const Advance& r) {
        if (!std::isfinite(r.w) || !std::isfinite(r.v) || std::fabs(r.w) > st.blowup_cap ||
            std::fabs(r.v) > st.blowup_cap)
            throw BlowUp("solution exceeded the blow-up cap " + std::to_string(st.blowup_cap) + " at t = " +
                             std::to_string(t1) + " (w = " + std::to_string(r.w) + ", v = " + std::to_string(r.v) +
                             ")",
                         t1);
        if (!spec.in_range(r.v))
            throw RangeExit("v = " + std::to_string(r.v) + " left the declared range at t = " + std::to_string(t1),
                            t1, r.v);
        tr.append(t1, r.w, r.v, r.end);
        w = r.w, v = r.v, kw = r.end.f1, kv = r.end.f2;
    };

    // Breaking points: t = 0 and the times where the delayed argument t - tau
    // reaches an earlier one. Steps that cross one are split there, so the
    // kink of the right-hand side sits on a node.
    struct Breakpoint {
        double t;
        int generation;
    };
    std::vector<Breakpoint> breaks{{0.0, 0}};
    constexpr int max_generation = 3;

    const auto n_steps = static_cast<std::size_t>(std::ceil(st.T / st.dt - 1e-9));
    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t = static_cast<double>(n) * st.dt;
        const double t1 = (n + 1 == n_steps) ? st.T : static_cast<double>(n + 1) * st.dt;
        const Advance trial = advance(t, t1);

        const double tau0 = tr.tau().back();
        std::optional<double> split;
        int generation = 0;
        for (const auto& bp : breaks) {
            const double d0 = t - tau0 - bp.t, d2 = t1 - trial.end.tau - bp.t;
            if (!(d0 < 0.0 && d2 >= 0.0)) continue;
            const double d1 = 0.5 * (t + t1) - trial.mid.tau - bp.t;
            const double xi = t + (t1 - t) * crossing_fraction(d0, d1, d2);
            const double margin = 1e-6 * (t1 - t);
            if (xi > t + margin && xi < t1 - margin && (!split || xi < *split)) {
                split = xi;
                generation = bp.generation + 1;
            }
        }
        if (!split) {
            commit(t1, trial);
            continue;
        }
        commit(*split, advance(t, *split));
        commit(t1, advance(*split, t1));
        if (generation <= max_generation) breaks.push_back({*split, generation});
    }
    return tr;
}

PicardResult picard_solve(const ModelSpec& spec, const Prehistory& pre, const PicardSettings& st) {
    const double dt_y = pick_dt_y(spec, st.dt_y);
    if (!(st.T0 > 0.0) || st.T0 > spec.min_delay() * (1.0 + 1e-12))
        throw std::invalid_argument("Picard horizon T0 must lie in (0, (x2 - x1)/K]");
    if (st.grid_n < 2) throw std::invalid_argument("Picard grid needs at least 2 intervals");
    require_window(pre.w, spec.h(), "w");
    require_window(pre.v, spec.h(), "v");

    const std::size_t N = st.grid_n;
    const double dt = st.T0 / static_cast<double>(N);
    std::vector<double> t(N + 1);
    for (std::size_t i = 0; i <= N; ++i) t[i] = (i == N) ? st.T0 : static_cast<double>(i) * dt;
    const double w0 = pre.w.values().back(), v0 = pre.v.values().back();

    double aw = 0.0, av = 0.0, ow = 1.0, ov = 1.0;
    if (st.seed) {
        std::mt19937_64 rng(*st.seed);
        std::uniform_real_distribution<double> amp(-0.1, 0.1), freq(1.0, 10.0);
        aw = amp(rng), av = amp(rng), ow = freq(rng), ov = freq(rng);
    }
    Trajectory x(pre);
    x.start(RhsValue{aw * ow, av * ov, std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN()});
    for (std::size_t i = 1; i <= N; ++i)
        x.append(t[i], w0 + aw * std::sin(ow * t[i]), v0 + av * std::sin(ov * t[i]),
                 RhsValue{aw * ow * std::cos(ow * t[i]), av * ov * std::cos(ov * t[i]),
                          std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()});

    std::vector<double> diffs;
    std::vector<RhsValue> f(N + 1), fm(N);
    for (std::size_t k = 1; k <= st.max_iter; ++k) {
        for (std::size_t i = 0; i <= N; ++i) f[i] = rhs_F(x.window_w(t[i]), x.window_v(t[i]), spec, dt_y);
        for (std::size_t i = 0; i < N; ++i) {
            const double m = 0.5 * (t[i] + t[i + 1]);
            fm[i] = rhs_F(x.window_w(m), x.window_v(m), spec, dt_y);
        }
        Trajectory next(pre);
        next.start(f[0]);
        double W = w0, V = v0, diff = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double step = t[i + 1] - t[i];
            W += step / 6.0 * (f[i].f1 + 4.0 * fm[i].f1 + f[i + 1].f1);
            V += step / 6.0 * (f[i].f2 + 4.0 * fm[i].f2 + f[i + 1].f2);
            const std::size_t j = x.origin_index() + i + 1;
            diff = std::max({diff, std::fabs(W - x.w().values()[j]), std::fabs(V - x.v().values()[j])});
            next.append(t[i + 1], W, V, f[i + 1]);
        }
        diffs.push_back(diff);
        x = std::move(next);
        if (diff <= st.tol) return PicardResult{std::move(x), std::move(diffs), k};
    }
    const double ratio =
        diffs.size() >= 2 ? diffs.back() / diffs[diffs.size() - 2] : std::numeric_limits<double>::quiet_NaN();
    throw ConvergenceFailure("Picard iteration did not reach tol " + std::to_string(st.tol) + " in " +
                                 std::to_string(st.max_iter) + " iterations (last difference " +
                                 std::to_string(diffs.empty() ? 0.0 : diffs.back()) + ")",
                             ratio);
}

VocResidual voc_residual(const Trajectory& tr, const ModelSpec& spec, double dt_y) {
    dt_y = pick_dt_y(spec, dt_y);
    const double mu = spec.params().mu;
    const auto t = tr.w().times();
    const auto wv = tr.w().values();
    const auto vv = tr.v().values();
    const std::size_t i0 = tr.origin_index();
    const double phi0 = wv[i0], psi0 = vv[i0];

    auto birth = [&](double s) {
        const RhsValue f = rhs_F(tr.window_w(s), tr.window_v(s), spec, dt_y);
        return std::exp(mu * s) * (f.f2 + mu * tr.v().eval(s));
    };
    VocResidual r;
    double int_q = 0.0, int_b = 0.0;
    double q_left = spec.q(psi0), b_left = birth(0.0);
    for (std::size_t i = i0; i + 1 < t.size(); ++i) {
        const double a = t[i], b = t[i + 1], m = 0.5 * (a + b);
        const double q_right = spec.q(vv[i + 1]);
        const double b_right = birth(b);
        int_q += (b - a) / 6.0 * (q_left + 4.0 * spec.q(tr.v().eval(m)) + q_right);
        int_b += (b - a) / 6.0 * (b_left + 4.0 * birth(m) + b_right);
        r.r_w = std::max(r.r_w, std::fabs(wv[i + 1] - phi0 * std::exp(int_q)));
        r.r_v = std::max(r.r_v, std::fabs(vv[i + 1] - std::exp(-mu * b) * (psi0 + int_b)));
        q_left = q_right, b_left = b_right;
    }
    return r;
}

double compatibility_defect(const ModelSpec& spec, const Prehistory& pre, double dt_y) {
    const RhsValue f = rhs_F(HistoryView(pre.w), HistoryView(pre.v), spec, pick_dt_y(spec, dt_y));
    return std::hypot(f.f1 - pre.w.left_derivs().back(), f.f2 - pre.v.left_derivs().back());
}

Prehistory make_compatible(const ModelSpec& spec, const std::function<double(double)>& w_base,
                           const std::function<double(double)>& dw_base, const std::function<double(double)>& v_base,
                           const std::function<double(double)>& dv_base, std::size_t n_nodes, double dt_y) {
    dt_y = pick_dt_y(spec, dt_y);
    const double h = spec.h();
    auto with_bump = [&](const std::function<double(double)>& f, const std::function<double(double)>& df, double c) {
        return History::from_function([&](double s) { return f(s) + c * s * std::exp(s); },
                                      [&](double s) { return df(s) + c * (1.0 + s) * std::exp(s); }, -h, 0.0,
                                      n_nodes);
    };
    const History w = with_bump(w_base, dw_base, spec.q(v_base(0.0)) * w_base(0.0) - dw_base(0.0));
    // Secant iteration on the defect of the v-channel as a function of c.
    auto defect = [&](double c) {
        const History v = with_bump(v_base, dv_base, c);
        return rhs_F(HistoryView(w), HistoryView(v), spec, dt_y).f2 - dv_base(0.0) - c;
    };
    double c0 = 0.0, r0 = defect(c0);
    double c = r0, r = defect(c);
    for (int it = 0; it < 100 && r != 0.0 && std::fabs(c - c0) > 1e-15 * (1.0 + std::fabs(c)); ++it) {
        const double next = c - r * (c - c0) / (r - r0);
        c0 = c, r0 = r;
        c = next, r = defect(c);
    }
    if (!(std::fabs(r) <= 1e-10 * (1.0 + std::fabs(c))))
        throw ConvergenceFailure("make_compatible: defect " + std::to_string(r) + " did not vanish", 0.0);
    return Prehistory(w, with_bump(v_base, dv_base, c));
}

double sup_distance(const Trajectory& coarse, const Trajectory& fine, double T) {
    const auto t = coarse.w().times();
    double d = 0.0;
    for (std::size_t i = coarse.origin_index(); i < t.size() && t[i] <= T * (1.0 + 1e-12); ++i) {
        d = std::max({d, std::fabs(coarse.w().values()[i] - fine.w().eval(t[i])),
                      std::fabs(coarse.v().values()[i] - fine.v().eval(t[i]))});
    }
    return d;
}

} // namespace sdde
