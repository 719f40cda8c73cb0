#include "sdde/maturation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sdde {

namespace {

double phi_at(const HistoryView& phi, const ModelSpec& spec, double s) {
    const double sc = std::min(s, phi.span());
    const double v = phi(-sc);
    if (!spec.in_range(v))
        throw RangeExit("prehistory value " + std::to_string(v) + " at s = -" + std::to_string(sc) +
                            " outside the declared v-range",
                        -sc, v);
    return v;
}

} // namespace

History solve_y(const HistoryView& phi, const ModelSpec& spec, double dt_y) {
    if (!(dt_y > 0.0)) throw std::invalid_argument("solve_y: dt_y must be positive");
    const auto& p = spec.params();
    const double h = spec.h();
    const std::size_t expected = static_cast<std::size_t>(std::ceil(spec.max_delay() / dt_y)) + 4;
    std::vector<double> s_nodes, y_nodes, slopes;
    s_nodes.reserve(expected);
    y_nodes.reserve(expected);
    slopes.reserve(expected);

    double s = 0.0, y = p.x2;
    double v0 = phi_at(phi, spec, 0.0);
    double k1 = -spec.g(y, v0);
    s_nodes.push_back(s);
    y_nodes.push_back(y);
    slopes.push_back(k1);

    // Derivative jumps of the window become step boundaries, so the result
    // stays smooth as they drift through the fixed grid.
    std::vector<double> cuts;
    phi.breakpoints(cuts);
    const double snap = 1e-9 * dt_y;
    std::size_t next_cut = 0;

    bool crossed = false;
    for (std::size_t n = 1;;) {
        double s_next = std::min(static_cast<double>(n) * dt_y, h);
        while (next_cut < cuts.size() && cuts[next_cut] <= s + snap) ++next_cut;
        if (next_cut < cuts.size() && cuts[next_cut] < s_next - snap) s_next = cuts[next_cut];
        else ++n;
        const double step = s_next - s;
        if (!(step > 0.0)) break;
        const double v_mid = phi_at(phi, spec, s + 0.5 * step);
        const double v_end = phi_at(phi, spec, s_next);
        const double k2 = -spec.g(y + 0.5 * step * k1, v_mid);
        const double k3 = -spec.g(y + 0.5 * step * k2, v_mid);
        const double k4 = -spec.g(y + step * k3, v_end);
        const double y_next = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (std::fabs(y_next - p.x2) > p.b * (1.0 + 1e-12))
            throw AssumptionViolation("maturity y = " + std::to_string(y_next) + " left the ball around x2 at s = " +
                                      std::to_string(s_next));
        s = s_next;
        y = y_next;
        k1 = -spec.g(y, v_end);
        s_nodes.push_back(s);
        y_nodes.push_back(y);
        slopes.push_back(k1);
        if (crossed || s >= h) break;
        crossed = y <= p.x1;
    }
    return History(std::move(s_nodes), std::move(y_nodes), std::move(slopes));
}

double find_tau(const History& y, double x1, std::size_t* iterations) {
    const auto t = y.times();
    const auto v = y.values();
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]))
            throw AssumptionViolation("maturity is not strictly decreasing near s = " + std::to_string(t[i]));
    if (!(v.front() > x1)) throw AssumptionViolation("maturity starts at or below the threshold");
    std::size_t k = 1;
    while (k < v.size() && v[k] > x1) ++k;
    if (k == v.size())
        throw AssumptionViolation("no threshold crossing before s = " + std::to_string(t.back()) +
                                  " (maturity ends at " + std::to_string(v.back()) + ")");
    if (v[k] == x1) {
        if (iterations) *iterations = 0;
        return t[k];
    }
    const HermitePiece piece = y.piece(k - 1);
    const double tol = 1e-12 * std::max(std::fabs(y.values().front() - x1), 1e-300);
    double lo = t[k - 1], hi = t[k];
    double mid = 0.5 * (lo + hi);
    std::size_t iters = 0;
    for (;;) {
        mid = 0.5 * (lo + hi);
        const double f = piece.value(mid) - x1;
        ++iters;
        if (std::fabs(f) <= tol || hi - lo <= 1e-14 || iters > 200) break;
        (f > 0.0 ? lo : hi) = mid;
    }
    // One Newton step removes the bisection's dependence on where it stopped.
    const double slope = piece.slope(mid);
    if (slope < 0.0) {
        const double polished = mid - (piece.value(mid) - x1) / slope;
        if (polished >= lo && polished <= hi) mid = polished;
    }
    if (iterations) *iterations = iters;
    return mid;
}

MaturationResult mature(const HistoryView& phi, const ModelSpec& spec, double dt_y) {
    MaturationResult r;
    r.y = solve_y(phi, spec, dt_y);
    r.n_steps = r.y.size() - 1;
    r.tau = find_tau(r.y, spec.params().x1, &r.root_iterations);
    return r;
}

double y_growth_bound(const History& phi, const ModelSpec& spec, double L, double t) {
    const double x2 = std::fabs(spec.params().x2);
    const double g0 = std::fabs(spec.g(spec.params().x2, phi.eval(phi.b())));
    return (x2 + (g0 + 2.0 * L * phi.sup_norm() + L * x2) * t) * std::exp(L * t);
}

double y_history_lip_margin(const History& phi, const History& psi, const ModelSpec& spec, double L, double dt_y) {
    const MaturationResult a = mature(phi, spec, dt_y);
    const MaturationResult b = mature(psi, spec, dt_y);
    const double sup = (phi - psi).sup_norm();
    const double end = std::min(a.tau, b.tau);
    double margin = -std::numeric_limits<double>::infinity();
    auto probe = [&](double s) {
        const double lhs = std::fabs(a.y.eval(s) - b.y.eval(s));
        margin = std::max(margin, lhs - L * sup * s * std::exp(L * s));
    };
    for (double s : a.y.times())
        if (s <= end) probe(s);
    probe(end);
    return margin;
}

} // namespace sdde
