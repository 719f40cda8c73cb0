#include "sdde/rhs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdde {

double calG_from(const MaturationResult& m, const HistoryView& psi, const ModelSpec& spec) {
    const double x2 = spec.params().x2;
    const double lead = spec.g(x2, psi(0.0));
    if (spec.k_is_constant()) return lead * std::exp(spec.k(x2, 0.0) * m.tau);

    const History& y = m.y;
    const auto s = y.times();
    const auto yv = y.values();
    auto integrand = [&](double si, double yi) { return spec.k(yi, psi(-std::min(si, psi.span()))); };
    double sum = 0.0;
    double f_left = integrand(s[0], yv[0]);
    std::size_t i = 0;
    for (; i + 1 < s.size() && s[i + 1] <= m.tau; ++i) {
        const double mid = 0.5 * (s[i] + s[i + 1]);
        const double f_right = integrand(s[i + 1], yv[i + 1]);
        sum += (s[i + 1] - s[i]) / 6.0 * (f_left + 4.0 * integrand(mid, y.eval(mid)) + f_right);
        f_left = f_right;
    }
    if (m.tau > s[i]) {
        const double mid = 0.5 * (s[i] + m.tau);
        sum += (m.tau - s[i]) / 6.0 *
               (f_left + 4.0 * integrand(mid, y.eval(mid)) + integrand(m.tau, y.eval(m.tau)));
    }
    return lead * std::exp(sum);
}

double calG(const HistoryView& psi, const ModelSpec& spec, double dt_y) {
    return calG_from(mature(psi, spec, dt_y), psi, spec);
}

RhsValue rhs_F(const HistoryView& phi, const HistoryView& psi, const ModelSpec& spec, double dt_y) {
    const MaturationResult m = mature(psi, spec, dt_y);
    RhsValue r;
    r.tau = m.tau;
    r.calG = calG_from(m, psi, spec);
    const double v_now = psi(0.0);
    const double v_delayed = psi(-m.tau);
    if (!spec.in_range(v_delayed))
        throw RangeExit("delayed state v = " + std::to_string(v_delayed) + " outside the declared v-range", -m.tau,
                        v_delayed);
    r.f1 = spec.q(v_now) * phi(0.0);
    r.f2 = spec.beta(v_delayed) * phi(-m.tau) * r.calG - spec.params().mu * v_now;
    return r;
}

double t_exp_integral(double L, double h) {
    if (L == 0.0) return 0.5 * h * h;
    return (h / L - 1.0 / (L * L)) * std::exp(L * h) + 1.0 / (L * L);
}

double tau_lip_bound(const ModelSpec& spec, double L) {
    const double h = spec.h();
    const double sh = std::sqrt(h);
    return (L * L * (sh + 1.0 / sh) * t_exp_integral(L, h) + L * sh) / spec.params().eps;
}

double calG_bound(const ModelSpec& spec, const DerivedBounds& bounds) {
    return spec.params().K * std::exp(spec.h() * bounds.M_k);
}

} // namespace sdde
