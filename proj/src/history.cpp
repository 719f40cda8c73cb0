#include "sdde/history.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sdde {

namespace {

// Gauss-Legendre 4-point rule on [0, 1], exact through degree 7.
constexpr std::array<double, 4> kGaussX{0.06943184420297371, 0.33000947820757187, 0.6699905217924281,
                                        0.9305681557970262};
constexpr std::array<double, 4> kGaussW{0.17392742256872692, 0.3260725774312731, 0.3260725774312731,
                                        0.17392742256872692};

double domain_tol(double a, double b) { return 1e-12 * (1.0 + std::max(std::fabs(a), std::fabs(b))); }

// Power-basis coefficients of a piece in theta = (t - t0) / dt.
struct Cubic {
    double c0, c1, c2, c3, dt;
};

Cubic to_cubic(const HermitePiece& p) {
    const double dt = p.t1 - p.t0;
    return {p.y0, dt * p.m0, 3.0 * (p.y1 - p.y0) - dt * (2.0 * p.m0 + p.m1), 2.0 * (p.y0 - p.y1) + dt * (p.m0 + p.m1),
            dt};
}

} // namespace

double HermitePiece::value(double t) const noexcept {
    const double dt = t1 - t0;
    const double s = (t - t0) / dt;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * y0 + h10 * dt * m0 + h01 * y1 + h11 * dt * m1;
}

double HermitePiece::slope(double t) const noexcept {
    const double dt = t1 - t0;
    const double s = (t - t0) / dt;
    const double s2 = s * s;
    const double d00 = (6 * s2 - 6 * s) / dt;
    const double d10 = 3 * s2 - 4 * s + 1;
    const double d01 = (-6 * s2 + 6 * s) / dt;
    const double d11 = 3 * s2 - 2 * s;
    return d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1;
}

HermitePiece HermitePiece::restricted(double t_end) const noexcept {
    return {t0, t_end, y0, value(t_end), m0, slope(t_end)};
}

HermitePiece HermitePiece::linear(double t0, double y0, double t1, double y1) noexcept {
    const double m = (y1 - y0) / (t1 - t0);
    return {t0, t1, y0, y1, m, m};
}

History::History(std::vector<double> t, std::vector<double> y, std::vector<double> dy)
    : t_(std::move(t)), y_(std::move(y)), dl_(dy), dr_(std::move(dy)) {
    check_invariants();
}

History::History(std::vector<double> t, std::vector<double> y, std::vector<double> d_left,
                 std::vector<double> d_right)
    : t_(std::move(t)), y_(std::move(y)), dl_(std::move(d_left)), dr_(std::move(d_right)) {
    check_invariants();
    for (std::size_t i = 1; i + 1 < t_.size(); ++i)
        if (dl_[i] != dr_[i]) kinks_.push_back(t_[i]);
}

void History::check_invariants() const {
    if (t_.size() < 2) throw std::invalid_argument("History: need at least two nodes");
    if (y_.size() != t_.size() || dl_.size() != t_.size() || dr_.size() != t_.size())
        throw std::invalid_argument("History: node arrays differ in length");
    for (std::size_t i = 1; i < t_.size(); ++i)
        if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("History: node times must be strictly increasing");
}

History History::from_function(const std::function<double(double)>& f, const std::function<double(double)>& df,
                               double a, double b, std::size_t n_nodes) {
    if (n_nodes < 2) throw std::invalid_argument("History: n_nodes must be at least 2");
    if (!(b > a)) throw std::invalid_argument("History: empty domain");
    std::vector<double> t(n_nodes), y(n_nodes), d(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        t[i] = (i + 1 == n_nodes) ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n_nodes - 1);
        y[i] = f(t[i]);
        d[i] = df(t[i]);
    }
    return History(std::move(t), std::move(y), std::move(d));
}

History History::from_expr(const Expr& e, double a, double b, std::size_t n_nodes) {
    if (e.variables().size() > 1 && !e.slot_of("t"))
        throw std::invalid_argument("History::from_expr: expression must be in a single variable or in 't'");
    const std::size_t slot = e.slot_of("t").value_or(0);
    std::vector<double> args(std::max<std::size_t>(e.variables().size(), 1), 0.0);
    auto f = [&](double t) {
        args[slot] = t;
        return e.eval(std::span<const double>(args));
    };
    const double step = 1e-5 * std::max(1.0, b - a);
    auto df = [&](double t) {
        // Second-order stencils that never leave [a, b].
        if (t - step < a) return (-3.0 * f(t) + 4.0 * f(t + step) - f(t + 2 * step)) / (2 * step);
        if (t + step > b) return (3.0 * f(t) - 4.0 * f(t - step) + f(t - 2 * step)) / (2 * step);
        return (f(t + step) - f(t - step)) / (2 * step);
    };
    return from_function(f, df, a, b, n_nodes);
}

History History::constant(double c, double a, double b) { return History({a, b}, {c, c}, {0.0, 0.0}); }

std::size_t History::piece_index(double t) const {
    const double tol = domain_tol(a(), b());
    if (t < a() - tol || t > b() + tol)
        throw std::out_of_range("History: t = " + std::to_string(t) + " outside [" + std::to_string(a()) + ", " +
                                std::to_string(b()) + "]");
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    return std::min(i, t_.size() - 2);
}

HermitePiece History::piece(std::size_t i) const noexcept {
    return {t_[i], t_[i + 1], y_[i], y_[i + 1], dr_[i], dl_[i + 1]};
}

double History::eval(double t) const {
    const std::size_t i = piece_index(t);
    if (t == t_[i]) return y_[i];
    if (t == t_[i + 1]) return y_[i + 1];
    return piece(i).value(std::clamp(t, t_[i], t_[i + 1]));
}

double History::eval_deriv(double t) const {
    const std::size_t i = piece_index(t);
    if (t == t_[i]) return dr_[i];
    if (t >= t_[i + 1]) return dl_[i + 1];
    return piece(i).slope(std::max(t, t_[i]));
}

double History::l2_norm() const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
        const auto p = piece(i);
        const double dt = p.t1 - p.t0;
        for (std::size_t k = 0; k < 4; ++k) {
            const double v = p.value(p.t0 + kGaussX[k] * dt);
            acc += kGaussW[k] * dt * v * v;
        }
    }
    return std::sqrt(acc);
}

double History::l2_norm_deriv() const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
        const auto p = piece(i);
        const double dt = p.t1 - p.t0;
        for (std::size_t k = 0; k < 4; ++k) {
            const double v = p.slope(p.t0 + kGaussX[k] * dt);
            acc += kGaussW[k] * dt * v * v;
        }
    }
    return std::sqrt(acc);
}

double History::h1_norm() const {
    const double l2 = l2_norm(), d = l2_norm_deriv();
    return std::sqrt(l2 * l2 + d * d);
}

double History::sup_norm() const {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
        const auto p = piece(i);
        best = std::max({best, std::fabs(p.y0), std::fabs(p.y1)});
        // Interior critical points: roots of c1 + 2 c2 s + 3 c3 s^2 in (0, 1).
        const Cubic c = to_cubic(p);
        const double qa = 3.0 * c.c3, qb = 2.0 * c.c2, qc = c.c1;
        auto probe = [&](double s) {
            if (s > 0.0 && s < 1.0) best = std::max(best, std::fabs(((c.c3 * s + c.c2) * s + c.c1) * s + c.c0));
        };
        if (qa == 0.0) {
            if (qb != 0.0) probe(-qc / qb);
            continue;
        }
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) continue;
        const double sq = std::sqrt(disc);
        // Numerically stable pair of roots.
        const double q = -0.5 * (qb + std::copysign(sq, qb));
        if (q != 0.0) {
            probe(q / qa);
            probe(qc / q);
        } else {
            probe(0.0);
        }
    }
    return best;
}

double History::lip_bound() const {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
        const auto p = piece(i);
        best = std::max({best, std::fabs(p.m0), std::fabs(p.m1)});
        const Cubic c = to_cubic(p);
        // Derivative (c1 + 2 c2 s + 3 c3 s^2) / dt has its vertex at s = -c2 / (3 c3).
        if (c.c3 != 0.0) {
            const double s = -c.c2 / (3.0 * c.c3);
            if (s > 0.0 && s < 1.0) best = std::max(best, std::fabs((c.c1 + 2 * c.c2 * s + 3 * c.c3 * s * s) / c.dt));
        }
    }
    return best;
}

History History::segment(double t, double h) const {
    const double lo = t - h;
    const double tol = domain_tol(a(), b());
    if (lo < a() - tol || t > b() + tol)
        throw std::out_of_range("History::segment: [" + std::to_string(lo) + ", " + std::to_string(t) +
                                "] not covered by [" + std::to_string(a()) + ", " + std::to_string(b()) + "]");
    std::vector<double> nt, ny, nl, nr;
    auto push = [&](double s, double y, double l, double r) {
        nt.push_back(s);
        ny.push_back(y);
        nl.push_back(l);
        nr.push_back(r);
    };
    const double lo_c = std::max(lo, a()), hi_c = std::min(t, b());
    push(-h, eval(lo_c), eval_deriv(lo_c), eval_deriv(lo_c));
    const double snap = 1e-12 * std::max(1.0, h);
    for (std::size_t i = 0; i < t_.size(); ++i) {
        const double s = t_[i] - t;
        if (s <= -h + snap || s >= -snap) continue;
        push(s, y_[i], dl_[i], dr_[i]);
    }
    // Left-limit derivative at the window end.
    const std::size_t k = piece_index(hi_c);
    const double d_end = (hi_c == t_[k]) ? dl_[k] : piece(k).slope(hi_c);
    push(0.0, eval(hi_c), d_end, d_end);
    return History(std::move(nt), std::move(ny), std::move(nl), std::move(nr));
}

History History::resampled(std::span<const double> nodes) const {
    std::vector<double> t(nodes.begin(), nodes.end()), y, l, r;
    y.reserve(t.size());
    l.reserve(t.size());
    r.reserve(t.size());
    for (double s : t) {
        const std::size_t i = piece_index(s);
        y.push_back(eval(s));
        if (s == t_[i]) {
            l.push_back(dl_[i]);
            r.push_back(dr_[i]);
        } else if (s == t_[i + 1]) {
            l.push_back(dl_[i + 1]);
            r.push_back(dr_[i + 1]);
        } else {
            const double d = piece(i).slope(s);
            l.push_back(d);
            r.push_back(d);
        }
    }
    return History(std::move(t), std::move(y), std::move(l), std::move(r));
}

History History::scaled(double factor) const {
    History out = *this;
    for (auto* v : {&out.y_, &out.dl_, &out.dr_})
        for (double& x : *v) x *= factor;
    return out;
}

std::vector<double> merge_meshes(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    const double scale = std::max(std::fabs(out.front()), std::fabs(out.back()));
    const double tol = 1e-13 * std::max(1.0, scale);
    std::vector<double> uniq;
    uniq.reserve(out.size());
    for (double t : out)
        if (uniq.empty() || t - uniq.back() > tol) uniq.push_back(t);
    return uniq;
}

namespace {

History combine(const History& lhs, const History& rhs, double sign) {
    if (std::fabs(lhs.a() - rhs.a()) > domain_tol(lhs.a(), lhs.b()) ||
        std::fabs(lhs.b() - rhs.b()) > domain_tol(lhs.a(), lhs.b()))
        throw std::invalid_argument("History arithmetic: domains differ");
    auto mesh = merge_meshes(lhs.times(), rhs.times());
    mesh.front() = lhs.a();
    mesh.back() = lhs.b();
    const History l = lhs.resampled(mesh), r = rhs.resampled(mesh);
    std::vector<double> y(mesh.size()), dl(mesh.size()), dr(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        y[i] = l.values()[i] + sign * r.values()[i];
        dl[i] = l.left_derivs()[i] + sign * r.left_derivs()[i];
        dr[i] = l.right_derivs()[i] + sign * r.right_derivs()[i];
    }
    return History(std::move(mesh), std::move(y), std::move(dl), std::move(dr));
}

} // namespace

History operator-(const History& lhs, const History& rhs) { return combine(lhs, rhs, -1.0); }
History operator+(const History& lhs, const History& rhs) { return combine(lhs, rhs, +1.0); }

void History::append(double t, double y, double d) {
    if (!(t > t_.back())) throw std::invalid_argument("History::append: time must increase");
    t_.push_back(t);
    y_.push_back(y);
    dl_.push_back(d);
    dr_.push_back(d);
}

void History::set_right_deriv_at_end(double d) {
    dr_.back() = d;
    if (!kinks_.empty() && kinks_.back() == t_.back()) kinks_.pop_back();
    if (d != dl_.back()) kinks_.push_back(t_.back());
}

void History::write_csv(std::ostream& os) const {
    os << "t,value,derivative\n";
    char buf[96];
    for (std::size_t i = 0; i < t_.size(); ++i) {
        const double d = (i + 1 == t_.size()) ? dl_[i] : dr_[i];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t_[i], y_[i], d);
        os << buf;
    }
}

History History::read_csv(std::istream& is) {
    std::string line;
    std::vector<double> t, y, d;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (header) {
            header = false;
            if (line.rfind("t,", 0) == 0) continue;
        }
        std::istringstream row(line);
        std::array<double, 3> vals{};
        for (std::size_t k = 0; k < 3; ++k) {
            std::string cell;
            if (!std::getline(row, cell, ',')) throw std::invalid_argument("History CSV: short row at line " + std::to_string(lineno));
            try {
                std::size_t used = 0;
                vals[k] = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw std::invalid_argument("History CSV: bad number at line " + std::to_string(lineno));
            }
        }
        t.push_back(vals[0]);
        y.push_back(vals[1]);
        d.push_back(vals[2]);
    }
    return History(std::move(t), std::move(y), std::move(d));
}

HistoryView::HistoryView(const History& base) : base_(&base), origin_(base.b()), span_(base.b() - base.a()) {}

HistoryView::HistoryView(const History& base, double origin, double span, std::optional<HermitePiece> tail)
    : base_(&base), origin_(origin), span_(span), tail_(tail) {}

double HistoryView::operator()(double s) const {
    const double t = origin_ + s;
    if (tail_ && t > tail_->t0) return tail_->value(std::min(t, tail_->t1));
    return base_->eval(std::min(t, base_->b()));
}

double HistoryView::deriv(double s) const {
    const double t = origin_ + s;
    if (tail_ && t > tail_->t0) return tail_->slope(std::min(t, tail_->t1));
    return base_->eval_deriv(std::min(t, base_->b()));
}

void HistoryView::breakpoints(std::vector<double>& out) const {
    out.clear();
    const double lo = origin_ - span_;
    const auto k = base_->kinks();
    for (auto it = k.rbegin(); it != k.rend(); ++it) {
        if (*it >= origin_ || (tail_ && *it > tail_->t0)) continue;
        if (*it <= lo) break;
        out.push_back(origin_ - *it);
    }
}

History HistoryView::to_history() const {
    if (!tail_) return base_->segment(origin_, span_);
    // Window over the base part, then the tail as one more piece.
    const double cut = tail_->t0;
    History head = base_->segment(cut, span_ - (origin_ - cut));
    std::vector<double> t, y, l, r;
    const double shift = cut - origin_;
    for (std::size_t i = 0; i < head.size(); ++i) {
        t.push_back(head.times()[i] + shift);
        y.push_back(head.values()[i]);
        l.push_back(head.left_derivs()[i]);
        r.push_back(head.right_derivs()[i]);
    }
    t.front() = -span_;
    r.back() = tail_->m0;
    t.push_back(0.0);
    y.push_back(tail_->y1);
    l.push_back(tail_->m1);
    r.push_back(tail_->m1);
    return History(std::move(t), std::move(y), std::move(l), std::move(r));
}

} // namespace sdde
