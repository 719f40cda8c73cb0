#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sdde/expr.hpp"

namespace sdde {

class Trajectory;

/// One cubic Hermite polynomial on [t0, t1].
struct HermitePiece {
    double t0 = 0.0, t1 = 1.0;
    double y0 = 0.0, y1 = 0.0;
    double m0 = 0.0, m1 = 0.0;

    double value(double t) const noexcept;
    double slope(double t) const noexcept;

    /// The same cubic restricted to [t0, t_end].
    HermitePiece restricted(double t_end) const noexcept;

    /// Straight line through (t0, y0) and (t1, y1).
    static HermitePiece linear(double t0, double y0, double t1, double y1) noexcept;
};

/// Piecewise cubic Hermite function on [a, b].
///
/// Nodes carry a value and a one-sided derivative pair: `left` feeds the piece
/// ending at the node, `right` the piece starting there. They coincide except
/// at breakpoints such as t = 0 of a solution whose prehistory is not
/// compatible with the right-hand side.
class History {
public:
    History() = default;
    History(std::vector<double> t, std::vector<double> y, std::vector<double> dy);
    History(std::vector<double> t, std::vector<double> y, std::vector<double> d_left, std::vector<double> d_right);

    static History from_expr(const Expr& e, double a, double b, std::size_t n_nodes);
    static History from_function(const std::function<double(double)>& f, const std::function<double(double)>& df,
                                 double a, double b, std::size_t n_nodes);
    static History constant(double c, double a, double b);

    double a() const noexcept { return t_.front(); }
    double b() const noexcept { return t_.back(); }
    std::size_t size() const noexcept { return t_.size(); }
    bool empty() const noexcept { return t_.empty(); }

    std::span<const double> times() const noexcept { return t_; }
    std::span<const double> values() const noexcept { return y_; }
    std::span<const double> left_derivs() const noexcept { return dl_; }
    std::span<const double> right_derivs() const noexcept { return dr_; }
    /// Interior nodes whose one-sided derivatives differ, ascending.
    std::span<const double> kinks() const noexcept { return kinks_; }

    double eval(double t) const;
    double eval_deriv(double t) const;

    HermitePiece piece(std::size_t i) const noexcept;
    std::size_t piece_index(double t) const;

    double l2_norm() const;
    double l2_norm_deriv() const;
    double h1_norm() const;
    double sup_norm() const;
    double lip_bound() const;

    /// s -> this(t + s) on [-h, 0].
    History segment(double t, double h) const;

    /// Resample onto a node set that refines the current one.
    History resampled(std::span<const double> nodes) const;

    History scaled(double factor) const;

    void write_csv(std::ostream& os) const;
    static History read_csv(std::istream& is);

    friend History operator-(const History& lhs, const History& rhs);
    friend History operator+(const History& lhs, const History& rhs);

private:
    friend class Trajectory;
    void append(double t, double y, double d);
    void set_right_deriv_at_end(double d);
    void check_invariants() const;

    std::vector<double> t_, y_, dl_, dr_;
    std::vector<double> kinks_;
};

/// Sorted union of two node sets, merging near-duplicates.
std::vector<double> merge_meshes(std::span<const double> a, std::span<const double> b);

/// Non-owning window s in [-span, 0] onto a History at `origin + s`; an
/// optional tail piece covers (base.b(), origin] beyond the committed data.
class HistoryView {
public:
    HistoryView(const History& base); // NOLINT: whole history as a window ending at b
    HistoryView(const History& base, double origin, double span, std::optional<HermitePiece> tail = std::nullopt);

    double operator()(double s) const;
    double deriv(double s) const;
    double span() const noexcept { return span_; }
    /// Offsets s in (0, span) of the base kinks inside the window, ascending.
    void breakpoints(std::vector<double>& out) const;
    double origin() const noexcept { return origin_; }

    /// Materialize as an owning History on [-span, 0].
    History to_history() const;

private:
    const History* base_;
    double origin_;
    double span_;
    std::optional<HermitePiece> tail_;
};

} // namespace sdde
