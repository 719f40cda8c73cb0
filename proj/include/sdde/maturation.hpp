#pragma once

#include <cstddef>

#include "sdde/history.hpp"
#include "sdde/model.hpp"

namespace sdde {

struct MaturationResult {
    History y;       // maturity against elapsed backward time s, on [0, s_end]
    double tau = 0.0;
    std::size_t n_steps = 0;
    std::size_t root_iterations = 0;
};

/// Integrates y'(s) = -g(y(s), phi(-s)), y(0) = x2 with fixed-step RK4 until
/// the first step ending at or below x1, plus one bracketing step, never past
/// s = h. Steps also end at the window's breakpoints. Node slopes are the
/// stage-one derivatives, so the dense output is the usual RK4 Hermite
/// interpolant. phi(-s) for s > h is clamped to phi(-h).
///
/// Throws AssumptionViolation if y leaves the closed ball around x2 of radius
/// b and RangeExit if phi leaves the model's v-range.
History solve_y(const HistoryView& phi, const ModelSpec& spec, double dt_y);

/// Threshold crossing y(tau) = x1 by bisection on the dense output, polished
/// with one Newton step on the bracketing cubic. Requires strictly decreasing
/// node values; throws AssumptionViolation without a bracket.
double find_tau(const History& y, double x1, std::size_t* iterations = nullptr);

MaturationResult mature(const HistoryView& phi, const ModelSpec& spec, double dt_y);

/// Growth estimate for |y(t)| from Gronwall's lemma, with L the Lipschitz
/// constant of g.
double y_growth_bound(const History& phi, const ModelSpec& spec, double L, double t);

/// max over s in [0, min(tau_phi, tau_psi)] of
///   |y_phi(s) - y_psi(s)| - L |phi - psi|_sup s e^{L s};
/// non-positive (up to discretization) when the history estimate holds.
double y_history_lip_margin(const History& phi, const History& psi, const ModelSpec& spec, double L, double dt_y);

} // namespace sdde
