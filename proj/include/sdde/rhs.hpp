#pragma once

#include "sdde/history.hpp"
#include "sdde/maturation.hpp"
#include "sdde/model.hpp"

namespace sdde {

struct RhsValue {
    double f1 = 0.0; // dw/dt
    double f2 = 0.0; // dv/dt
    double tau = 0.0;
    double calG = 0.0;
};

/// Growth factor of progenitors over their maturation, for an already solved
/// maturation of the same psi.
double calG_from(const MaturationResult& m, const HistoryView& psi, const ModelSpec& spec);

double calG(const HistoryView& psi, const ModelSpec& spec, double dt_y);

/// Right-hand side on the pair of segments (phi = w-channel, psi = v-channel),
/// both windows of span h ending at the current time. One maturation solve.
RhsValue rhs_F(const HistoryView& phi, const HistoryView& psi, const ModelSpec& spec, double dt_y);

/// int_0^h t e^{L t} dt in closed form.
double t_exp_integral(double L, double h);

/// Lipschitz constant of tau with respect to the H1 norm on histories with
/// derivative bounded by alpha, given the Lipschitz constant L of g.
double tau_lip_bound(const ModelSpec& spec, double L);

/// K exp(h M_k).
double calG_bound(const ModelSpec& spec, const DerivedBounds& bounds);

} // namespace sdde
