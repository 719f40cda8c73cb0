#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sdde/history.hpp"
#include "sdde/maturation.hpp"
#include "sdde/model.hpp"
#include "sdde/report.hpp"
#include "sdde/solver.hpp"

namespace sdde {

/// Random piecewise cubic on [a, b]: jittered nodes, values and slopes uniform
/// in [-amplitude, amplitude] around `offset`, then the deviation from
/// `offset` is scaled down until lip_bound <= alpha.
struct RandomHistory {
    double a = -1.0;
    double b = 0.0;
    std::size_t min_nodes = 4;
    std::size_t max_nodes = 16;
    double amplitude = 1.0;
    double offset = 0.0;
    double alpha = 1.0;

    History operator()(std::mt19937_64& rng) const;
};

CheckReport check_sobolev(std::size_t samples, std::uint64_t seed, double h);

CheckReport check_apriori_w(const Trajectory& traj, const ModelSpec& spec, const DerivedBounds& bounds);

/// Bounded-beta estimate when M_beta is finite, otherwise (or when forced)
/// the Gronwall-form estimate evaluated by nested Simpson quadrature.
CheckReport check_apriori_v(const Trajectory& traj, const ModelSpec& spec, const DerivedBounds& bounds,
                            bool force_gronwall = false);

CheckReport check_deriv_bound(const Trajectory& traj, const ModelSpec& spec, const DerivedBounds& bounds);

CheckReport check_tau_envelope(const std::vector<MaturationResult>& results, const ModelSpec& spec);

CheckReport check_tau_lipschitz(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t pairs, double alpha,
                                std::uint64_t seed, double dt_y = 0.0);

/// 0 < calG(psi) <= K exp(h M_k) over random admissible psi.
CheckReport check_calG_domination(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t samples,
                                  double alpha, std::uint64_t seed, double dt_y = 0.0);

/// Ratio-boundedness of calG differences over pairs in a sup-ball of radius
/// delta around a base history: the worst ratio at dt_y stays within ten
/// times the worst ratio at 2 dt_y.
CheckReport check_calG_stability(const ModelSpec& spec, std::size_t pairs, double alpha, double delta,
                                 std::uint64_t seed, double dt_y = 0.0);

/// |F1| + |F2| <= M_q M + (C_beta M + a_beta) M M_G + mu M on random pairs
/// with sup norm at most M.
CheckReport check_rhs_local_bound(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t samples,
                                  double alpha, std::uint64_t seed, double dt_y = 0.0);

/// Growth and history-Lipschitz estimates of the maturation solution.
CheckReport check_maturation_estimates(const ModelSpec& spec, const DerivedBounds& bounds, std::size_t samples,
                                       double alpha, std::uint64_t seed, double dt_y = 0.0);

struct ConvergenceRow {
    double dt = 0.0;
    double sup_error = 0.0;
    double order = 0.0; // NaN on the first row
};

/// Integrates at each dt (descending, the last one being the reference) and
/// tabulates the sup error of every other run against the reference.
std::vector<ConvergenceRow> convergence_study(const ModelSpec& spec, const Prehistory& pre, double T,
                                              const std::vector<double>& dts, double dt_y = 0.0);

struct SuiteSettings {
    std::uint64_t seed = 42;
    std::size_t sobolev_samples = 200;
    std::size_t envelope_samples = 100;
    std::size_t tau_pairs = 100;
    std::size_t calG_samples = 200;
    std::size_t calG_pairs = 100;
    std::size_t rhs_samples = 100;
    std::size_t maturation_samples = 20;
    double alpha = 1.0;
    double delta = 0.5;
    double dt_y = 0.0;
};

/// Every check above: sample-based checks on the model, a priori and
/// derivative checks on `traj`.
CheckReport run_suite(const ModelSpec& spec, const DerivedBounds& bounds, const Trajectory& traj,
                      const SuiteSettings& settings);

} // namespace sdde
