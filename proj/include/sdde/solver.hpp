#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sdde/history.hpp"
#include "sdde/model.hpp"
#include "sdde/rhs.hpp"

namespace sdde {

/// Initial condition (w, v) on [-h, 0], held on a common node mesh.
struct Prehistory {
    History w;
    History v;

    Prehistory(History w_in, History v_in);
};

/// Solution record on [-h, T]: both channels share node times; nodes with
/// t <= 0 are the prehistory. tau and calG are stored per node from t = 0 on.
class Trajectory {
public:
    Trajectory(const Prehistory& pre);

    const History& w() const noexcept { return w_; }
    const History& v() const noexcept { return v_; }
    double h() const noexcept { return h_; }
    double t_end() const noexcept { return w_.b(); }
    /// Index of the node at t = 0.
    std::size_t origin_index() const noexcept { return origin_; }
    std::span<const double> tau() const noexcept { return tau_; }
    std::span<const double> calG() const noexcept { return calG_; }

    HistoryView window_w(double t, std::optional<HermitePiece> tail = std::nullopt) const {
        return HistoryView(w_, t, h_, tail);
    }
    HistoryView window_v(double t, std::optional<HermitePiece> tail = std::nullopt) const {
        return HistoryView(v_, t, h_, tail);
    }
    History segment_w(double t) const { return w_.segment(t, h_); }
    History segment_v(double t) const { return v_.segment(t, h_); }

    /// Right derivatives at t = 0 plus the delay data there.
    void start(const RhsValue& f0);
    void append(double t, double w, double v, const RhsValue& f);

    void write_csv(std::ostream& os) const;

private:
    History w_, v_;
    double h_;
    std::size_t origin_;
    std::vector<double> tau_, calG_;
};

struct SolveSettings {
    double dt = 1e-3;
    double T = 1.0;
    double dt_y = 0.0; // 0 selects the model default
    double blowup_cap = 1e9;
    double alpha_cap = 1e6;
};

Trajectory integrate(const ModelSpec& spec, const Prehistory& pre, const SolveSettings& settings);

struct PicardSettings {
    double T0 = 0.5;
    double tol = 1e-9;
    std::size_t max_iter = 200;
    std::size_t grid_n = 512;
    double dt_y = 0.0;
    std::optional<std::uint64_t> seed; // perturbs the starting iterate away from t = 0
};

struct PicardResult {
    Trajectory traj;
    std::vector<double> sup_diffs; // per iteration, successive-iterate sup difference
    std::size_t iterations = 0;
};

PicardResult picard_solve(const ModelSpec& spec, const Prehistory& pre, const PicardSettings& settings);

struct VocResidual {
    double r_w = 0.0;
    double r_v = 0.0;
};

VocResidual voc_residual(const Trajectory& traj, const ModelSpec& spec, double dt_y = 0.0);

/// |F(Phi) - Phi'(0-)| in the Euclidean norm.
double compatibility_defect(const ModelSpec& spec, const Prehistory& pre, double dt_y = 0.0);

/// Prehistory whose left derivative at 0 matches the right-hand side: the
/// base functions plus c t e^t per channel, with c_w in closed form and c_v
/// by secant iteration.
Prehistory make_compatible(const ModelSpec& spec, const std::function<double(double)>& w_base,
                           const std::function<double(double)>& dw_base, const std::function<double(double)>& v_base,
                           const std::function<double(double)>& dv_base, std::size_t n_nodes, double dt_y = 0.0);

/// Sup over [0, T] of the distance between two trajectories, sampled at the
/// nodes of `coarse` (both channels).
double sup_distance(const Trajectory& coarse, const Trajectory& fine, double T);

} // namespace sdde
