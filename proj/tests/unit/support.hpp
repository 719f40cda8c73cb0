#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdde/history.hpp"
#include "sdde/model.hpp"
#include "sdde/solver.hpp"

namespace testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Piecewise cubic on [a, b] with jittered nodes; values and slopes uniform in
// [-amp, amp], rescaled so that the derivative never exceeds lip_cap.
inline sdde::History random_cubic(std::mt19937_64& rng, double a, double b, double amp = 1.0,
                                  double lip_cap = INFINITY, std::size_t max_nodes = 12) {
    const std::size_t n = 2 + std::uniform_int_distribution<std::size_t>(0, max_nodes - 2)(rng);
    std::vector<double> t(n), y(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double base = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
        const double jitter = (i == 0 || i + 1 == n) ? 0.0 : uniform(rng, -0.25, 0.25) * (b - a) / (n - 1);
        t[i] = i + 1 == n ? b : base + jitter;
        y[i] = uniform(rng, -amp, amp);
        d[i] = uniform(rng, -amp, amp);
    }
    sdde::History h(t, y, d);
    const double lip = h.lip_bound();
    if (std::isfinite(lip_cap) && lip > lip_cap) h = h.scaled(lip_cap / lip);
    return h;
}

// Model with constant rates: q = q0, beta = b0, g = c, d = dval, D1g = 0.
inline sdde::ModelSpec constant_model(double q0, double b0, double c, double dval = 0.0,
                                      sdde::ModelParams p = {1.0, 2.0, 0.2, 0.5, 2.0, 5.0}) {
    auto num = [](double x) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    return sdde::ModelSpec::from_strings(num(q0), num(b0), std::nullopt, num(c), "0", num(dval), p);
}

inline sdde::Prehistory demo_prehistory(const sdde::ModelSpec& spec, std::size_t nodes = 41) {
    const double h = spec.h();
    return sdde::Prehistory(
        sdde::History::constant(1.0, -h, 0.0),
        sdde::History::from_function([h](double t) { return 0.1 * (1.0 + t / h); }, [h](double) { return 0.1 / h; },
                                     -h, 0.0, nodes));
}

inline sdde::Prehistory constant_prehistory(double w0, double v0, double h) {
    return sdde::Prehistory(sdde::History::constant(w0, -h, 0.0), sdde::History::constant(v0, -h, 0.0));
}

} // namespace testing
