#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sdde/maturation.hpp"
#include "support.hpp"

using namespace sdde;

namespace {

const ModelSpec kDemo = ModelSpec::demo();

History zero_history(double h) { return History::constant(0.0, -h, 0.0); }

// Smooth non-constant prehistory that makes g vary along the maturation path.
History wavy(double h, double amp = 0.8, double freq = 3.0) {
    return History::from_function([=](double t) { return amp * std::sin(freq * t); },
                                  [=](double t) { return amp * freq * std::cos(freq * t); }, -h, 0.0, 201);
}

} // namespace

TEST_CASE("constant maturation rate integrates exactly") {
    for (double c : {1.0, 2.0}) {
        const ModelSpec spec = testing::constant_model(0.0, 0.0, c);
        const History y = solve_y(zero_history(spec.h()), spec, 0.02);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y.values()[i] == doctest::Approx(2.0 - c * y.times()[i]).epsilon(1e-14));
        CHECK(y.eval(0.333) == doctest::Approx(2.0 - c * 0.333).epsilon(1e-14));
        CHECK(find_tau(y, 1.0) == doctest::Approx(1.0 / c).epsilon(1e-12));
    }
}

TEST_CASE("demo maturation with a zero prehistory is linear") {
    const MaturationResult m = mature(zero_history(kDemo.h()), kDemo, kDemo.default_dt_y());
    for (std::size_t i = 0; i < m.y.size(); ++i)
        CHECK(m.y.values()[i] == doctest::Approx(2.0 - 1.5 * m.y.times()[i]).epsilon(1e-14));
    CHECK(std::fabs(m.tau - 2.0 / 3.0) <= 1e-10);
    CHECK(m.y.values().front() == 2.0);
    CHECK(m.n_steps == m.y.size() - 1);
}

TEST_CASE("find_tau on explicit maturity curves") {
    const History a({0.0, 2.0}, {2.0, 0.0}, {-1.0, -1.0});
    CHECK(find_tau(a, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
    const History b({0.0, 0.25, 1.0}, {2.0, 1.5, 0.0}, {-2.0, -2.0, -2.0});
    std::size_t iters = 0;
    CHECK(find_tau(b, 1.0, &iters) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(iters > 0);

    const History short_curve({0.0, 1.0}, {2.0, 1.9}, {-0.1, -0.1});
    CHECK_THROWS_AS(find_tau(short_curve, 1.0), AssumptionViolation);
    const History bumpy({0.0, 0.5, 1.0}, {2.0, 2.1, 0.5}, {-1.0, -1.0, -1.0});
    CHECK_THROWS_AS(find_tau(bumpy, 1.0), AssumptionViolation);
    const History low({0.0, 1.0}, {0.9, 0.5}, {-0.4, -0.4});
    CHECK_THROWS_AS(find_tau(low, 1.0), AssumptionViolation);
}

TEST_CASE("root tolerance on a curved maturity path") {
    const MaturationResult m = mature(wavy(kDemo.h()), kDemo, kDemo.default_dt_y());
    CHECK(std::fabs(m.y.eval(m.tau) - kDemo.params().x1) <= 1e-12 * (kDemo.params().x2 - kDemo.params().x1));
}

TEST_CASE("maturity envelope, containment and monotonicity") {
    std::mt19937_64 rng(2);
    const auto& p = kDemo.params();
    const double dt_y = kDemo.default_dt_y();
    const double tol = 10.0 * std::pow(dt_y, 4);
    for (int k = 0; k < 100; ++k) {
        const History phi = testing::random_cubic(rng, -kDemo.h(), 0.0, 2.0, 2.0);
        const MaturationResult m = mature(phi, kDemo, dt_y);
        CHECK(m.tau >= (p.x2 - p.x1) / p.K - tol);
        CHECK(m.tau <= (p.x2 - p.x1) / p.eps + tol);
        CHECK(m.tau < kDemo.h());
        const auto s = m.y.times();
        const auto y = m.y.values();
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(y[i] >= p.x2 - p.K * s[i] - tol);
            CHECK(y[i] <= p.x2 - p.eps * s[i] + tol);
            CHECK(std::fabs(y[i] - p.x2) <= p.b);
            if (i > 0) CHECK(y[i] < y[i - 1]);
        }
    }
}

TEST_CASE("tau converges at fourth order in the nested step") {
    // One cubic piece, so the integrand is smooth in s.
    const History phi({-kDemo.h(), 0.0}, {0.8, -0.5}, {1.0, -2.0});
    const double ref = mature(phi, kDemo, 0.04 / 256).tau;
    std::vector<double> err;
    for (double dt = 0.04; err.size() < 5; dt /= 2) err.push_back(std::fabs(mature(phi, kDemo, dt).tau - ref));
    // Where tau falls inside a step moves the dense-output error around, so
    // the order is read across the whole span rather than per halving.
    const double order = std::log2(err.front() / err.back()) / 4.0;
    CHECK_MESSAGE(order >= 3.5, err.front(), " -> ", err.back());
    for (std::size_t k = 1; k < err.size(); ++k) CHECK(err[k] < err[k - 1]);
}

TEST_CASE("solve_y failure modes") {
    const ModelSpec narrow(kDemo.functions(), kDemo.params(), -0.5, 0.5);
    CHECK_THROWS_AS(solve_y(History::constant(0.7, -kDemo.h(), 0.0), narrow, 0.01), RangeExit);
    // A rate far above K drives y out of the ball before the crossing.
    ModelParams p;
    p.b = 0.5;
    const ModelSpec fast = testing::constant_model(0.0, 0.0, 50.0, 0.0, p);
    CHECK_THROWS_AS(solve_y(zero_history(fast.h()), fast, 0.001), AssumptionViolation);
    CHECK_THROWS_AS(solve_y(zero_history(kDemo.h()), kDemo, 0.0), std::invalid_argument);
}

TEST_CASE("nested steps end at the window's kinks") {
    // phi with a derivative jump at -0.3.
    const double h = kDemo.h();
    const History phi({-h, -0.3, 0.0}, {0.0, 0.0, 0.3}, {0.0, 0.0, 1.0}, {0.0, 1.0, 1.0});
    const History y = solve_y(phi, kDemo, 0.1);
    bool hit = false;
    for (double s : y.times()) hit = hit || std::fabs(s - 0.3) < 1e-15;
    CHECK(hit);
}

TEST_CASE("y growth estimate") {
    const ModelSpec one = testing::constant_model(0.0, 0.0, 1.0);
    const History zero = zero_history(one.h());
    CHECK(y_growth_bound(zero, one, 0.0, 0.0) == 2.0);
    for (double t : {0.1, 0.5, 1.0}) {
        CHECK(y_growth_bound(zero, one, 0.0, t) == doctest::Approx(2.0 + t));
        CHECK(std::fabs(2.0 - t) <= y_growth_bound(zero, one, 0.0, t));
    }
    const DerivedBounds b = derive_bounds(kDemo);
    const History z = zero_history(kDemo.h());
    const double tau = mature(z, kDemo, kDemo.default_dt_y()).tau;
    CHECK(y_growth_bound(z, kDemo, b.L_g, tau) >= kDemo.params().x1);
    CHECK(y_growth_bound(z, kDemo, b.L_g, 0.0) == kDemo.params().x2);
}

TEST_CASE("dependence of y on the history") {
    const DerivedBounds b = derive_bounds(kDemo);
    const double h = kDemo.h();
    const History z = zero_history(h);
    CHECK(y_history_lip_margin(z, z, kDemo, b.L_g, 0.01) <= 0.0);

    const ModelSpec flat = testing::constant_model(0.0, 0.0, 1.0);
    CHECK(y_history_lip_margin(z, History::constant(0.4, -h, 0.0), flat, 0.0, 0.01) <= 0.0);

    CHECK(y_history_lip_margin(z, History::constant(0.1, -h, 0.0), kDemo, b.L_g, 1e-3) <= 1e-6);

    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k) {
        const History a = testing::random_cubic(rng, -h, 0.0, 1.0, 1.0), c = testing::random_cubic(rng, -h, 0.0, 1.0, 1.0);
        CHECK(y_history_lip_margin(a, c, kDemo, b.L_g, kDemo.default_dt_y()) <= 1e-6);
    }
}
