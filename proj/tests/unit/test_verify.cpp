#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <random>

#include "sdde/verify.hpp"
#include "support.hpp"

using namespace sdde;

namespace {

const ModelSpec kDemo = ModelSpec::demo();

const CheckItem& item(const CheckReport& r, const char* id) {
    const CheckItem* i = r.find(id);
    REQUIRE_MESSAGE(i != nullptr, id);
    return *i;
}

Trajectory run(const ModelSpec& spec, const Prehistory& pre, double T, double dt = 1e-3) {
    SolveSettings st;
    st.dt = dt;
    st.T = T;
    return integrate(spec, pre, st);
}

const Trajectory& demo_run() {
    static const Trajectory tr = run(kDemo, testing::demo_prehistory(kDemo), 5.0);
    return tr;
}

SuiteSettings small_suite(std::uint64_t seed) {
    SuiteSettings s;
    s.seed = seed;
    s.sobolev_samples = 50;
    s.envelope_samples = 20;
    s.tau_pairs = 20;
    s.calG_samples = 40;
    s.calG_pairs = 20;
    s.rhs_samples = 20;
    s.maturation_samples = 5;
    return s;
}

} // namespace

TEST_CASE("Sobolev embedding in closed form") {
    const History one = History::constant(1.0, -1.0, 0.0);
    CHECK(one.sup_norm() == 1.0);
    CHECK(one.h1_norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(one.sup_norm() <= 2.0 * one.h1_norm());

    const History lin({-1.0, 0.0}, {-1.0, 0.0}, {1.0, 1.0});
    CHECK(lin.sup_norm() == doctest::Approx(1.0));
    CHECK(lin.h1_norm() == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-13));

    const CheckReport r = check_sobolev(200, 42, kDemo.h());
    CHECK(item(r, "sobolev").status == CheckStatus::pass);
    CHECK(item(r, "sobolev").context.find("worst of 200, 0 violations") != std::string::npos);
    CHECK_THROWS_AS(check_sobolev(0, 42, 1.0), std::invalid_argument);
}

TEST_CASE("random histories respect the derivative bound") {
    RandomHistory gen;
    gen.a = -2.5;
    gen.alpha = 0.7;
    gen.amplitude = 3.0;
    gen.offset = 1.0;
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
        const History f = gen(rng);
        CHECK(f.a() == -2.5);
        CHECK(f.b() == 0.0);
        CHECK(f.size() >= gen.min_nodes);
        CHECK(f.size() <= gen.max_nodes);
        CHECK(f.lip_bound() <= 0.7 * (1.0 + 1e-12));
        for (double y : f.values()) CHECK(std::fabs(y - 1.0) <= 3.0);
    }
    std::mt19937_64 a(9), b(9);
    CHECK(gen(a).values()[1] == gen(b).values()[1]);
}

TEST_CASE("a priori bound on w") {
    const ModelSpec flat = testing::constant_model(0.0, 0.0, 1.5);
    const Trajectory still = run(flat, testing::constant_prehistory(0.9, 0.3, flat.h()), 1.0);
    const CheckItem& s = item(check_apriori_w(still, flat, derive_bounds(flat)), "apriori_w");
    CHECK(s.status == CheckStatus::pass);
    CHECK(s.measured == s.bound);

    // Saturated growth rate.
    const ModelSpec sat = testing::constant_model(0.4, 0.0, 1.5);
    const DerivedBounds b = derive_bounds(sat);
    const Trajectory grow = run(sat, testing::constant_prehistory(0.9, 0.3, sat.h()), 2.0);
    const CheckItem& g = item(check_apriori_w(grow, sat, b), "apriori_w");
    CHECK(g.status == CheckStatus::pass);
    // Above 1 only by floating-point rounding.
    constexpr double rounding = 1e-14;
    const double ratio = g.measured / g.bound;
    CHECK(ratio >= 1.0 - 1e-6);
    CHECK(ratio <= 1.0 + rounding);
    // Every node, not only the worst one.
    const auto t = grow.w().times();
    for (std::size_t i = grow.origin_index(); i < t.size(); ++i) {
        const double r = grow.w().values()[i] / (0.9 * std::exp(t[i] * b.M_q));
        CHECK(r >= 1.0 - 1e-6);
        CHECK(r <= 1.0 + rounding);
    }

    CHECK(item(check_apriori_w(demo_run(), kDemo, derive_bounds(kDemo)), "apriori_w").status == CheckStatus::pass);
}

TEST_CASE("a priori bound on v") {
    const ModelSpec decay = testing::constant_model(0.0, 0.0, 1.5);
    const Trajectory d = run(decay, testing::constant_prehistory(0.9, -0.3, decay.h()), 2.0);
    const CheckItem& di = item(check_apriori_v(d, decay, derive_bounds(decay)), "apriori_v");
    CHECK(di.status == CheckStatus::pass);
    CHECK(di.bound == doctest::Approx(0.3).epsilon(1e-14));

    // mu = 0, constant beta, q and calG at their maxima: v grows like the
    // integral of the bound's exponential, so the margin is at least C.
    ModelParams p;
    p.mu = 0.0;
    const double Mq = 0.3, Mb = 0.7, w0 = 0.5, v0 = 0.2;
    const ModelSpec sat = testing::constant_model(Mq, Mb, p.K, 0.0, p);
    const DerivedBounds b = derive_bounds(sat);
    REQUIRE(b.M_G == p.K);
    const Trajectory s = run(sat, testing::constant_prehistory(w0, v0, sat.h()), 3.0);
    const CheckItem& si = item(check_apriori_v(s, sat, b), "apriori_v");
    CHECK(si.status == CheckStatus::pass);
    const double C = Mb * p.K * w0 / Mq;
    const auto t = s.v().times();
    for (std::size_t i = s.origin_index(); i < t.size(); i += 100) {
        const double bound = v0 + C * std::exp(Mq * t[i]);
        CHECK(bound - s.v().values()[i] >= C * (1.0 - 1e-9));
    }
    CHECK(si.margin >= C * (1.0 - 1e-9));

    CHECK(item(check_apriori_v(demo_run(), kDemo, derive_bounds(kDemo)), "apriori_v").status == CheckStatus::pass);
}

TEST_CASE("Gronwall-form bound on v") {
    const DerivedBounds b = derive_bounds(kDemo);
    const CheckReport forced = check_apriori_v(demo_run(), kDemo, b, true);
    CHECK(item(forced, "apriori_v").status == CheckStatus::pass);
    CHECK(item(forced, "apriori_v").context.find("Gronwall") != std::string::npos);

    DerivedBounds unbounded = b;
    unbounded.M_beta = INFINITY;
    const CheckReport r = check_apriori_v(demo_run(), kDemo, unbounded);
    CHECK(r.to_json() == forced.to_json());

    // Without births the estimate reduces to |psi(0)| e^{M_q t}.
    const ModelSpec decay = testing::constant_model(0.2, 0.0, 1.5);
    const DerivedBounds db = derive_bounds(decay);
    const Trajectory d = run(decay, testing::constant_prehistory(0.9, -0.3, decay.h()), 1.0);
    const CheckItem& g = item(check_apriori_v(d, decay, db, true), "apriori_v");
    CHECK(g.status == CheckStatus::pass);
    CHECK(g.bound >= 0.3);
    CHECK(g.bound <= 0.3 * std::exp(0.2 * 1.0) * (1.0 + 1e-12));
}

TEST_CASE("derivative estimate") {
    ModelParams p;
    p.mu = 0.0;
    const ModelSpec zero = testing::constant_model(0.0, 0.0, 1.5, 0.0, p);
    const Trajectory z = run(zero, testing::constant_prehistory(1.0, 1.0, zero.h()), 1.0);
    const CheckItem& zi = item(check_deriv_bound(z, zero, derive_bounds(zero)), "deriv_bound");
    CHECK(zi.status == CheckStatus::pass);
    CHECK(zi.measured == 0.0);

    const double q0 = 0.25;
    const ModelSpec lin = testing::constant_model(q0, 0.0, 1.5);
    const Trajectory l = run(lin, testing::constant_prehistory(0.8, 0.6, lin.h()), 1.0);
    const CheckItem& li = item(check_deriv_bound(l, lin, derive_bounds(lin)), "deriv_bound");
    CHECK(li.status == CheckStatus::pass);
    // |u'|^2 = q0^2 w^2 + mu^2 v^2 on both sides.
    const double mu = lin.params().mu;
    const auto t = l.w().times();
    for (std::size_t i = l.origin_index(); i < t.size(); i += 100) {
        const double w = l.w().values()[i], v = l.v().values()[i];
        const double lhs = q0 * q0 * w * w + mu * mu * v * v;
        const double rhs = q0 * q0 * 0.64 * std::exp(2 * q0 * t[i]) + 2 * mu * mu * v * v;
        CHECK(lhs <= rhs);
    }

    CHECK(item(check_deriv_bound(demo_run(), kDemo, derive_bounds(kDemo)), "deriv_bound").status == CheckStatus::pass);
}

TEST_CASE("maturity envelope reaches both ends") {
    for (double c : {2.0, 0.5}) {
        const ModelSpec spec = testing::constant_model(0.0, 0.0, c);
        const MaturationResult m = mature(History::constant(0.0, -spec.h(), 0.0), spec, spec.default_dt_y());
        const CheckReport r = check_tau_envelope({m}, spec);
        CHECK(r.all_pass());
        const char* end = c == 2.0 ? "tau_envelope.tau_lower" : "tau_envelope.tau_upper";
        CHECK(std::fabs(item(r, end).margin) <= 1e-12);
    }
    std::mt19937_64 rng(17);
    RandomHistory gen;
    gen.a = -kDemo.h();
    std::vector<MaturationResult> results;
    for (int k = 0; k < 100; ++k) results.push_back(mature(gen(rng), kDemo, kDemo.default_dt_y()));
    CHECK(check_tau_envelope(results, kDemo).all_pass());

    // A maturity path that is too slow.
    MaturationResult slow = results.front();
    slow.tau = 3.0;
    CHECK(item(check_tau_envelope({slow}, kDemo), "tau_envelope.tau_upper").status == CheckStatus::fail);
}

TEST_CASE("tau Lipschitz check") {
    const ModelSpec flat = testing::constant_model(0.0, 0.0, 1.5);
    const CheckItem& f = item(check_tau_lipschitz(flat, derive_bounds(flat), 20, 1.0, 5), "tau_lipschitz");
    CHECK(f.measured == 0.0);
    CHECK(f.status == CheckStatus::pass);

    const CheckItem& d = item(check_tau_lipschitz(kDemo, derive_bounds(kDemo), 100, 1.0, 5), "tau_lipschitz");
    CHECK(d.status == CheckStatus::pass);
    CHECK(d.measured > 0.0);
    CHECK(d.measured <= d.bound);
    CHECK(item(check_tau_lipschitz(kDemo, derive_bounds(kDemo), 0, 1.0, 5), "tau_lipschitz").status ==
          CheckStatus::skip);
}

TEST_CASE("sample-based checks on the demo model") {
    const DerivedBounds b = derive_bounds(kDemo);
    const CheckReport g = check_calG_domination(kDemo, b, 200, 1.0, 7);
    CHECK(item(g, "calG_domination.upper").status == CheckStatus::pass);
    CHECK(item(g, "calG_domination.positive").status == CheckStatus::pass);
    CHECK(item(check_calG_stability(kDemo, 100, 1.0, 0.5, 7), "calG_lipschitz_stability").status == CheckStatus::pass);
    CHECK(item(check_rhs_local_bound(kDemo, b, 100, 1.0, 7), "rhs_local_bound").status == CheckStatus::pass);
    const CheckReport m = check_maturation_estimates(kDemo, b, 20, 1.0, 7);
    CHECK(item(m, "y_growth").status == CheckStatus::pass);
    CHECK(item(m, "y_history_lipschitz").status == CheckStatus::pass);
}

TEST_CASE("convergence study") {
    // Decoupled linear model: pure RK4.
    const ModelSpec lin = testing::constant_model(0.5, 0.0, 1.5);
    const auto rows = convergence_study(lin, testing::constant_prehistory(1.0, 0.5, lin.h()), 2.0,
                                        {0.1, 0.05, 0.025, 0.0125, 0.1 / 64});
    REQUIRE(rows.size() == 4);
    CHECK(std::isnan(rows[0].order));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].dt == rows[i - 1].dt / 2);
        CHECK(rows[i].order == doctest::Approx(4.0).epsilon(0.1));
    }

    const auto demo = convergence_study(kDemo, testing::demo_prehistory(kDemo), 1.0, {0.02, 0.01, 0.005, 0.02 / 16});
    for (std::size_t i = 1; i < demo.size(); ++i) CHECK(demo[i].order >= 2.0);

    CHECK_THROWS_AS(convergence_study(lin, testing::constant_prehistory(1.0, 0.5, lin.h()), 1.0, {0.01, 0.02}),
                    std::invalid_argument);
    CHECK_THROWS_AS(convergence_study(lin, testing::constant_prehistory(1.0, 0.5, lin.h()), 1.0, {0.01}),
                    std::invalid_argument);
}

TEST_CASE("suite is deterministic and passes for every seed") {
    const DerivedBounds b = derive_bounds(kDemo);
    const CheckReport a = run_suite(kDemo, b, demo_run(), small_suite(42));
    const CheckReport c = run_suite(kDemo, b, demo_run(), small_suite(42));
    CHECK(a.to_json() == c.to_json());
    CHECK(a.all_pass());
    for (std::uint64_t seed : {1u, 41u, 1234u}) {
        const CheckReport r = run_suite(kDemo, b, demo_run(), small_suite(seed));
        CHECK_MESSAGE(r.all_pass(), "seed ", seed);
        REQUIRE(r.items().size() == a.items().size());
        for (std::size_t i = 0; i < r.items().size(); ++i) CHECK(r.items()[i].check_id == a.items()[i].check_id);
    }
}

TEST_CASE("report items follow the margin convention") {
    const CheckReport r = run_suite(kDemo, derive_bounds(kDemo), demo_run(), small_suite(42));
    const auto j = nlohmann::json::parse(r.to_json());
    REQUIRE(j.is_array());
    REQUIRE(j.size() == r.items().size());
    const std::vector<std::string> lower{"tau_envelope.tau_lower", "tau_envelope.y_lower", "calG_domination.positive"};
    for (const auto& it : r.items()) {
        if (it.status == CheckStatus::skip) continue;
        const bool is_lower = std::find(lower.begin(), lower.end(), it.check_id) != lower.end();
        CHECK(it.margin == (is_lower ? it.measured - it.bound : it.bound - it.measured));
        const bool ok = it.margin >= -slack_for(it.check_id).at(it.bound);
        CHECK_MESSAGE((it.status == CheckStatus::pass) == ok, it.check_id);
    }
    for (const auto& e : j) {
        CHECK(e.contains("check_id"));
        CHECK(e.contains("status"));
        CHECK(e.contains("measured"));
        CHECK(e.contains("bound"));
        CHECK(e.contains("margin"));
        CHECK(e.contains("context"));
    }
}

TEST_CASE("a deliberately broken bound is caught") {
    DerivedBounds b = derive_bounds(kDemo);
    b.M_q = 0.25;
    const CheckItem& w = item(check_apriori_w(demo_run(), kDemo, b), "apriori_w");
    CHECK(w.status == CheckStatus::fail);
    CHECK(w.context.find("0 violations") == std::string::npos);
    CHECK_FALSE(run_suite(kDemo, b, demo_run(), small_suite(42)).all_pass());
}
