#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hyperctrl/counterexample.hpp"
#include "hyperctrl/errors.hpp"

using namespace hyperctrl;

TEST_SUITE("counterexample") {

TEST_CASE("bump normalization against Simpson quadrature") {
    // Oracle: int_{-1}^{1} exp(-1 / (1 - s^2)) ds = 0.443993816...
    const double mass = testing::simpson(
        [](double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }, -1.0, 1.0, 200000);
    CHECK(mass == doctest::Approx(0.443993816).epsilon(1e-8));
    const Bump b(0.9, 1.0);
    CHECK(b.normalization() == doctest::Approx(1.0 / (0.05 * mass)).epsilon(1e-10));
    CHECK(testing::simpson(b, 0.9, 1.0, 20000) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(b(0.9) == 0.0);
    CHECK(b(1.0) == 0.0);
    CHECK(b(0.95) > 0.0);
}

TEST_CASE("constants of the reference construction") {
    const auto c = counterexample_constants(reference_counterexample(0.1));
    CHECK(c.T == doctest::Approx(1.9));
    CHECK(c.t_opt == doctest::Approx(1.5));
    CHECK(c.I_lo == doctest::Approx(0.9));
    CHECK(c.I_hi == doctest::Approx(1.0));
    CHECK(c.gamma_k1 == doctest::Approx(1.0));
    CHECK(c.gamma_kl == doctest::Approx(0.5));
    CHECK(c.theta_k == doctest::Approx(2.0 / 3.0));
    CHECK(c.theta_k1 == doctest::Approx(2.0));
}

TEST_CASE("coupling has only the two ridge entries") {
    const auto cx = reference_counterexample(0.1);
    const auto spec = counterexample_system(cx);
    const auto c = counterexample_constants(cx);
    const Bump phi(c.I_lo, c.I_hi);
    for (double t : {0.0, 0.5, 0.7, 1.2}) {
        for (double x : {0.1, 0.5, 0.9}) {
            const Eigen::MatrixXd C = spec.C(t, x);
            const double ridge = phi(t + c.tau_kl * x);
            // Entries (1, 3) and (2, 3) carry the ridge; every other entry vanishes.
            CHECK(C(0, 2) == doctest::Approx(-2.0 * 0.5 / c.theta_k * ridge));
            CHECK(C(1, 2) == doctest::Approx(-2.0 * 0.5 / (c.gamma_k1 * c.theta_k1) * ridge));
            Eigen::MatrixXd rest = C;
            rest(0, 2) = 0.0;
            rest(1, 2) = 0.0;
            CHECK(rest.norm() == 0.0);
        }
    }
}

TEST_CASE("inadmissible data is rejected") {
    SUBCASE("empty interval") {
        CHECK_THROWS_AS(counterexample_constants(reference_counterexample(1.2)), PreconditionError);
    }
    SUBCASE("coupling column out of range") {
        auto cx = reference_counterexample(0.1);
        cx.ell = 3;
        CHECK_THROWS_AS(counterexample_constants(cx), PreconditionError);
    }
}

TEST_CASE("terminal datum is supported where the trace prescription needs it") {
    const auto cx = reference_counterexample(0.1);
    const auto datum = witness_terminal_datum(cx);
    CHECK(datum(1, 0.5) == 0.0);
    CHECK(datum(1, 0.95) > 0.0);
    CHECK(datum(2, 0.95) == 0.0);
    CHECK(datum(3, 0.95) == 0.0);
}

TEST_CASE("dual witness at a moderate resolution") {
    const auto cx = reference_counterexample(0.1);
    WitnessTolerances tol;
    tol.strict = false;
    const auto w = build_dual_witness(cx, {400}, tol);
    const auto& r = w.report;
    CHECK(r.initial_norm > 0.1);
    // Frozen from this build; the ratio decays with the quadrature order as N grows.
    CHECK(r.ratio() == doctest::Approx(3.91104e-4).epsilon(1e-4));
    CHECK(r.identity_defects.at("boundary_ratios") < 1e-10);
    CHECK(r.identity_defects.at("vk_trace") < 1e-10);
    CHECK(r.identity_defects.at("observation_k_plus_1") < 1e-12);
    CHECK(r.identity_defects.at("initial_v_k_plus_1") < 1e-3);
    CHECK(r.identity_defects.at("observation_k_plus_ell") == doctest::Approx(r.ratio()).epsilon(0.05));
}

TEST_CASE("witness ratio decreases with the resolution") {
    const auto cx = reference_counterexample(0.1);
    WitnessTolerances tol;
    tol.strict = false;
    const double a = build_dual_witness(cx, {200}, tol).report.ratio();
    const double b = build_dual_witness(cx, {400}, tol).report.ratio();
    CHECK(b < 0.5 * a);
}

TEST_CASE("strict tolerances raise a construction error when unmet") {
    WitnessTolerances tol;
    tol.identity = 1e-30;
    CHECK_THROWS_AS(build_dual_witness(reference_counterexample(0.1), {100}, tol), ConstructionError);
}

TEST_CASE("failure scan reports one row per eps") {
    const auto rows = observability_failure_scan(reference_counterexample(0.1), {0.1, 0.2}, {200});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].T == doctest::Approx(1.8));
    CHECK(rows[0].ratio > 0.0);
    CHECK(rows[0].constant == 0.0);
}

}  // TEST_SUITE
