#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hyperctrl/controllability.hpp"

using namespace hyperctrl;

TEST_SUITE("controllability") {

TEST_CASE("Gramian is symmetric and positive semidefinite") {
    const auto spec = testing::preset("affine-k1m1");
    const ControlToStateMap map(spec, 0.0, 1.5, {48});
    const auto g = assemble_gramian(map);
    CHECK(g.symmetry_defect() < 1e-8);
    CHECK(g.min_eigenvalue() > -1e-10 * g.max_eigenvalue());
    CHECK(g.dim() == g.state_dim() - 2);
}

TEST_CASE("Gramian matrix agrees with the matrix-free apply away from the control fronts") {
    // Jumps of the observation trace (at both window ends and where the dual inflow value
    // jumps) become jump fronts of the state. On a front node the dense form averages the
    // two sides while the solve picks one, so only a few isolated nodes may differ.
    for (const char* name : {"ref-k1m1", "k2m1-zero"}) {
        CAPTURE(name);
        const auto spec = testing::preset(name);
        const ControlToStateMap map(spec, 0.0, spec.t_opt(), {32});
        const auto g = assemble_gramian(map);
        const Eigen::VectorXd mask = dual_visible_mask(map);
        const Eigen::VectorXd phi =
            mask.cwiseProduct(map.disc()->state().sample(testing::random_state(8, spec.n())));
        const Eigen::VectorXd a = mask.cwiseProduct(g.lambda * phi);
        const Eigen::VectorXd b = mask.cwiseProduct(gramian_apply(map, phi));
        int mismatched = 0;
        for (Eigen::Index j = 0; j < a.size(); ++j) {
            mismatched += std::abs(a(j) - b(j)) > 1e-8 * (1.0 + b.cwiseAbs().maxCoeff()) ? 1 : 0;
        }
        CHECK(mismatched <= 2 * spec.k());
    }
}

TEST_CASE("observability at and below the Russell time") {
    const auto spec = testing::preset("ref-k1m1");
    SUBCASE("positive and resolution stable at T = 2") {
        const auto c100 = observability_constant(assemble_gramian(ControlToStateMap(spec, 0.0, 2.0, {100})));
        const auto c200 = observability_constant(assemble_gramian(ControlToStateMap(spec, 0.0, 2.0, {200})));
        CHECK(c200.constant > 1e-6 * c200.trace / c200.dim);
        CHECK(std::abs(c200.constant - c100.constant) <= 0.2 * c100.constant);
    }
    SUBCASE("degenerate at T = 0.5") {
        const auto g = assemble_gramian(ControlToStateMap(spec, 0.0, 0.5, {100}));
        const auto c = observability_constant(g);
        CHECK(c.relative_to_trace() < 1e-10);
        CHECK(null_controllability_verdict(g, 0.0, 0.5).verdict == Verdict::degenerate);
        CHECK(null_controllability_verdict(assemble_gramian(ControlToStateMap(spec, 0.0, 2.0, {100})), 0.0, 2.0)
                  .verdict == Verdict::controllable);
    }
}

TEST_CASE("HUM control") {
    SUBCASE("zero initial state needs no control") {
        const ControlToStateMap map(testing::preset("ref-k1m1"), 0.0, 2.0, {100});
        const auto sol = hum_control(map, [](int, double) { return 0.0; });
        CHECK(sol.U.norm() == 0.0);
        CHECK(sol.residual == 0.0);
    }
    SUBCASE("k = m = 2 below the Russell time") {
        const auto spec = testing::preset("k2m2-zero");
        const ControlToStateMap map(spec, 0.0, 1.7, {100});
        const auto u0 = testing::random_state(21, spec.n());
        const auto sol = hum_control(map, u0);
        CHECK(sol.converged);
        CHECK(sol.cg_iterations <= 300);
        CHECK(sol.relative_residual() < 1e-4);
        // Independent check: evolve with the returned control.
        const Eigen::VectorXd end = map.evolve(u0, trace_function(sol.U));
        CHECK(map.state_norm(dual_visible_mask(map).cwiseProduct(end)) < 1e-4 * sol.initial_norm);
    }
}

TEST_CASE("observability constant grows with the horizon") {
    const auto spec = testing::preset("affine-k1m1");
    double prev = -1.0;
    for (double T : {1.0, 1.2, 1.4, 1.6}) {
        // Nested windows share the anchor and the step, so the Gramians are comparable.
        const auto c = observability_constant(assemble_gramian(ControlToStateMap(spec, 0.0, T, {40})));
        CHECK(c.constant >= prev - 1e-12);
        prev = c.constant;
    }
}

TEST_CASE("restricted Rayleigh quotient dominates the full one") {
    const auto spec = testing::preset("ref-k1m1");
    const ControlToStateMap map(spec, 0.0, 1.5, {40});
    const auto g = assemble_gramian(map);
    const auto full = observability_constant(g);
    Eigen::MatrixXd E(g.state_dim(), 3);
    for (int c = 0; c < 3; ++c) {
        E.col(c) = map.disc()->state().sample(testing::random_state(30 + c, 2));
    }
    const auto sub = observability_constant(g, &E);
    CHECK(sub.constant >= full.constant - 1e-12);
}

}  // TEST_SUITE
