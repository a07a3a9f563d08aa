#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hyperctrl/counterexample.hpp"
#include "hyperctrl/errors.hpp"
#include "hyperctrl/spectral.hpp"

using namespace hyperctrl;

namespace {

SpectralOptions small_options() {
    SpectralOptions o;
    o.Nx = 16;
    o.solve.N = 64;
    return o;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("K vanishes without coupling") {
    const auto spec = testing::preset("k2m1-zero");
    const auto ops = assemble_K(spec, 0.0, spec.t_opt(), small_options());
    CHECK(ops.K.rows() == spec.n() * 16);
    CHECK(ops.K.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("L window length and size") {
    const auto spec = testing::preset("k2m1-poly");
    const auto ops = assemble_L(spec, 0.0, spec.t_opt(), small_options());
    // Window (0, T - tau_{k-m+1}) with k - m + 1 = 2.
    CHECK(ops.window == doctest::Approx(spec.t_opt() - spec.tau(2)));
    CHECK(ops.L.rows() == spec.m() * ops.trace_cells);
    CHECK(ops.L.cols() == spec.n() * 16);
}

TEST_CASE("obstruction space is trivial on the shipped k >= m presets") {
    for (const char* name : {"k2m1-zero", "k2m2-zero", "k2m1-poly"}) {
        CAPTURE(name);
        const auto spec = testing::preset(name);
        for (double T : {spec.t_opt(), spec.t_opt() + 0.2}) {
            const auto H = compute_H(spec, 0.0, T, small_options());
            CHECK(H.dim() == 0);
            CHECK(H.route == HRoute::kernel_operators);
            CHECK_FALSE(H.low_confidence);
        }
    }
}

TEST_CASE("kernel of a planted operator pair") {
    // I + K = 0 on the first cell of component 1 and L blind to it: a one-dimensional kernel.
    const auto spec = testing::preset("k2m1-zero");
    auto opts = small_options();
    auto ops = assemble_operators(spec, 0.0, spec.t_opt(), opts);
    ops.K.setZero();
    ops.K(0, 0) = -1.0;
    ops.L.col(0).setZero();
    const auto H = kernel_from_operators(spec, ops, opts);
    REQUIRE(H.dim() == 1);
    CHECK(H.orthonormality_defect() < 1e-12);
    CHECK(H.certificate < 1e-10);
    CHECK(std::abs(H.vectors(0, 0)) > 0.99 / std::sqrt(H.w(0)));
}

TEST_CASE("results are deterministic") {
    const auto spec = testing::preset("k2m1-poly");
    const auto a = assemble_operators(spec, 0.1, spec.t_opt(), small_options());
    auto threaded = small_options();
    threaded.threads = 2;
    const auto b = assemble_operators(spec, 0.1, spec.t_opt(), threaded);
    CHECK((a.K - b.K).norm() == 0.0);
    CHECK((a.L - b.L).norm() == 0.0);
}

TEST_CASE("dim scan on an analytic-in-time preset") {
    const auto spec = testing::preset("k2m1-poly");
    const auto rows = dim_scan(spec, {0.0, 0.25, 0.5}, spec.t_opt() + 0.2, small_options());
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.dim == 0);
        CHECK_FALSE(r.flagged);
    }
    CHECK(dim_scan(spec, {}, spec.t_opt(), small_options()).empty());
}

TEST_CASE("attainable projection and J space are trivial when H is") {
    const auto spec = testing::preset("k2m1-zero");
    const auto opts = small_options();
    CHECK(attainable_projection(spec, 0.0, 0.1, spec.t_opt(), opts).dim() == 0);
    CHECK(j_space(spec, 0.0, 0.1, spec.t_opt(), opts).dim() == 0);
}

TEST_CASE("principal angles and containment") {
    SubspaceBasis a;
    a.w = Eigen::VectorXd::Constant(3, 1.0);
    a.comp = {1, 1, 1};
    a.x = Eigen::Vector3d(0.1, 0.5, 0.9);
    SubspaceBasis b = a;
    a.vectors = Eigen::MatrixXd::Identity(3, 1);
    b.vectors = Eigen::MatrixXd::Identity(3, 2);
    const auto angles = principal_angles(a, b);
    REQUIRE(angles.size() == 1);
    CHECK(angles(0) < 1e-12);
    CHECK(containment_defect(a, b) < 1e-12);
    CHECK(containment_defect(b, a) == doctest::Approx(1.0));
    CHECK(subspace_cosine(a, Eigen::Vector3d(2.0, 0.0, 0.0)) == doctest::Approx(1.0));
}

TEST_CASE("obstruction space of the counterexample system by the dual route") {
    const auto cx = reference_counterexample(0.1);
    const auto spec = counterexample_system(cx);
    SpectralOptions o;
    // At N = 100 the discrete witness still leaves an observation above the kernel threshold.
    o.solve.N = 200;
    o.route = HRoute::automatic;
    const auto H = compute_H(spec, 0.0, 1.9, o);
    CHECK(H.route == HRoute::dual);
    CHECK(H.dim() >= 1);
    CHECK(H.orthonormality_defect() < 1e-10);
}

}  // TEST_SUITE
