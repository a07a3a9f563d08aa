#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "helpers.hpp"
#include "hyperctrl/broad_solver.hpp"
#include "hyperctrl/errors.hpp"

using namespace hyperctrl;
using testing::constant_system;

namespace {

const StateFn kZeroState = [](int, double) { return 0.0; };
const TraceFn kZeroTrace = [](int, double) { return 0.0; };

double slice_error(const SolutionField& f, int level, const std::function<double(int, double)>& exact, int first = 1,
                   int last = -1) {
    if (last < 0) {
        last = f.n();
    }
    double err = 0.0;
    for (int i = first; i <= last; ++i) {
        const auto& cg = f.disc().state().comp(i);
        for (int p = 0; p < cg.size(); ++p) {
            err = std::max(err, std::abs(f(i, level, p) - exact(i, cg.x(p))));
        }
    }
    return err;
}

OmegaData omega_data(const StateFn& g, const TraceFn& f = kZeroTrace) {
    OmegaData d;
    d.f = f;
    d.g = g;
    d.gamma = [](int, double, double) { return 0.0; };
    d.q = kZeroState;
    return d;
}

}  // namespace

TEST_SUITE("broad_solver") {

TEST_CASE("zero data gives the zero field") {
    const auto spec = testing::preset("k2m1-poly");
    const auto res = solve_forward(spec, kZeroState, kZeroTrace, 0.0, 1.5, {64});
    CHECK(res.field.max_abs() == 0.0);
    const auto adj = solve_adjoint(spec, kZeroState, 0.0, 1.5, {64});
    CHECK(adj.field.max_abs() == 0.0);
    const auto om = solve_omega(spec, 0.0, 1.5, omega_data(kZeroState), {64});
    CHECK(om.field.max_abs() == 0.0);
}

TEST_CASE("unit transport with a step control") {
    const auto spec = testing::transport_system(1.0);
    const TraceFn U = [](int, double t) { return t < 0.5 ? 1.0 : 0.0; };
    for (Method method : {Method::exact, Method::picard}) {
        SolveOptions o{200};
        o.method = method;
        const auto res = solve_forward(spec, kZeroState, U, 0.0, 0.5, o);
        const int last = res.field.levels() - 1;
        const auto& cg = res.field.disc().state().comp(2);
        for (int p = 0; p < cg.size(); ++p) {
            const double x = cg.x(p);
            if (std::abs(x - 0.5) > 0.02 && x < 0.98) {
                CHECK(res.field(2, last, p) == doctest::Approx(x > 0.5 ? 1.0 : 0.0));
            }
        }
        CHECK(res.field.boundary_trace(1, 0).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("incompatible corner data give the mean on the front") {
    const auto spec = testing::transport_system(0.5);
    // u0 = (1, 1) with zero control: both corners at t = 0 carry a unit jump.
    const StateFn u0 = [](int, double) { return 1.0; };
    for (Method method : {Method::exact, Method::picard}) {
        CAPTURE(static_cast<int>(method));
        SolveOptions o{100};
        o.method = method;
        const auto res = solve_forward(spec, u0, kZeroTrace, 0.0, 0.5, o);
        const auto& tg = res.field.disc().time();
        for (int l = 1; l < res.field.levels(); ++l) {
            const double t = tg.t(l);
            const auto& minus = res.field.disc().state().comp(1);
            const auto& plus = res.field.disc().state().comp(2);
            for (int p = 0; p < minus.size(); ++p) {
                if (std::abs(minus.x(p) - t) < 1e-9) {
                    // Mean of the datum 1 and the boundary value 0.5 * u_2(t, 0) = 0.5.
                    CHECK(res.field(1, l, p) == doctest::Approx(0.75));
                }
            }
            for (int p = 0; p < plus.size(); ++p) {
                if (std::abs(plus.x(p) - (1.0 - t)) < 1e-9) {
                    CHECK(res.field(2, l, p) == doctest::Approx(0.5));
                }
            }
        }
    }
}

TEST_CASE("free transport of the initial state with reflection") {
    const auto spec = testing::transport_system(0.5);
    const auto g = [](double x) { return std::sin(M_PI * x); };
    const StateFn u0 = [&](int i, double x) { return i == 2 ? g(x) : 0.0; };
    const auto res = solve_forward(spec, u0, kZeroTrace, 0.0, 1.0, {200});
    const auto& tg = res.field.disc().time();
    for (int l = 0; l < res.field.levels(); l += 20) {
        const double t = tg.t(l);
        CHECK(slice_error(res.field, l, [&](int i, double x) {
                  if (i == 2) {
                      return x + t < 1.0 ? g(x + t) : 0.0;
                  }
                  return x - t > 0.0 ? 0.0 : 0.5 * g(t - x);
              }) < 1e-12);
    }
}

TEST_CASE("exact path and Picard path against the closed-form transport solution") {
    const auto spec = testing::transport_system(1.0);
    const auto oracle = oracles::smooth_unit_transport(1.0);
    const StateFn u0 = [&](int i, double x) { return i == 1 ? oracle.g1(x) : oracle.g2(x); };
    const TraceFn U = [&](int, double t) { return oracle.U(t); };
    SolveOptions exact{200};
    exact.method = Method::exact;
    SolveOptions picard{200};
    picard.method = Method::picard;
    const auto a = solve_forward(spec, u0, U, 0.0, 2.0, exact);
    const auto b = solve_forward(spec, u0, U, 0.0, 2.0, picard);
    CHECK(oracles::max_node_error(a.field, oracle) < 1e-10);
    CHECK(oracles::max_node_error(b.field, oracle) < 5e-3);
}

TEST_CASE("backward transport of the dual system") {
    const auto spec = testing::transport_system(1.0);
    const auto phi2 = [](double x) { return std::exp(-20.0 * (x - 0.6) * (x - 0.6)); };
    const StateFn phi = [&](int i, double x) { return i == 2 ? phi2(x) : 0.0; };
    const double T = 0.5;
    const auto res = solve_adjoint(spec, phi, 0.0, T, {200});
    const auto& tg = res.field.disc().time();
    for (int l = 0; l < res.field.levels(); l += 10) {
        const double t = tg.t(l);
        const auto& cg = res.field.disc().state().comp(2);
        for (int p = 0; p < cg.size(); ++p) {
            const double x = cg.x(p);
            const double arg = x - (T - t);
            if (arg > 1e-9) {
                CHECK(std::abs(res.field(2, l, p) - phi2(arg)) < 1e-12);
            }
        }
    }
}

TEST_CASE("observation vanishes outside the backward cone") {
    const auto spec = testing::transport_system(1.0);
    // Support in (0.1, 0.3); backward characteristics from x = 1 cover only x > 0.5 in time 0.5.
    const StateFn phi = [](int, double x) {
        return x > 0.1 && x < 0.3 ? std::sin(M_PI * (x - 0.1) / 0.2) : 0.0;
    };
    const auto res = solve_adjoint(spec, phi, 0.0, 0.5, {200});
    CHECK(observation_trace(res.field).norm() < 1e-14);
    CHECK(res.field.max_abs() > 0.1);
}

TEST_CASE("Omega solve without coupling transports g and leaves the minus part at zero") {
    const auto spec = testing::preset("k2m1-zero");
    const auto g = [](int i, double x) { return std::cos(i * x) + x; };
    const auto res = solve_omega(spec, 0.0, spec.t_opt(), omega_data(g), {200});
    const auto& f = res.field;
    const auto& tg = f.disc().time();
    double minus = 0.0;
    double plus_err = 0.0;
    for (int l = 0; l < f.levels(); ++l) {
        const double t = tg.t(l);
        for (int i = 1; i <= spec.n(); ++i) {
            const auto& cg = f.disc().state().comp(i);
            for (int p = 0; p < cg.size(); ++p) {
                if (!f.active(i, l, p)) {
                    continue;
                }
                if (i <= spec.k()) {
                    minus = std::max(minus, std::abs(f(i, l, p)));
                } else {
                    const double src = cg.x(p) + spec.lambda(i, 0.0) * t;
                    if (src < 1.0) {
                        plus_err = std::max(plus_err, std::abs(f(i, l, p) - g(i, src)));
                    }
                }
            }
        }
    }
    CHECK(minus < 1e-12);
    CHECK(plus_err < 1e-12);
}

TEST_CASE("hat solution restricted to Omega equals the Omega solution") {
    const auto spec = testing::preset("k2m2-zero");
    for (unsigned seed : {1u, 2u, 3u}) {
        const auto g = testing::random_state(seed, spec.n());
        const auto data = omega_data(g);
        const auto om = solve_omega(spec, 0.0, spec.t_opt(), data, {100});
        const auto hat = solve_rectangle_hat(spec, 0.0, spec.t_opt(), data, {100});
        double diff = 0.0;
        for (int i = 1; i <= spec.n(); ++i) {
            for (int l = 0; l < om.field.levels(); ++l) {
                for (int p = 0; p < om.field.nodes(i); ++p) {
                    if (om.field.active(i, l, p)) {
                        diff = std::max(diff, std::abs(om.field(i, l, p) - hat.field(i, l, p)));
                    }
                }
            }
        }
        CHECK(diff < 1e-8);
    }
}

TEST_CASE("solvers are linear in the data") {
    const auto spec = testing::preset("affine-k1m1");
    const auto u1 = testing::random_state(4, 2);
    const auto u2 = testing::random_state(5, 2);
    const TraceFn U1 = [](int, double t) { return std::sin(3.0 * t); };
    const TraceFn U2 = [](int, double t) { return t * t; };
    const double a = 0.7, b = -1.3;
    const StateFn uc = [&](int i, double x) { return a * u1(i, x) + b * u2(i, x); };
    const TraceFn Uc = [&](int i, double t) { return a * U1(i, t) + b * U2(i, t); };
    const SolveOptions o{100};
    const auto r1 = solve_forward(spec, u1, U1, 0.0, 1.5, o);
    const auto r2 = solve_forward(spec, u2, U2, 0.0, 1.5, o);
    const auto rc = solve_forward(spec, uc, Uc, 0.0, 1.5, o);
    double err = 0.0;
    for (int i = 1; i <= 2; ++i) {
        for (std::size_t j = 0; j < rc.field.data(i).size(); ++j) {
            err = std::max(err, std::abs(rc.field.data(i)[j] - a * r1.field.data(i)[j] - b * r2.field.data(i)[j]));
        }
    }
    CHECK(err < 1e-9);
}

TEST_CASE("Picard contraction on every preset") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const auto spec = testing::preset(name);
        const auto u0 = testing::random_state(9, spec.n());
        SolveOptions o{100};
        o.method = Method::picard;
        const auto fwd = solve_forward(spec, u0, kZeroTrace, 0.0, spec.t_opt(), o);
        CHECK(fwd.report.converged);
        CHECK(fwd.report.worst_contraction() <= 0.5);
        const auto adj = solve_adjoint(spec, u0, 0.0, spec.t_opt(), o);
        CHECK(adj.report.converged);
        CHECK(adj.report.worst_contraction() <= 0.5);
    }
}

TEST_CASE("Picard limit does not depend on the starting iterate") {
    const auto spec = testing::preset("affine-k1m1");
    const auto u0 = testing::random_state(12, 2);
    const SolveOptions plain{100};
    const auto a = solve_forward(spec, u0, kZeroTrace, 0.0, 1.5, plain);
    SolutionField start(a.field.disc_ptr());
    std::mt19937 rng(3);
    std::normal_distribution<double> normal;
    for (int i = 1; i <= 2; ++i) {
        for (double& v : start.data(i)) {
            v = normal(rng);
        }
    }
    SolveOptions seeded = plain;
    seeded.initial_iterate = &start;
    const auto b = solve_forward(spec, u0, kZeroTrace, 0.0, 1.5, seeded);
    double diff = 0.0;
    for (int i = 1; i <= 2; ++i) {
        for (std::size_t j = 0; j < a.field.data(i).size(); ++j) {
            diff = std::max(diff, std::abs(a.field.data(i)[j] - b.field.data(i)[j]));
        }
    }
    CHECK(diff < 1e-10 * (1.0 + a.field.max_abs()));
}

TEST_CASE("time and space slices agree with the stored field") {
    const auto spec = testing::preset("affine-k1m1");
    const auto res = solve_forward(spec, testing::random_state(2, 2), kZeroTrace, 0.0, 1.0, {64});
    const auto& f = res.field;
    const Eigen::VectorXd s = f.time_slice(10);
    const auto& grid = f.disc().state();
    for (int i = 1; i <= 2; ++i) {
        for (int p = 0; p < grid.comp(i).size(); ++p) {
            CHECK(s(grid.offset(i) + p) == f(i, 10, p));
        }
    }
    CHECK((f.time_slice(10) - s).norm() == 0.0);
    const auto y = f.y_norm();
    CHECK(std::isfinite(y.total()));
    CHECK(y.total() > 0.0);
}

TEST_CASE("missing Q matrix is a precondition error") {
    // k = m = 2 with a singular last row block: B_22 = 0.
    Eigen::Matrix2d B;
    B << 1, 1, 1, 0;
    const auto spec = constant_system(2, 2, {2.0, 1.0, 1.0, 2.0}, B);
    CHECK_THROWS_AS(solve_omega(spec, 0.0, spec.t_opt(), omega_data(kZeroState), {32}), PreconditionError);
}

}  // TEST_SUITE
