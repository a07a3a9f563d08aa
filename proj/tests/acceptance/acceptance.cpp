// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "hyperctrl/broad_solver.hpp"
#include "hyperctrl/config.hpp"
#include "hyperctrl/controllability.hpp"
#include "hyperctrl/counterexample.hpp"
#include "hyperctrl/duality.hpp"
#include "hyperctrl/spectral.hpp"

using namespace hyperctrl;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (detail.tellp() > 0) {
            detail << "; ";
        }
        detail << what << (ok ? "" : " [miss]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string sci(double v) { return fmt("%.3g", v); }

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

private:
    using Clock = std::chrono::steady_clock;
    Clock::time_point start_ = Clock::now();
};

const TraceFn kZeroTrace = [](int, double) { return 0.0; };

TraceFn random_trace(unsigned seed, int n, double T) {
    const auto s = testing::random_state(seed, n, 3);
    return [s, T](int i, double t) { return s(i, t / T); };
}

double max_diff_on_active(const SolutionField& a, const SolutionField& b) {
    double diff = 0.0;
    for (int i = 1; i <= a.n(); ++i) {
        for (int l = 0; l < a.levels(); ++l) {
            for (int p = 0; p < a.nodes(i); ++p) {
                if (a.active(i, l, p)) {
                    diff = std::max(diff, std::abs(a(i, l, p) - b(i, l, p)));
                }
            }
        }
    }
    return diff;
}

// 1. Closed-form transport against the exact path and the Picard path.
void transport_exactness(Outcome& out) {
    Stopwatch clock;
    const auto spec = testing::transport_system(1.0);
    const auto oracle = oracles::smooth_unit_transport(1.0);
    const StateFn u0 = [&](int i, double x) { return i == 1 ? oracle.g1(x) : oracle.g2(x); };
    const TraceFn U = [&](int, double t) { return oracle.U(t); };
    SolveOptions exact{200};
    exact.method = Method::exact;
    SolveOptions picard{200};
    picard.method = Method::picard;
    const double e_exact = oracles::max_node_error(solve_forward(spec, u0, U, 0.0, 2.0, exact).field, oracle);
    const double e_picard = oracles::max_node_error(solve_forward(spec, u0, U, 0.0, 2.0, picard).field, oracle);
    const double secs = clock.seconds();
    out.require(e_exact < 1e-10, "exact path error " + sci(e_exact) + " < 1e-10");
    out.require(e_picard < 5e-3, "Picard path error " + sci(e_picard) + " < 5e-3");
    out.require(secs < 5.0, "runtime " + fmt("%.2f", secs) + " s < 5 s");
}

// 2. Pairing and adjoint identity at N = 400, and first-order decay of the defect.
void duality(Outcome& out) {
    for (const char* name : {"ref-k1m1", "k2m1-poly", "affine-k1m1"}) {
        Stopwatch clock;
        const auto spec = testing::preset(name);
        const double T = spec.t_opt() + 0.2;
        const ControlToStateMap map(spec, 0.0, T, {400});
        double worst_pairing = 0.0;
        double worst_identity = 0.0;
        for (unsigned seed = 1; seed <= 10; ++seed) {
            const auto u0 = testing::random_state(100 + seed, spec.n());
            const auto phi = testing::random_state(200 + seed, spec.n());
            const auto U = random_trace(300 + seed, spec.n(), T);
            worst_pairing = std::max(
                worst_pairing, pairing_check(map, u0, kZeroTrace, phi, PairingMode::controlled_u).relative());
            worst_identity = std::max(worst_identity, adjoint_identity(map, U, phi).relative());
        }
        const double secs = clock.seconds();
        out.require(worst_pairing < 1e-3, std::string(name) + " pairing " + sci(worst_pairing) + " < 1e-3");
        out.require(worst_identity < 1e-3, std::string(name) + " identity " + sci(worst_identity) + " < 1e-3");
        out.require(secs < 30.0, std::string(name) + " runtime " + fmt("%.1f", secs) + " s < 30 s");
    }
    // Decay check on a system whose travel times are not multiples of the step.
    const auto spec = testing::preset("affine-k1m1");
    const double T = spec.t_opt() + 0.2;
    const auto U = random_trace(7, spec.n(), T);
    const auto phi = testing::random_state(8, spec.n());
    const auto u0 = testing::random_state(9, spec.n());
    double prev_identity = 0.0;
    double prev_pairing = 0.0;
    for (int N : {200, 400}) {
        const ControlToStateMap map(spec, 0.0, T, {N});
        const double identity = adjoint_identity(map, U, phi).relative();
        const double pairing = pairing_check(map, u0, kZeroTrace, phi, PairingMode::controlled_u).relative();
        if (prev_identity > 0.0) {
            const double ri = identity / prev_identity;
            const double rp = pairing / prev_pairing;
            out.require(ri <= 0.65, "identity defect ratio N=400/200 " + fmt("%.3f", ri) + " <= 0.65");
            out.require(rp <= 0.65, "pairing defect ratio N=400/200 " + fmt("%.3f", rp) + " <= 0.65");
        }
        prev_identity = identity;
        prev_pairing = pairing;
    }
}

// 3. Travel times and the optimal time formula on the worked values.
void optimal_time_formulas(Outcome& out) {
    const double t1 = travel_time(*constant_speed(1.0));
    const double t2 = travel_time(*constant_speed(2.0));
    const double t3 = travel_time(*affine_speed(1.0, 1.0));
    out.require(std::abs(t1 - 1.0) < 1e-12 && std::abs(t2 - 0.5) < 1e-12 && std::abs(t3 - std::log(2.0)) < 1e-12,
                "tau values 1, 0.5, ln 2");
    const double a = optimal_time({1.0, 1.0}, 1, 1);
    const double b = optimal_time({1.0, 1.0, 0.5}, 1, 2);
    const double c = optimal_time({1.0, 0.8, 0.5}, 2, 1);
    out.require(std::abs(a - 2.0) < 1e-12, "T_opt(k=m=1) = " + fmt("%.15g", a));
    out.require(std::abs(b - 1.5) < 1e-12, "T_opt(k=1,m=2) = " + fmt("%.15g", b));
    out.require(std::abs(c - 1.3) < 1e-12, "T_opt(k=2,m=1) = " + fmt("%.15g", c));
    const auto spec = testing::constant_system(1, 2, {1.0, 1.0, 2.0}, Eigen::RowVector2d(1.0, 1.0));
    out.require(std::abs(spec.t_opt() - 1.5) < 1e-12, "SystemSpec T_opt(1, 1, 2) = " + fmt("%.15g", spec.t_opt()));
}

// 4. HUM at the Russell time on the reference system.
void russell_controllability(Outcome& out) {
    Stopwatch clock;
    const auto spec = testing::preset("ref-k1m1");
    const ControlToStateMap map(spec, 0.0, 2.0, {200});
    double worst = 0.0;
    int iterations = 0;
    bool converged = true;
    for (unsigned seed = 1; seed <= 5; ++seed) {
        const auto sol = hum_control(map, testing::random_state(400 + seed, spec.n()));
        worst = std::max(worst, sol.relative_residual());
        iterations = std::max(iterations, sol.cg_iterations);
        converged = converged && sol.converged;
    }
    const double secs = clock.seconds();
    out.require(worst < 1e-4, "residual / ||u0|| " + sci(worst) + " < 1e-4");
    out.require(converged && iterations <= 300, "CG iterations " + std::to_string(iterations) + " <= 300");
    out.require(secs < 120.0, "runtime " + fmt("%.1f", secs) + " s < 120 s");
}

// 5. The counterexample: dual witness at N = 800 and the Gramian on both sides of the Russell time.
void counterexample(Outcome& out) {
    Stopwatch clock;
    const auto cx = reference_counterexample(0.1);
    WitnessTolerances tol;
    tol.strict = false;
    const auto w = build_dual_witness(cx, {800}, tol);
    const auto& r = w.report;
    out.require(r.pass && r.ratio() < 1e-6, "witness obs/initial " + sci(r.ratio()) + " < 1e-6");
    for (const char* key : {"boundary_ratios", "integral_identity", "observation_k_plus_ell"}) {
        const double d = r.identity_defects.at(key);
        out.require(d < 1e-8, std::string(key) + " " + sci(d) + " < 1e-8");
    }
    const auto spec = counterexample_system(cx);
    const auto below = observability_constant(assemble_gramian(ControlToStateMap(spec, 0.0, 1.9, {200})));
    const auto above = observability_constant(assemble_gramian(ControlToStateMap(spec, 0.0, 2.1, {200})));
    out.require(below.relative_to_trace() < 1e-8, "T=1.9 constant/trace " + sci(below.relative_to_trace()) + " < 1e-8");
    out.require(above.relative_to_mean() > 1e-6,
                "T=2.1 constant*dim/trace " + sci(above.relative_to_mean()) + " > 1e-6");
    const double secs = clock.seconds();
    out.require(secs < 600.0, "runtime " + fmt("%.1f", secs) + " s < 600 s");
}

// 6. Omega versus hat solutions, and Picard contraction on every preset.
void well_posedness(Outcome& out) {
    double worst = 0.0;
    int sets = 0;
    for (const char* name : {"k2m1-zero", "k2m2-zero"}) {
        const auto spec = testing::preset(name);
        const double T = spec.t_opt();
        for (unsigned seed = 1; seed <= 5; ++seed, ++sets) {
            OmegaData data;
            data.f = random_trace(500 + seed, spec.n(), T);
            data.g = testing::random_state(600 + seed, spec.n());
            data.gamma = [](int, double, double) { return 0.0; };
            data.q = [](int, double) { return 0.0; };
            const auto om = solve_omega(spec, 0.0, T, data, {200});
            const auto hat = solve_rectangle_hat(spec, 0.0, T, data, {200});
            worst = std::max(worst, max_diff_on_active(om.field, hat.field) / std::max(1.0, om.field.max_abs()));
        }
    }
    out.require(worst < 1e-8, std::to_string(sets) + " data sets, Omega vs hat " + sci(worst) + " < 1e-8");

    double contraction = 0.0;
    for (const auto& name : preset_names()) {
        const auto spec = testing::preset(name);
        const auto u0 = testing::random_state(700, spec.n());
        SolveOptions o{200};
        o.method = Method::picard;
        const double T = spec.t_opt();
        contraction = std::max(contraction, solve_forward(spec, u0, kZeroTrace, 0.0, T, o).report.worst_contraction());
        contraction = std::max(contraction, solve_adjoint(spec, u0, 0.0, T, o).report.worst_contraction());
        if (spec.k() >= spec.m()) {
            OmegaData data;
            data.f = random_trace(701, spec.n(), T);
            data.g = u0;
            data.gamma = [](int, double, double) { return 0.0; };
            data.q = [](int, double) { return 0.0; };
            contraction = std::max(contraction, solve_omega(spec, 0.0, T, data, o).report.worst_contraction());
        }
    }
    out.require(contraction <= 0.5, "worst Picard contraction over presets " + sci(contraction) + " <= 0.5");
}

// 7. Obstruction space: trivial without coupling, nontrivial for the counterexample, trivial for analytic C.
void obstruction_space(Outcome& out) {
    SpectralOptions o;
    int nonzero = 0;
    for (const char* name : {"ref-k1m1", "k2m1-zero", "k2m2-zero"}) {
        const auto spec = testing::preset(name);
        for (double T : {spec.t_opt(), spec.t_opt() + 0.2}) {
            nonzero += compute_H(spec, 0.0, T, o).dim() != 0 ? 1 : 0;
        }
    }
    out.require(nonzero == 0, "C=0 presets with dim H > 0: " + std::to_string(nonzero));

    const auto cx = reference_counterexample(0.1);
    SpectralOptions dual = o;
    dual.solve.N = 200;
    const auto H = compute_H(counterexample_system(cx), 0.0, 1.9, dual);
    WitnessTolerances tol;
    tol.strict = false;
    const auto w = build_dual_witness(cx, {200}, tol);
    const double cosine =
        H.dim() > 0 ? subspace_cosine(H, to_basis_points(H, w.solution.field.disc(), w.initial_state)) : 0.0;
    out.require(H.dim() >= 1, "counterexample dim H(0, 1.9) = " + std::to_string(H.dim()) + " >= 1");
    out.require(cosine > 0.9, "witness cosine " + fmt("%.5f", cosine) + " > 0.9");

    const auto poly = testing::preset("k2m1-poly");
    const auto rows = dim_scan(poly, {0.0, 0.25, 0.5, 0.75, 1.0}, poly.t_opt() + 0.2, o);
    int max_dim = 0;
    for (const auto& row : rows) {
        max_dim = std::max(max_dim, row.dim);
    }
    out.require(max_dim == 0, "k2m1-poly max dim H over 5 anchors = " + std::to_string(max_dim));
}

// 8. Monotone observability constant and nested J spaces.
void monotonicity(Outcome& out) {
    for (const char* name : {"ref-k1m1", "thm1-ref"}) {
        const auto spec = testing::preset(name);
        std::vector<double> constants;
        for (double T : {1.0, 1.25, 1.5, 1.75, 2.0}) {
            constants.push_back(observability_constant(assemble_gramian(ControlToStateMap(spec, 0.0, T, {100}))).constant);
        }
        int violations = 0;
        for (std::size_t i = 1; i < constants.size(); ++i) {
            violations += constants[i] < constants[i - 1] - 1e-12 ? 1 : 0;
        }
        out.require(violations == 0, std::string(name) + " 5-point T scan, violations " + std::to_string(violations));
    }
    const auto spec = counterexample_system(reference_counterexample(0.1));
    SpectralOptions o;
    o.solve.N = 200;
    const auto H0 = compute_H(spec, 0.0, 1.9, o);
    const auto Ja = j_space(spec, 0.0, 0.05, H0, compute_H(spec, 0.05, 1.9, o), o);
    const auto Jb = j_space(spec, 0.0, 0.1, H0, compute_H(spec, 0.1, 1.9, o), o);
    const auto angles = principal_angles(Ja, Jb);
    const double largest = angles.size() > 0 ? angles.maxCoeff() : 0.0;
    const bool contained = Ja.dim() <= Jb.dim() && static_cast<int>(angles.size()) == Ja.dim();
    out.require(contained && largest < 1e-6, "J(0,0.05) in J(0,0.1): dims " + std::to_string(Ja.dim()) + ", " +
                                                 std::to_string(Jb.dim()) + ", largest angle " + sci(largest) +
                                                 " < 1e-6");
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
        {"transport exactness", transport_exactness},
        {"duality pairing and adjoint identity", duality},
        {"optimal time formulas", optimal_time_formulas},
        {"Russell-time controllability", russell_controllability},
        {"counterexample reproduction", counterexample},
        {"well-posedness on Omega", well_posedness},
        {"obstruction space", obstruction_space},
        {"monotonicity", monotonicity},
    };
    int failed = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        Outcome out;
        Stopwatch clock;
        try {
            criteria[c].second(out);
        } catch (const std::exception& e) {
            out.require(false, std::string("exception: ") + e.what());
        }
        failed += out.pass ? 0 : 1;
        std::printf("%s %zu %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", c + 1, criteria[c].first, clock.seconds(),
                    out.detail.str().c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
