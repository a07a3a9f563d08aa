#include "hyperctrl/counterexample.hpp"

#include <algorithm>
#include <cmath>

#include "hyperctrl/controllability.hpp"
#include "hyperctrl/quadrature.hpp"

namespace hyperctrl {

namespace {

double mollifier(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

double mollifier_integral() {
    static const double value = quad::integrate(mollifier, -1.0, 1.0, 1e-15);
    return value;
}

}  // namespace

nlohmann::json CounterexampleSpec::to_json() const {
    nlohmann::json j;
    j["k"] = k;
    j["m"] = m;
    j["ell"] = ell;
    j["lambdas"] = lambdas;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < B.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(B.cols()));
        for (int c = 0; c < B.cols(); ++c) {
            row[c] = B(i, c);
        }
        rows.push_back(row);
    }
    j["B"] = rows;
    j["eps"] = eps;
    return j;
}

CounterexampleSpec CounterexampleSpec::from_json(const nlohmann::json& j) {
    CounterexampleSpec cx;
    cx.k = j.at("k").get<int>();
    cx.m = j.at("m").get<int>();
    cx.ell = j.value("ell", 2);
    cx.lambdas = j.at("lambdas").get<std::vector<double>>();
    const auto& rows = j.at("B");
    cx.B.resize(cx.k, cx.m);
    if (static_cast<int>(rows.size()) != cx.k) {
        throw ConfigError("counterexample: B must have k rows");
    }
    for (int i = 0; i < cx.k; ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != cx.m) {
            throw ConfigError("counterexample: B must have m columns");
        }
        for (int c = 0; c < cx.m; ++c) {
            cx.B(i, c) = row[c];
        }
    }
    cx.eps = j.value("eps", 0.1);
    return cx;
}

CounterexampleSpec reference_counterexample(double eps) {
    CounterexampleSpec cx;
    cx.k = 1;
    cx.m = 2;
    cx.ell = 2;
    cx.lambdas = {1.0, 1.0, 2.0};
    cx.B = Eigen::MatrixXd(1, 2);
    cx.B << 1.0, 1.0;
    cx.eps = eps;
    return cx;
}

nlohmann::json CounterexampleConstants::to_json() const {
    return {{"T", T},           {"tau_k", tau_k},       {"tau_k+1", tau_k1},   {"tau_k+l", tau_kl},
            {"T_opt", t_opt},   {"I", {I_lo, I_hi}},    {"gamma_k+1", gamma_k1}, {"gamma_k+l", gamma_kl},
            {"theta_k", theta_k}, {"theta_k+1", theta_k1}};
}

CounterexampleConstants counterexample_constants(const CounterexampleSpec& cx) {
    const int k = cx.k;
    const int m = cx.m;
    const int n = k + m;
    if (k < 1 || m < 2) {
        throw PreconditionError("counterexample needs k >= 1 and m >= 2");
    }
    if (cx.ell < 2 || cx.ell > m) {
        throw PreconditionError("counterexample needs 2 <= l <= m");
    }
    if (static_cast<int>(cx.lambdas.size()) != n) {
        throw PreconditionError("counterexample needs n = k + m speeds");
    }
    if (!check_assumption_B(cx.B, k, m, cx.ell)) {
        throw PreconditionError("B violates assumption (B): need B_k1 != 0, B_kl != 0 and B_kj = 0 otherwise");
    }
    std::vector<double> taus(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (!(cx.lambdas[i] > 0.0)) {
            throw PreconditionError("counterexample speeds must be positive");
        }
        taus[i] = 1.0 / cx.lambdas[i];
    }
    CounterexampleConstants c;
    c.tau_k = taus[k - 1];
    c.tau_k1 = taus[k];
    c.tau_kl = taus[k + cx.ell - 1];
    c.t_opt = optimal_time(taus, k, m);
    c.T = c.tau_k + c.tau_k1 - cx.eps;
    if (!(cx.eps > 0.0)) {
        throw PreconditionError("counterexample needs eps > 0");
    }
    if (c.T < c.t_opt - 1e-12) {
        throw PreconditionError("eps too large: T = tau_k + tau_{k+1} - eps = " + std::to_string(c.T) +
                                " is below T_opt = " + std::to_string(c.t_opt));
    }
    if (c.T < c.tau_k + c.tau_kl - 1e-12) {
        throw PreconditionError("eps too large: T = " + std::to_string(c.T) +
                                " is below tau_k + tau_{k+l} = " + std::to_string(c.tau_k + c.tau_kl));
    }
    c.I_lo = std::max(c.tau_kl, c.T - c.tau_k);
    c.I_hi = std::min(c.tau_k1, c.T);
    if (!(c.I_hi > c.I_lo)) {
        throw PreconditionError("interval I = (tau_{k+l}, tau_{k+1}) meets (T - tau_k, T) in an empty set");
    }
    const double lk = cx.lambdas[k - 1];
    c.gamma_k1 = lk * cx.B(k - 1, 0) / cx.lambdas[k];
    c.gamma_kl = lk * cx.B(k - 1, cx.ell - 1) / cx.lambdas[k + cx.ell - 1];
    c.theta_k = 1.0 / (c.tau_k + c.tau_kl);
    c.theta_k1 = 1.0 / (c.tau_k1 - c.tau_kl);
    return c;
}

Bump::Bump(double a, double b) : a_(a), b_(b), mid_(0.5 * (a + b)), half_(0.5 * (b - a)) {
    if (!(b > a)) {
        throw PreconditionError("bump needs a nonempty interval");
    }
    c_ = 1.0 / (half_ * mollifier_integral());
}

double Bump::operator()(double t) const { return c_ * mollifier((t - mid_) / half_); }

Bump build_bump(double a, double b) { return Bump(a, b); }

CouplingPtr build_coefficients(const CounterexampleSpec& cx) {
    const CounterexampleConstants c = counterexample_constants(cx);
    const Bump phi(c.I_lo, c.I_hi);
    const int k = cx.k;
    const int n = cx.k + cx.m;
    const int col = k + cx.ell - 1;
    const double lkl = cx.lambdas[col];
    const double a_coef = lkl * c.gamma_kl / c.theta_k;
    const double b_coef = lkl * c.gamma_kl / (c.gamma_k1 * c.theta_k1);
    const double tau_kl = c.tau_kl;
    nlohmann::json desc = {{"kind", "closed-form"}, {"id", "thm1"}, {"eps", cx.eps}, {"ell", cx.ell}};
    return function_coupling(
        n, {{k - 1, col}, {k, col}},
        [=](double t, double x, double* out) {
            std::fill(out, out + n * n, 0.0);
            const double v = phi(t + tau_kl * x);
            out[(k - 1) * n + col] = -a_coef * v;
            out[k * n + col] = -b_coef * v;
        },
        desc);
}

SystemSpec counterexample_system(const CounterexampleSpec& cx) {
    counterexample_constants(cx);
    std::vector<SpeedPtr> speeds;
    for (double l : cx.lambdas) {
        speeds.push_back(constant_speed(l));
    }
    return SystemSpec(cx.k, cx.m, std::move(speeds), cx.B, build_coefficients(cx));
}

StateFn witness_terminal_datum(const CounterexampleSpec& cx) {
    const CounterexampleConstants c = counterexample_constants(cx);
    const Bump phi(c.I_lo, c.I_hi);
    const int k = cx.k;
    return [=](int i, double x) { return i == k ? phi(c.T - c.tau_k * x) / c.gamma_kl : 0.0; };
}

nlohmann::json WitnessReport::to_json() const {
    nlohmann::json j;
    j["obs_norm"] = obs_norm;
    j["initial_norm"] = initial_norm;
    j["ratio"] = ratio();
    j["data_norm"] = data_norm;
    j["data_sup"] = data_sup;
    j["identity_defects"] = identity_defects;
    j["pass"] = pass;
    j["N"] = N;
    j["T"] = T;
    j["solver"] = solver.to_json();
    return j;
}

Witness build_dual_witness(const CounterexampleSpec& cx, const SolveOptions& opts, const WitnessTolerances& tol) {
    const CounterexampleConstants c = counterexample_constants(cx);
    const SystemSpec spec = counterexample_system(cx);
    const Bump phi(c.I_lo, c.I_hi);
    const StateFn datum = witness_terminal_datum(cx);
    const int k = cx.k;
    const int kl = k + cx.ell;
    const int n = spec.n();

    Witness w{solve_adjoint(spec, datum, 0.0, c.T, opts), {}, {}, {}};
    const SolutionField& v = w.solution.field;
    const Discretization& disc = v.disc();
    const TimeGrid& tg = disc.time();
    const Eigen::VectorXd wt = tg.weights();
    const Eigen::VectorXd wx = disc.state().weights();

    WitnessReport& rep = w.report;
    rep.N = opts.N;
    rep.T = c.T;
    rep.solver = w.solution.report;
    w.initial_state = v.time_slice(0);
    w.terminal_state = v.time_slice(tg.Nt);
    rep.initial_norm = std::sqrt((wx.array() * w.initial_state.array().square()).sum());
    rep.data_norm = std::sqrt((wx.array() * w.terminal_state.array().square()).sum());
    rep.data_sup = w.terminal_state.cwiseAbs().maxCoeff();

    auto trace_l2 = [&](int i, int side) {
        const Eigen::VectorXd tr = v.boundary_trace(i, side);
        return std::sqrt((wt.array() * tr.array().square()).sum());
    };
    double obs2 = 0.0;
    for (int i = k + 1; i <= n; ++i) {
        const double a = trace_l2(i, 1);
        obs2 += a * a;
    }
    rep.obs_norm = std::sqrt(obs2);

    const Eigen::VectorXd vk0 = v.boundary_trace(k, 0);
    const Eigen::VectorXd vk10 = v.boundary_trace(k + 1, 0);
    const Eigen::VectorXd vkl0 = v.boundary_trace(kl, 0);
    const double sup = rep.data_sup > 0.0 ? rep.data_sup : 1.0;
    const double l2 = rep.data_norm > 0.0 ? rep.data_norm : 1.0;

    double vvv = 0.0;
    double vk = 0.0;
    for (int l = 0; l < tg.levels(); ++l) {
        vvv = std::max(vvv, std::abs(vk10(l) - c.gamma_k1 * vk0(l)));
        vvv = std::max(vvv, std::abs(vkl0(l) - c.gamma_kl * vk0(l)));
        vk = std::max(vk, std::abs(vk0(l) - phi(tg.t(l)) / c.gamma_kl));
    }
    rep.identity_defects["boundary_ratios"] = vvv / sup;
    rep.identity_defects["vk_trace"] = vk / sup;

    // v_{k+l}(t, 0) = phi(t) (int_{tau_{k+l}}^t + int_t^{tau_{k+1}}) v_{k+l}(s, 0) ds on (tau_{k+l}, tau_{k+1}).
    std::vector<double> cumulative(static_cast<std::size_t>(tg.levels()), 0.0);
    for (int l = 1; l < tg.levels(); ++l) {
        cumulative[l] = cumulative[l - 1] + 0.5 * tg.dt * (vkl0(l - 1) + vkl0(l));
    }
    auto primitive = [&](double t) {
        const double r = std::clamp((t - tg.t0) / tg.dt, 0.0, static_cast<double>(tg.Nt));
        const int a = std::min(static_cast<int>(r), tg.Nt - 1);
        const double th = r - a;
        const double va = vkl0(a);
        const double vb = vkl0(a + 1);
        return cumulative[a] + tg.dt * (th * va + 0.5 * th * th * (vb - va));
    };
    const double p_lo = primitive(c.tau_kl);
    const double p_hi = primitive(c.tau_k1);
    double v4 = 0.0;
    for (int l = 0; l < tg.levels(); ++l) {
        const double t = tg.t(l);
        if (t <= c.tau_kl || t >= c.tau_k1) {
            continue;
        }
        const double left = cumulative[l] - p_lo;
        const double right = p_hi - cumulative[l];
        v4 = std::max(v4, std::abs(vkl0(l) - phi(t) * left - phi(t) * right));
    }
    rep.identity_defects["integral_identity"] = v4 / sup;
    rep.identity_defects["observation_k_plus_ell"] = trace_l2(kl, 1) / l2;
    rep.identity_defects["observation_k_plus_1"] = trace_l2(k + 1, 1) / l2;
    double others = 0.0;
    for (int j = k + 2; j <= n; ++j) {
        if (j != kl) {
            others = std::max(others, trace_l2(j, 1) / l2);
        }
    }
    rep.identity_defects["observation_other"] = others;
    double init = 0.0;
    const auto& g1 = disc.state().comp(k + 1);
    for (int p = 0; p < g1.size(); ++p) {
        const double expected = c.gamma_k1 / c.gamma_kl * phi(c.tau_k1 * g1.x(p));
        init = std::max(init, std::abs(v(k + 1, 0, p) - expected));
    }
    rep.identity_defects["initial_v_k_plus_1"] = init / sup;

    rep.pass = rep.obs_norm <= tol.obs_absolute + tol.obs_relative * rep.initial_norm &&
               rep.initial_norm > tol.initial_floor;
    if (tol.strict) {
        for (const char* name : {"boundary_ratios", "vk_trace", "integral_identity"}) {
            const double d = rep.identity_defects.at(name);
            if (!(d <= tol.identity)) {
                throw ConstructionError(std::string("witness identity ") + name + " fails: defect " +
                                        std::to_string(d) + " > " + std::to_string(tol.identity));
            }
        }
    }
    return w;
}

std::vector<ScanRow> observability_failure_scan(const CounterexampleSpec& cx, const std::vector<double>& eps_list,
                                                const SolveOptions& opts, int gramian_N) {
    std::vector<ScanRow> rows;
    for (double eps : eps_list) {
        CounterexampleSpec cur = cx;
        cur.eps = eps;
        ScanRow row;
        row.eps = eps;
        WitnessTolerances tol;
        tol.strict = false;
        const Witness w = build_dual_witness(cur, opts, tol);
        row.T = w.report.T;
        row.ratio = w.report.ratio();
        row.witness_pass = w.report.pass;
        if (gramian_N > 0) {
            SolveOptions g = opts;
            g.N = gramian_N;
            const VerdictReport vr = null_controllability_verdict(counterexample_system(cur), 0.0, row.T, g);
            row.constant = vr.constant;
            row.constant_over_trace = vr.trace > 0.0 ? vr.constant / vr.trace : 0.0;
            row.verdict = to_string(vr.verdict);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace hyperctrl
