#include "hyperctrl/broad_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "engine.hpp"
#include "hyperctrl/quadrature.hpp"

namespace hyperctrl {

namespace {

constexpr double kLineTol = 1e-9;

using detail::BoundaryRule;
using detail::EngineInput;
using detail::Subset;

double row_gain(const Eigen::MatrixXd& M) {
    return M.rows() == 0 ? 0.0 : M.cwiseAbs().rowwise().sum().maxCoeff();
}

/** @brief u_-(t, 0) = B u_+(t, 0). */
class ForwardRule : public BoundaryRule {
public:
    explicit ForwardRule(const SystemSpec& spec) : k_(spec.k()), m_(spec.m()), B_(spec.B()) {}
    bool fed(int i, int) const override { return i <= k_; }
    void apply(int, double* v) const override {
        for (int i = 0; i < k_; ++i) {
            double s = 0.0;
            for (int q = 0; q < m_; ++q) {
                s += B_(i, q) * v[k_ + q];
            }
            v[i] = s;
        }
    }
    double gain() const override { return row_gain(B_); }

private:
    int k_;
    int m_;
    Eigen::MatrixXd B_;
};

/** @brief v_+q(t, 0) = (1 / lambda_{k+q}(0)) sum_i B_iq lambda_i(0) v_i(t, 0). */
class AdjointRule : public BoundaryRule {
public:
    explicit AdjointRule(const SystemSpec& spec) : k_(spec.k()), m_(spec.m()), M_(spec.m(), spec.k()) {
        for (int q = 0; q < m_; ++q) {
            for (int i = 0; i < k_; ++i) {
                M_(q, i) = spec.B()(i, q) * spec.lambda(i + 1, 0.0) / spec.lambda(k_ + q + 1, 0.0);
            }
        }
    }
    bool fed(int i, int) const override { return i > k_; }
    void apply(int, double* v) const override {
        for (int q = 0; q < m_; ++q) {
            double s = 0.0;
            for (int i = 0; i < k_; ++i) {
                s += M_(q, i) * v[i];
            }
            v[k_ + q] = s;
        }
    }
    double gain() const override { return row_gain(M_); }

private:
    int k_;
    int m_;
    Eigen::MatrixXd M_;
};

/** @brief Staggered dual boundary conditions: v_l..v_k at x = 0 from Q_l once t > T - tau_l. */
class OmegaRule : public BoundaryRule {
public:
    OmegaRule(const SystemSpec& spec, double T, const TimeGrid& grid)
        : spec_(spec), k_(spec.k()), m_(spec.m()), first_(spec.k() - spec.m() + 1), T_(T), grid_(grid) {
        for (int l = first_; l <= k_; ++l) {
            Q_.push_back(q_matrix(spec, l));
        }
    }
    bool fed(int i, int level) const override {
        return i >= first_ && i <= k_ && grid_.t(level) > T_ - spec_.tau(i) + kLineTol;
    }
    void apply(int level, double* v) const override {
        int l = 0;
        for (int i = first_; i <= k_; ++i) {
            if (fed(i, level)) {
                l = i;
                break;
            }
        }
        if (l == 0) {
            return;
        }
        const Eigen::MatrixXd& Q = Q_[static_cast<std::size_t>(l - first_)];
        const int r = k_ - l + 1;
        Eigen::VectorXd in(l - 1 + r);
        for (int i = 1; i < l; ++i) {
            in(i - 1) = v[i - 1];
        }
        for (int s = 0; s < r; ++s) {
            in(l - 1 + s) = v[m_ + l - 1 + s];
        }
        const Eigen::VectorXd out = Q * in;
        for (int s = 0; s < r; ++s) {
            v[l - 1 + s] = out(s);
        }
    }
    double gain() const override {
        double g = 0.0;
        for (const auto& Q : Q_) {
            g = std::max(g, row_gain(Q));
        }
        return g;
    }

private:
    const SystemSpec& spec_;
    int k_;
    int m_;
    int first_;
    double T_;
    TimeGrid grid_;
    std::vector<Eigen::MatrixXd> Q_;
};

/**
 * @brief Phi(x) = int_0^x 1 / (lambda_j(s) + sign * eps).
 *
 * With sign = -1 eps is at most half the gap to the next slower minus speed, so the
 * weight direction separates component j from j + 1; with sign = +1 it separates j
 * from the faster component j - 1.
 */
std::function<double(double)> make_phi(const SystemSpec& spec, int j, int sign) {
    double lam_min = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    const int other = sign < 0 ? j + 1 : j - 1;
    const bool has_other = other >= 1 && other <= spec.k();
    for (int s = 0; s <= 256; ++s) {
        const double x = s / 256.0;
        lam_min = std::min(lam_min, spec.lambda(j, x));
        if (has_other) {
            gap = std::min(gap, std::abs(spec.lambda(j, x) - spec.lambda(other, x)));
        }
    }
    const double eps = std::min(lam_min / 4.0, has_other ? gap / 2.0 : lam_min / 4.0);
    const double shift = sign * eps;
    if (spec.speed(j).is_constant()) {
        const double rate = 1.0 / (spec.lambda(j, 0.0) + shift);
        return [rate](double x) { return rate * x; };
    }
    constexpr int kCells = 1024;
    auto table = std::make_shared<std::vector<double>>(kCells + 1, 0.0);
    const SpeedPtr speed = spec.speed_ptr(j);
    auto integrand = [speed, shift](double x) { return 1.0 / (speed->value(x) + shift); };
    for (int s = 1; s <= kCells; ++s) {
        (*table)[s] = (*table)[s - 1] + quad::integrate(integrand, (s - 1.0) / kCells, static_cast<double>(s) / kCells);
    }
    return [table](double x) {
        const double r = std::clamp(x, 0.0, 1.0) * kCells;
        const int a = std::min(static_cast<int>(r), kCells - 1);
        const double th = r - a;
        return (1.0 - th) * (*table)[a] + th * (*table)[a + 1];
    };
}

bool exact_applicable(const SystemSpec& spec) {
    return spec.coupling().is_zero() && spec.constant_speeds();
}

bool use_exact(const SystemSpec& spec, const SolveOptions& opts) {
    if (opts.method == Method::picard) {
        return false;
    }
    if (opts.method == Method::exact && !exact_applicable(spec)) {
        throw PreconditionError("exact characteristic tracing needs C = 0 and constant speeds");
    }
    return exact_applicable(spec);
}

PicardReport exact_report() {
    PicardReport r;
    r.label = "exact";
    r.iterations = 1;
    r.converged = true;
    r.differences.push_back(0.0);
    return r;
}

std::vector<std::vector<std::int8_t>> uniform_direction(const Discretization& disc, std::int8_t d) {
    const int n = disc.spec().n();
    std::vector<std::vector<std::int8_t>> out(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        out[i - 1].assign(static_cast<std::size_t>(disc.time().levels()) * disc.state().comp(i).size(), d);
    }
    return out;
}

void check_window(const TimeGrid& grid, const char* what) {
    if (grid.Nt < 1) {
        throw ConfigError(std::string(what) + ": empty time window");
    }
}

/** @brief Exact broad solution of the forward problem for C = 0 and constant speeds. */
void exact_forward(const Discretization& disc, const StateFn& u0, const TraceFn& U, SolutionField& u) {
    const SystemSpec& spec = disc.spec();
    const int k = spec.k();
    const int n = spec.n();
    const double t0 = disc.time().t0;
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        lam[i - 1] = spec.lambda(i, 0.0);
    }
    auto plus = [&](int i, double t, double x) {
        const double tb = t - (1.0 - x) / lam[i - 1];
        const double datum = u0 ? u0(i, std::min(1.0, x + lam[i - 1] * (t - t0))) : 0.0;
        const double control = U ? U(i, std::max(t0, tb)) : 0.0;
        if (std::abs(tb - t0) <= 1e-12) {
            return 0.5 * (control + datum);
        }
        return tb > t0 ? control : datum;
    };
    for (int i = 1; i <= n; ++i) {
        const auto& g = disc.state().comp(i);
        for (int l = 0; l < u.levels(); ++l) {
            const double t = disc.time().t(l);
            for (int p = 0; p < g.size(); ++p) {
                const double x = g.x(p);
                if (l == 0) {
                    u(i, l, p) = u0 ? u0(i, x) : 0.0;
                    continue;
                }
                if (i > k) {
                    u(i, l, p) = plus(i, t, x);
                    continue;
                }
                const double tb = t - x / lam[i - 1];
                if (tb >= t0 - 1e-12) {
                    double s = 0.0;
                    for (int q = 1; q <= spec.m(); ++q) {
                        s += spec.B()(i - 1, q - 1) * plus(k + q, tb, 0.0);
                    }
                    u(i, l, p) = std::abs(tb - t0) <= 1e-12 ? 0.5 * (s + (u0 ? u0(i, 0.0) : 0.0)) : s;
                } else {
                    u(i, l, p) = u0 ? u0(i, x - lam[i - 1] * (t - t0)) : 0.0;
                }
            }
        }
    }
}

/** @brief Exact backward solution of the dual problem for C = 0 and constant speeds. */
void exact_adjoint(const Discretization& disc, const StateFn& phi, SolutionField& v) {
    const SystemSpec& spec = disc.spec();
    const int k = spec.k();
    const int n = spec.n();
    const double t1 = disc.time().t1();
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        lam[i - 1] = spec.lambda(i, 0.0);
    }
    auto minus = [&](int i, double t, double x) {
        const double tf = t + (1.0 - x) / lam[i - 1];
        const double datum = phi ? phi(i, std::min(1.0, x + lam[i - 1] * (t1 - t))) : 0.0;
        if (std::abs(tf - t1) <= 1e-12) {
            return 0.5 * datum;
        }
        return tf < t1 ? 0.0 : datum;
    };
    for (int i = 1; i <= n; ++i) {
        const auto& g = disc.state().comp(i);
        for (int l = 0; l < v.levels(); ++l) {
            const double t = disc.time().t(l);
            for (int p = 0; p < g.size(); ++p) {
                const double x = g.x(p);
                if (l == v.levels() - 1) {
                    v(i, l, p) = phi ? phi(i, x) : 0.0;
                    continue;
                }
                if (i <= k) {
                    v(i, l, p) = minus(i, t, x);
                    continue;
                }
                const double tf = t + x / lam[i - 1];
                if (tf <= t1 + 1e-12) {
                    double s = 0.0;
                    for (int j = 1; j <= k; ++j) {
                        s += spec.B()(j - 1, i - k - 1) * lam[j - 1] * minus(j, tf, 0.0);
                    }
                    s /= lam[i - 1];
                    v(i, l, p) = std::abs(tf - t1) <= 1e-12 ? 0.5 * (s + (phi ? phi(i, 0.0) : 0.0)) : s;
                } else {
                    v(i, l, p) = phi ? phi(i, x - lam[i - 1] * (t1 - t)) : 0.0;
                }
            }
        }
    }
}

/** @brief Line of the characteristic of minus component j through (x, t) = (1, T): T - tau_j + y_j(x). */
double char_line(const Discretization& disc, double T, int j, double x) {
    return T - disc.spec().tau(j) + disc.flow().travel(j).y(x);
}

enum class StaggeredDomain { omega, rectangle };

SolveResult solve_staggered(DiscretizationPtr disc, double tau, const OmegaData& data, const SolveOptions& opts,
                            StaggeredDomain domain) {
    const SystemSpec& spec = disc->spec();
    const int k = spec.k();
    const int m = spec.m();
    if (k < m) {
        throw PreconditionError("the Omega problem needs k >= m (got k = " + std::to_string(k) +
                                ", m = " + std::to_string(m) + ")");
    }
    const TimeGrid& grid = disc->time();
    check_window(grid, "solve_omega");
    const double T = grid.t1();
    const int first = k - m + 1;
    if (T < spec.tau(first) - kLineTol) {
        throw DomainError("T = " + std::to_string(T) + " is shorter than tau_" + std::to_string(first) + " = " +
                          std::to_string(spec.tau(first)));
    }
    if (opts.method == Method::exact) {
        throw PreconditionError("exact tracing is only available for the forward and adjoint problems");
    }
    const OmegaRule rule(spec, T, grid);
    const int n = spec.n();
    const int levels = grid.levels();

    EngineInput in;
    in.disc = disc;
    in.dual = true;
    in.shift = tau;
    in.rule = &rule;
    in.tolerance = opts.tolerance;
    in.max_iterations = opts.max_iterations;
    in.initial_iterate = opts.initial_iterate;
    in.direction.resize(static_cast<std::size_t>(n));
    in.region.resize(static_cast<std::size_t>(n));
    std::vector<std::vector<std::uint8_t>> active(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        const auto& g = disc->state().comp(i);
        const std::size_t sz = static_cast<std::size_t>(levels) * g.size();
        in.direction[i - 1].assign(sz, -1);
        in.region[i - 1].assign(sz, -1);
        active[i - 1].assign(sz, 0);
        std::vector<std::vector<double>> lines(static_cast<std::size_t>(k + 1));
        for (int j = first; j <= k; ++j) {
            lines[j].resize(g.size());
            for (int p = 0; p < g.size(); ++p) {
                lines[j][p] = char_line(*disc, T, j, g.x(p));
            }
        }
        for (int l = 0; l < levels; ++l) {
            const double t = grid.t(l);
            for (int p = 0; p < g.size(); ++p) {
                const std::size_t idx = static_cast<std::size_t>(l) * g.size() + p;
                int reg = -1;
                if (t <= lines[k][p] + kLineTol) {
                    reg = 0;
                } else {
                    for (int ell = k - 1; ell >= first; --ell) {
                        if (t <= lines[ell][p] + kLineTol) {
                            reg = k - ell;
                            break;
                        }
                    }
                }
                if (reg < 0 && domain == StaggeredDomain::rectangle) {
                    reg = m;
                }
                if (reg < 0) {
                    continue;
                }
                in.region[i - 1][idx] = static_cast<std::int8_t>(reg);
                active[i - 1][idx] = 1;
                std::int8_t d = -1;
                if (i <= k) {
                    d = (i < first || t <= lines[i][p] + kLineTol) ? 1 : -1;
                }
                in.direction[i - 1][idx] = d;
            }
        }
    }
    in.subsets.push_back({"Omega_" + std::to_string(k), [](double, double x) { return x; }});
    for (int ell = k - 1; ell >= first; --ell) {
        auto phi = make_phi(spec, ell, -1);
        in.subsets.push_back({"Omega_" + std::to_string(ell), [phi](double t, double x) { return -t + phi(x); }});
    }
    if (domain == StaggeredDomain::rectangle) {
        auto phi = make_phi(spec, first, +1);
        in.subsets.push_back({"complement", [phi](double t, double x) { return -t + phi(x); }});
    }
    const OmegaData d = data;
    in.time_lo = [d, k](int i, double x) { return (i > k && d.g) ? d.g(i, x) : 0.0; };
    in.time_hi = [d, first](int i, double x) { return (i < first && d.q) ? d.q(i, x) : 0.0; };
    in.x1 = [d](int i, double t) { return d.f ? d.f(i, t) : 0.0; };
    if (data.gamma) {
        in.source = data.gamma;
    }

    SolutionField w(disc, domain == StaggeredDomain::omega ? DomainKind::omega : DomainKind::rectangle);
    if (domain == StaggeredDomain::omega) {
        w.set_active(std::move(active));
    }
    PicardReport report = detail::run_engine(in, w);
    report.label = domain == StaggeredDomain::omega ? "omega" : "rectangle_hat";
    return {std::move(w), std::move(report)};
}

}  // namespace

nlohmann::json PicardReport::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["iterations"] = iterations;
    j["contraction_estimates"] = contraction_estimates;
    j["differences"] = differences;
    j["weight_L"] = weight_L;
    j["converged"] = converged;
    if (!parts.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : parts) {
            arr.push_back(p.to_json());
        }
        j["parts"] = arr;
    }
    return j;
}

double PicardReport::worst_contraction() const {
    double worst = 0.0;
    if (parts.empty()) {
        for (std::size_t s = 1; s < contraction_estimates.size(); ++s) {
            worst = std::max(worst, contraction_estimates[s]);
        }
        return worst;
    }
    for (const auto& p : parts) {
        worst = std::max(worst, p.worst_contraction());
    }
    return worst;
}

SolveResult solve_forward(DiscretizationPtr disc, const StateFn& u0, const TraceFn& U, const SolveOptions& opts) {
    const SystemSpec& spec = disc->spec();
    check_window(disc->time(), "solve_forward");
    SolutionField u(disc);
    if (use_exact(spec, opts)) {
        exact_forward(*disc, u0, U, u);
        return {std::move(u), exact_report()};
    }
    const ForwardRule rule(spec);
    EngineInput in;
    in.disc = disc;
    in.rule = &rule;
    in.direction = uniform_direction(*disc, -1);
    in.time_lo = u0;
    in.x1 = U;
    in.tolerance = opts.tolerance;
    in.max_iterations = opts.max_iterations;
    in.initial_iterate = opts.initial_iterate;
    const double t0 = disc->time().t0;
    in.subsets.push_back({"rectangle", [t0](double t, double) { return -(t - t0); }});
    PicardReport report = detail::run_engine(in, u);
    report.label = "forward";
    return {std::move(u), std::move(report)};
}

SolveResult solve_forward(const SystemSpec& spec, const StateFn& u0, const TraceFn& U, double t0, double t1,
                          const SolveOptions& opts) {
    return solve_forward(make_discretization(spec, t0, t1, opts.N), u0, U, opts);
}

SolveResult solve_adjoint(DiscretizationPtr disc, const StateFn& phi, const SolveOptions& opts) {
    const SystemSpec& spec = disc->spec();
    check_window(disc->time(), "solve_adjoint");
    SolutionField v(disc);
    if (use_exact(spec, opts)) {
        exact_adjoint(*disc, phi, v);
        return {std::move(v), exact_report()};
    }
    const AdjointRule rule(spec);
    EngineInput in;
    in.disc = disc;
    in.dual = true;
    in.rule = &rule;
    in.direction = uniform_direction(*disc, 1);
    in.time_hi = phi;
    in.x1 = [](int, double) { return 0.0; };
    in.tolerance = opts.tolerance;
    in.max_iterations = opts.max_iterations;
    in.initial_iterate = opts.initial_iterate;
    const double t1 = disc->time().t1();
    in.subsets.push_back({"rectangle", [t1](double t, double) { return -(t1 - t); }});
    PicardReport report = detail::run_engine(in, v);
    report.label = "adjoint";
    return {std::move(v), std::move(report)};
}

SolveResult solve_adjoint(const SystemSpec& spec, const StateFn& phi, double tau, double T, const SolveOptions& opts) {
    return solve_adjoint(make_discretization(spec, tau, tau + T, opts.N), phi, opts);
}

Trace observation_trace(const SolutionField& v) {
    const Discretization& disc = v.disc();
    const SystemSpec& spec = disc.spec();
    const int k = spec.k();
    const int m = spec.m();
    Trace out = Trace::zeros(disc.time(), k + 1, m);
    for (int q = 1; q <= m; ++q) {
        const int i = k + q;
        const double lam = spec.lambda(i, 1.0);
        const int last = v.nodes(i) - 1;
        for (int l = 0; l < v.levels(); ++l) {
            out.values(q - 1, l) = lam * v(i, l, last);
        }
    }
    return out;
}

SolveResult solve_omega(DiscretizationPtr disc, double tau, const OmegaData& data, const SolveOptions& opts) {
    return solve_staggered(std::move(disc), tau, data, opts, StaggeredDomain::omega);
}

SolveResult solve_omega(const SystemSpec& spec, double tau, double T, const OmegaData& data,
                        const SolveOptions& opts) {
    return solve_omega(make_discretization(spec, 0.0, T, opts.N), tau, data, opts);
}

SolveResult solve_rectangle_hat(DiscretizationPtr disc, double tau, const OmegaData& data, const SolveOptions& opts) {
    return solve_staggered(std::move(disc), tau, data, opts, StaggeredDomain::rectangle);
}

SolveResult solve_rectangle_hat(const SystemSpec& spec, double tau, double T, const OmegaData& data,
                                const SolveOptions& opts) {
    return solve_rectangle_hat(make_discretization(spec, 0.0, T, opts.N), tau, data, opts);
}

bool omega_fed(const SystemSpec& spec, double T, int i, double t) {
    const int first = spec.k() - spec.m() + 1;
    return i >= first && i <= spec.k() && t > T - spec.tau(i) + kLineTol;
}

Eigen::MatrixXd q_matrix(const SystemSpec& spec, int l) {
    const int k = spec.k();
    const int m = spec.m();
    if (l < std::max(1, k - m + 1) || l > k) {
        throw PreconditionError("q_matrix: l = " + std::to_string(l) + " outside [k - m + 1, k]");
    }
    const int r = k - l + 1;
    const Eigen::MatrixXd& B = spec.B();
    if (!is_invertible(B.bottomRightCorner(r, r))) {
        throw PreconditionError("q_matrix: the last " + std::to_string(r) + " x " + std::to_string(r) +
                                " block of B is singular");
    }
    Eigen::MatrixXd A(r, r);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(r, l - 1 + r);
    for (int a = 0; a < r; ++a) {
        const int q = m - k + l + a;
        for (int b = 0; b < r; ++b) {
            const int i = l + b;
            A(a, b) = B(i - 1, q - 1) * spec.lambda(i, 0.0);
        }
        for (int i = 1; i < l; ++i) {
            R(a, i - 1) = -B(i - 1, q - 1) * spec.lambda(i, 0.0);
        }
        R(a, l - 1 + a) = spec.lambda(k + q, 0.0);
    }
    return A.partialPivLu().solve(R);
}

}  // namespace hyperctrl
