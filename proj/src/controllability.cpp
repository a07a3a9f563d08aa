#include "hyperctrl/controllability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hyperctrl {

namespace {

constexpr double kControllableFactor = 1e-6;
constexpr double kDegenerateFactor = 1e-10;

Eigen::VectorXd flatten(const Trace& tr) {
    const int rows = static_cast<int>(tr.values.rows());
    const int cols = static_cast<int>(tr.values.cols());
    Eigen::VectorXd out(rows * cols);
    for (int q = 0; q < rows; ++q) {
        out.segment(q * cols, cols) = tr.values.row(q).transpose();
    }
    return out;
}

}  // namespace

double GramianMatrix::symmetry_defect() const {
    const double scale = symmetric.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        return 0.0;
    }
    return (symmetric - symmetric.transpose()).cwiseAbs().maxCoeff() / scale;
}

Eigen::VectorXd GramianMatrix::min_eigenvector() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(state_dim());
    for (int a = 0; a < dim(); ++a) {
        const int j = active[static_cast<std::size_t>(a)];
        out(j) = eigenvectors(a, 0) / std::sqrt(wx(j));
    }
    return out;
}

GramianMatrix assemble_gramian(const ControlToStateMap& map) {
    GramianMatrix g;
    g.disc = map.disc();
    g.wx = map.weights();
    const int dim = map.state_dim();
    const Trace probe = map.zero_control();
    const int m = static_cast<int>(probe.values.rows());
    const int levels = static_cast<int>(probe.values.cols());
    const Eigen::VectorXd wt_time = map.disc()->time().weights();
    g.wt.resize(m * levels);
    for (int q = 0; q < m; ++q) {
        g.wt.segment(q * levels, levels) = wt_time;
    }
    g.G.resize(m * levels, dim);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j < dim; ++j) {
        e(j) = 1.0;
        g.G.col(j) = flatten(map.adjoint(e));
        e(j) = 0.0;
    }
    const Eigen::VectorXd sw = g.wt.array().sqrt();
    const Eigen::VectorXd sx = g.wx.array().sqrt();
    // S = W_x^{-1/2} G^T W_t G W_x^{-1/2}: form H = W_t^{1/2} G W_x^{-1/2}, then H^T H.
    const Eigen::MatrixXd H = sw.asDiagonal() * g.G * sx.cwiseInverse().asDiagonal();
    g.symmetric = H.transpose() * H;
    g.lambda = sx.cwiseInverse().asDiagonal() * g.symmetric * sx.asDiagonal();
    const Eigen::VectorXd mask = dual_visible_mask(map);
    for (int j = 0; j < dim; ++j) {
        if (mask(j) != 0.0) {
            g.active.push_back(j);
        }
    }
    const Eigen::MatrixXd reduced = g.symmetric(g.active, g.active);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    g.eigenvalues = eig.eigenvalues();
    g.eigenvectors = eig.eigenvectors();
    return g;
}

Eigen::VectorXd dual_visible_mask(const ControlToStateMap& map) {
    const SystemSpec& spec = map.spec();
    const StateGrid& grid = map.disc()->state();
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(grid.dim());
    for (int i = 1; i <= spec.n(); ++i) {
        mask(grid.offset(i) + (i <= spec.k() ? grid.comp(i).last() : 0)) = 0.0;
    }
    return mask;
}

Eigen::VectorXd gramian_apply(const ControlToStateMap& map, const Eigen::VectorXd& phi) {
    return map.forward(map.adjoint(phi));
}

double gramian_trace_estimate(const ControlToStateMap& map, int probes, unsigned seed) {
    std::mt19937 rng(seed);
    std::bernoulli_distribution coin(0.5);
    const int dim = map.state_dim();
    double sum = 0.0;
    for (int s = 0; s < probes; ++s) {
        Eigen::VectorXd z(dim);
        for (int j = 0; j < dim; ++j) {
            z(j) = coin(rng) ? 1.0 : -1.0;
        }
        sum += z.dot(gramian_apply(map, z));
    }
    return sum / probes;
}

nlohmann::json ControlSolution::to_json() const {
    nlohmann::json j;
    j["residual"] = residual;
    j["initial_norm"] = initial_norm;
    j["relative_residual"] = relative_residual();
    j["corner_residual"] = corner_residual;
    j["cg_iterations"] = cg_iterations;
    j["regularization"] = regularization;
    j["converged"] = converged;
    j["cg_history"] = cg_history;
    return j;
}

ControlSolution hum_control(const ControlToStateMap& map, const StateFn& u0, const HumOptions& opts) {
    ControlSolution sol;
    const StateGrid& grid = map.disc()->state();
    const int dim = map.state_dim();
    const Eigen::VectorXd u0v = u0 ? grid.sample(u0) : Eigen::VectorXd::Zero(dim);
    sol.initial_norm = map.state_norm(u0v);
    sol.phi = Eigen::VectorXd::Zero(dim);
    sol.U = map.zero_control();
    if (sol.initial_norm == 0.0) {
        sol.converged = true;
        return sol;
    }
    const double trace = gramian_trace_estimate(map);
    sol.regularization = opts.regularization_factor * std::max(trace, 0.0) / dim;
    const double eps = sol.regularization;
    // CG runs on the nodes the dual solution sees; the dual inflow corners are single points
    // whose terminal values are overwritten by the dual boundary conditions.
    const Eigen::VectorXd mask = dual_visible_mask(map);
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return mask.cwiseProduct(gramian_apply(map, x)) + eps * x;
    };

    const Eigen::VectorXd b = -mask.cwiseProduct(map.free_evolution(u0));
    const double b_norm = map.state_norm(b);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    double rr = map.state_dot(r, r);
    Eigen::VectorXd best = x;
    double best_res = std::sqrt(rr);
    sol.cg_history.push_back(best_res / b_norm);
    if (b_norm > 0.0) {
        for (int it = 1; it <= opts.max_iterations; ++it) {
            const Eigen::VectorXd Ap = apply(p);
            const double pAp = map.state_dot(p, Ap);
            if (!(pAp > 0.0)) {
                break;
            }
            const double alpha = rr / pAp;
            x += alpha * p;
            r -= alpha * Ap;
            const double rr_new = map.state_dot(r, r);
            const double res = std::sqrt(rr_new);
            sol.cg_iterations = it;
            sol.cg_history.push_back(res / b_norm);
            if (res < best_res) {
                best_res = res;
                best = x;
            }
            if (res <= opts.tolerance * b_norm) {
                sol.converged = true;
                break;
            }
            const int window = opts.stagnation_window;
            if (it >= window && sol.cg_history[static_cast<std::size_t>(it)] >
                                    0.5 * sol.cg_history[static_cast<std::size_t>(it - window)]) {
                break;
            }
            p = r + (rr_new / rr) * p;
            rr = rr_new;
        }
    } else {
        sol.converged = true;
    }
    sol.phi = best;
    sol.U = map.adjoint(best);
    const Eigen::VectorXd final_state = map.evolve(u0, trace_function(sol.U));
    sol.residual = map.state_norm(mask.cwiseProduct(final_state));
    sol.corner_residual = (Eigen::VectorXd::Ones(mask.size()) - mask).cwiseProduct(final_state).cwiseAbs().maxCoeff();
    return sol;
}

ObservabilityConstant observability_constant(const GramianMatrix& gramian, const Eigen::MatrixXd* E) {
    ObservabilityConstant out;
    out.trace = gramian.trace();
    out.dim = gramian.dim();
    out.largest = gramian.max_eigenvalue();
    const Eigen::VectorXd sx = gramian.wx.array().sqrt();
    if (E == nullptr) {
        out.constant = gramian.min_eigenvalue();
        out.minimizer = gramian.min_eigenvector();
        return out;
    }
    if (E->cols() == 0) {
        out.constant = std::numeric_limits<double>::infinity();
        out.minimizer = Eigen::VectorXd::Zero(gramian.dim());
        return out;
    }
    // Orthonormal basis of W^{1/2} span(E) on the active nodes, then the restricted symmetric form.
    const auto& act = gramian.active;
    const Eigen::MatrixXd scaled = (sx.asDiagonal() * (*E))(act, Eigen::all);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    int rank = 0;
    for (int s = 0; s < sv.size(); ++s) {
        if (sv(s) > 1e-12 * sv(0)) {
            ++rank;
        }
    }
    const Eigen::MatrixXd Q = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd R = Q.transpose() * gramian.symmetric(act, act) * Q;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (R + R.transpose()));
    out.constant = eig.eigenvalues()(0);
    const Eigen::VectorXd y = Q * eig.eigenvectors().col(0);
    out.minimizer = Eigen::VectorXd::Zero(gramian.state_dim());
    for (std::size_t a = 0; a < act.size(); ++a) {
        out.minimizer(act[a]) = y(static_cast<Eigen::Index>(a)) / sx(act[a]);
    }
    return out;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::controllable:
            return "controllable";
        case Verdict::degenerate:
            return "degenerate";
        case Verdict::inconclusive:
            return "inconclusive";
    }
    return "inconclusive";
}

nlohmann::json VerdictReport::to_json() const {
    nlohmann::json j;
    j["tau"] = tau;
    j["T"] = T;
    j["observability_constant"] = constant;
    j["trace"] = trace;
    j["dim"] = dim;
    j["condition_number"] = condition_number;
    j["thresholds"] = {{"controllable_above", controllable_threshold},
                       {"degenerate_below", degenerate_threshold},
                       {"rule", "constant compared with factor * trace / dim (artifact calibration)"}};
    j["symmetry_defect"] = symmetry_defect;
    j["psd_defect"] = psd_defect;
    j["verdict"] = to_string(verdict);
    return j;
}

VerdictReport null_controllability_verdict(const GramianMatrix& gramian, double tau, double T) {
    VerdictReport rep;
    rep.tau = tau;
    rep.T = T;
    const ObservabilityConstant oc = observability_constant(gramian);
    rep.constant = oc.constant;
    rep.trace = oc.trace;
    rep.dim = oc.dim;
    rep.condition_number =
        oc.constant > 0.0 ? oc.largest / oc.constant : std::numeric_limits<double>::infinity();
    const double mean = oc.dim > 0 ? oc.trace / oc.dim : 0.0;
    rep.controllable_threshold = kControllableFactor * mean;
    rep.degenerate_threshold = kDegenerateFactor * mean;
    rep.symmetry_defect = gramian.symmetry_defect();
    rep.psd_defect = oc.largest > 0.0 ? std::max(0.0, -oc.constant / oc.largest) : 0.0;
    if (oc.constant > rep.controllable_threshold) {
        rep.verdict = Verdict::controllable;
    } else if (oc.constant < rep.degenerate_threshold) {
        rep.verdict = Verdict::degenerate;
    } else {
        rep.verdict = Verdict::inconclusive;
    }
    return rep;
}

VerdictReport null_controllability_verdict(const SystemSpec& spec, double tau, double T, const SolveOptions& opts) {
    const ControlToStateMap map(spec, tau, T, opts);
    return null_controllability_verdict(assemble_gramian(map), tau, T);
}

}  // namespace hyperctrl
