#include "hyperctrl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "hyperctrl/duality.hpp"
#include "hyperctrl/quadrature.hpp"

namespace hyperctrl {

namespace {

constexpr double kPointTol = 1e-12;

/** @brief Piecewise-linear evaluation of level samples at time t. */
double level_interp(const TimeGrid& grid, const Eigen::VectorXd& values, double t) {
    const double r = std::clamp((t - grid.t0) / grid.dt, 0.0, static_cast<double>(grid.Nt));
    const int a = std::min(static_cast<int>(std::floor(r)), std::max(grid.Nt - 1, 0));
    const double th = r - a;
    if (grid.Nt == 0) {
        return values(0);
    }
    return (1.0 - th) * values(a) + th * values(a + 1);
}

/** @brief Integral of f over [a, b] with the 4-point Gauss rule. */
double gauss4(const std::function<double(double)>& f, double a, double b) {
    const quad::Rule& rule = quad::gauss_legendre(4);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        sum += rule.weights[q] * f(mid + half * rule.nodes[q]);
    }
    return half * sum;
}

/**
 * @brief Integral over the cell (xa, xb) of level samples read at y(x).
 *
 * Uses the mean of the levels strictly inside the cell, the rule that inverts the half-value
 * sampling of cell indicators at the cell edges, so pure transport gives K = 0 exactly.
 * Falls back to Gauss quadrature of the interpolant when the cell holds no level.
 */
double cell_integral(const TimeGrid& grid, const Eigen::VectorXd& values, const TravelMap& map, double xa,
                     double xb) {
    const double ya = map.y(xa);
    const double yb = map.y(xb);
    const int first = static_cast<int>(std::floor((ya - grid.t0) / grid.dt + kPointTol)) + 1;
    const int last = static_cast<int>(std::ceil((yb - grid.t0) / grid.dt - kPointTol)) - 1;
    if (last < first || first < 0 || last > grid.Nt) {
        return gauss4([&](double x) { return level_interp(grid, values, map.y(x)); }, xa, xb);
    }
    double sum = 0.0;
    for (int l = first; l <= last; ++l) {
        sum += values(l);
    }
    return (xb - xa) * sum / (last - first + 1);
}

bool row_conditions_hold(const SystemSpec& spec) {
    for (int i = 1; i <= spec.m(); ++i) {
        if (!row_condition(spec.B(), i)) {
            return false;
        }
    }
    return true;
}

HRoute resolve_route(const SystemSpec& spec, HRoute requested) {
    if (requested != HRoute::automatic) {
        return requested;
    }
    return (spec.k() >= spec.m() && row_conditions_hold(spec)) ? HRoute::kernel_operators : HRoute::dual;
}

void check_breakpoints(const SystemSpec& spec, const Discretization& disc, int Nx) {
    const int k = spec.k();
    const int m = spec.m();
    for (int j = 1; j <= m; ++j) {
        const TravelMap& map = disc.flow().travel(k + j);
        std::vector<double> points = {0.0, 1.0};
        for (int i = j + 1; i <= m; ++i) {
            points.push_back(std::clamp(map.x(spec.tau(k + i)), 0.0, 1.0));
        }
        std::sort(points.begin(), points.end());
        for (std::size_t s = 1; s < points.size(); ++s) {
            const double len = points[s] - points[s - 1];
            if (len > 1e-12 && len * Nx < 4.0 - 1e-9) {
                throw ConfigError("phi-grid too coarse: a breakpoint segment of component " + std::to_string(k + j) +
                                  " has length " + std::to_string(len) + " (< 4 cells at Nx = " + std::to_string(Nx) +
                                  ")");
            }
        }
    }
    const double dt = disc.time().dt;
    std::vector<double> taus;
    for (int j = 1; j <= m; ++j) {
        taus.push_back(spec.tau(k + j));
    }
    std::sort(taus.begin(), taus.end());
    for (std::size_t s = 1; s < taus.size(); ++s) {
        const double len = taus[s] - taus[s - 1];
        if (len > 1e-12 && len < 4.0 * dt - 1e-9) {
            throw ConfigError("time grid too coarse to resolve the tau_{k+j} breakpoints (fewer than 4 cells)");
        }
    }
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int c = 0; c < count; ++c) {
            body(c);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int c = w; c < count; c += threads) {
                    body(c);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

SubspaceBasis cell_points(const SystemSpec& spec, int Nx) {
    SubspaceBasis b;
    b.cells = true;
    const int n = spec.n();
    b.x.resize(n * Nx);
    b.w = Eigen::VectorXd::Constant(n * Nx, 1.0 / Nx);
    for (int i = 1; i <= n; ++i) {
        for (int c = 0; c < Nx; ++c) {
            b.comp.push_back(i);
            b.x((i - 1) * Nx + c) = (c + 0.5) / Nx;
        }
    }
    b.vectors.resize(n * Nx, 0);
    return b;
}

SubspaceBasis node_points(const DiscretizationPtr& disc) {
    SubspaceBasis b;
    b.cells = false;
    b.disc = disc;
    const StateGrid& grid = disc->state();
    b.w = grid.weights();
    b.x.resize(grid.dim());
    for (int i = 1; i <= grid.components(); ++i) {
        const ComponentGrid& g = grid.comp(i);
        for (int p = 0; p < g.size(); ++p) {
            b.comp.push_back(i);
            b.x(grid.offset(i) + p) = g.x(p);
        }
    }
    b.vectors.resize(grid.dim(), 0);
    return b;
}

/** @brief Gap and confidence from descending singular values and the kernel size. */
void set_gap(SubspaceBasis& b, const Eigen::VectorXd& s, int kernel, int cols, double confidence) {
    const int kept = cols - kernel;
    const double tiny = std::numeric_limits<double>::min();
    if (kernel == 0) {
        b.gap = s.size() > 0 ? s(s.size() - 1) / std::max(b.threshold, tiny) : 0.0;
    } else if (kept == 0) {
        b.gap = b.threshold / std::max(s.size() > 0 ? s(0) : 0.0, tiny);
    } else {
        const double below = kept < s.size() ? s(kept) : 0.0;
        b.gap = s(kept - 1) / std::max(below, tiny);
    }
    b.low_confidence = b.gap < confidence;
}

/** @brief Orthonormal basis (weights w) of the column span of V, rank decided relative to `scale`. */
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& V, const Eigen::VectorXd& w, double rel, double scale) {
    if (V.cols() == 0) {
        return Eigen::MatrixXd(V.rows(), 0);
    }
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd scaled = sw.asDiagonal() * V;
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU);
    const Eigen::VectorXd& s = svd.singularValues();
    const double ref = scale > 0.0 ? scale : (s.size() > 0 ? s(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < s.size(); ++i) {
        if (s(i) > rel * ref) {
            ++rank;
        }
    }
    return sw.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(rank);
}

}  // namespace

std::string to_string(HRoute route) {
    switch (route) {
        case HRoute::automatic:
            return "automatic";
        case HRoute::kernel_operators:
            return "kernel-operators";
        case HRoute::dual:
            return "dual";
    }
    return "automatic";
}

nlohmann::json OperatorMatrix::meta() const {
    return {{"tau", tau},
            {"T", T},
            {"Nx", Nx},
            {"N", N},
            {"window", window},
            {"trace_cells", trace_cells},
            {"K_shape", {K.rows(), K.cols()}},
            {"L_shape", {L.rows(), L.cols()}}};
}

OperatorMatrix assemble_operators(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts) {
    const int k = spec.k();
    const int m = spec.m();
    const int n = spec.n();
    if (k < m) {
        throw PreconditionError("K and L need k >= m (got k = " + std::to_string(k) + ", m = " + std::to_string(m) +
                                ")");
    }
    for (int i = 1; i < m; ++i) {
        if (!row_condition(spec.B(), i)) {
            throw PreconditionError("K and L need the row condition on B for i = " + std::to_string(i));
        }
    }
    if (T < spec.t_opt() - 1e-12) {
        throw PreconditionError("K and L need a horizon T >= T_opt = " + std::to_string(spec.t_opt()));
    }
    const int Nx = opts.Nx;
    if (Nx < 1 || opts.solve.N < 1) {
        throw ConfigError("spectral grids need Nx >= 1 and N >= 1");
    }
    const DiscretizationPtr disc = make_discretization(spec, 0.0, T, opts.solve.N);
    check_breakpoints(spec, *disc, Nx);
    const TimeGrid& tg = disc->time();
    const int first = k - m + 1;

    OperatorMatrix ops;
    ops.tau = tau;
    ops.T = T;
    ops.Nx = Nx;
    ops.N = opts.solve.N;
    ops.window = T - spec.tau(first);
    const int per_unit = opts.trace_cells_per_unit > 0 ? opts.trace_cells_per_unit : Nx;
    ops.trace_cells = std::max(1, static_cast<int>(std::lround(ops.window * per_unit)));
    const int dim = n * Nx;
    Eigen::MatrixXd IK = Eigen::MatrixXd::Identity(dim, dim);
    ops.L = Eigen::MatrixXd::Zero(m * ops.trace_cells, dim);
    const double sq = std::sqrt(static_cast<double>(Nx));
    const double dl = ops.window / ops.trace_cells;

    parallel_for(m * Nx, opts.threads, [&](int column) {
        const int q = column / Nx + 1;
        const int cell = column % Nx;
        const int comp = k + q;
        const double a = static_cast<double>(cell) / Nx;
        const double b = static_cast<double>(cell + 1) / Nx;
        OmegaData data;
        data.g = [=](int i, double x) {
            if (i != comp) {
                return 0.0;
            }
            if (x > a + kPointTol && x < b - kPointTol) {
                return sq;
            }
            if (std::abs(x - a) <= kPointTol || std::abs(x - b) <= kPointTol) {
                return 0.5 * sq;
            }
            return 0.0;
        };
        const SolveResult res = solve_omega(disc, tau, data, opts.solve);
        const SolutionField& w = res.field;
        std::vector<Eigen::VectorXd> residual(static_cast<std::size_t>(m));
        std::vector<Eigen::VectorXd> trace0(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) {
            trace0[i - 1] = w.boundary_trace(i, 0);
        }
        for (int r = 1; r <= m; ++r) {
            Eigen::VectorXd acc = spec.sigma(k + r, 0.0) * trace0[k + r - 1];
            for (int i = 1; i <= k; ++i) {
                acc += spec.B()(i - 1, r - 1) * spec.sigma(i, 0.0) * trace0[i - 1];
            }
            residual[r - 1] = acc;
        }
        const int col = (comp - 1) * Nx + cell;
        IK.col(col).setZero();
        for (int j = 1; j <= k; ++j) {
            for (int c = 0; c < Nx; ++c) {
                const double integral =
                    gauss4([&](double x) { return w.sample(j, 0.0, x); }, static_cast<double>(c) / Nx,
                           static_cast<double>(c + 1) / Nx);
                IK((j - 1) * Nx + c, col) = -sq * integral;
            }
        }
        for (int j = 1; j <= m; ++j) {
            const TravelMap& map = disc->flow().travel(k + j);
            const double lam0 = spec.lambda(k + j, 0.0);
            const Eigen::VectorXd& r = residual[j - 1];
            for (int c = 0; c < Nx; ++c) {
                const double xa = static_cast<double>(c) / Nx;
                const double xb = static_cast<double>(c + 1) / Nx;
                IK((k + j - 1) * Nx + c, col) = sq * cell_integral(tg, r, map, xa, xb) / lam0;
            }
        }
        for (int r = 1; r <= m; ++r) {
            for (int c = 0; c < ops.trace_cells; ++c) {
                const double integral =
                    gauss4([&](double t) { return level_interp(tg, residual[r - 1], t); }, c * dl, (c + 1) * dl);
                ops.L((r - 1) * ops.trace_cells + c, col) = integral / std::sqrt(dl);
            }
        }
    });
    ops.K = IK - Eigen::MatrixXd::Identity(dim, dim);
    return ops;
}

OperatorMatrix assemble_K(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts) {
    OperatorMatrix ops = assemble_operators(spec, tau, T, opts);
    ops.L.resize(0, 0);
    return ops;
}

OperatorMatrix assemble_L(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts) {
    OperatorMatrix ops = assemble_operators(spec, tau, T, opts);
    ops.K.resize(0, 0);
    return ops;
}

double SubspaceBasis::dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return (w.array() * a.array() * b.array()).sum();
}

double SubspaceBasis::orthonormality_defect() const {
    if (dim() == 0) {
        return 0.0;
    }
    const Eigen::MatrixXd gram = vectors.transpose() * w.asDiagonal() * vectors;
    return (gram - Eigen::MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff();
}

nlohmann::json SubspaceBasis::to_json(bool with_vectors) const {
    nlohmann::json j;
    j["route"] = to_string(route);
    j["tau"] = tau;
    j["T"] = T;
    j["dim"] = dim();
    j["threshold"] = threshold;
    j["gap"] = gap;
    j["low_confidence"] = low_confidence;
    j["certificate"] = certificate;
    j["orthonormality_defect"] = orthonormality_defect();
    const int tail = static_cast<int>(std::min<Eigen::Index>(singular_values.size(), 6));
    std::vector<double> smallest;
    for (int i = 0; i < tail; ++i) {
        smallest.push_back(singular_values(singular_values.size() - tail + i));
    }
    j["largest_singular_value"] = singular_values.size() > 0 ? singular_values(0) : 0.0;
    j["smallest_singular_values"] = smallest;
    if (with_vectors) {
        nlohmann::json vs = nlohmann::json::array();
        for (int c = 0; c < dim(); ++c) {
            std::vector<double> col(vectors.col(c).data(), vectors.col(c).data() + vectors.rows());
            vs.push_back(col);
        }
        j["vectors"] = vs;
    }
    return j;
}

SubspaceBasis kernel_from_operators(const SystemSpec& spec, const OperatorMatrix& ops, const SpectralOptions& opts) {
    const int dim = static_cast<int>(ops.K.rows());
    const Eigen::MatrixXd IK = Eigen::MatrixXd::Identity(dim, dim) + ops.K;
    const Eigen::BDCSVD<Eigen::MatrixXd> nIK(IK);
    const double norm_ik = nIK.singularValues()(0);
    double weight = 1.0;
    if (ops.L.size() > 0) {
        const Eigen::BDCSVD<Eigen::MatrixXd> nL(ops.L);
        const double norm_l = nL.singularValues()(0);
        if (norm_l > 0.0) {
            weight = norm_ik / norm_l;
        }
    }
    Eigen::MatrixXd M(IK.rows() + ops.L.rows(), dim);
    M << IK, weight * ops.L;
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();

    SubspaceBasis b = cell_points(spec, ops.Nx);
    b.route = HRoute::kernel_operators;
    b.tau = ops.tau;
    b.T = ops.T;
    b.singular_values = s;
    b.threshold = opts.threshold * (s.size() > 0 ? s(0) : 0.0);
    std::vector<int> kernel;
    for (int i = 0; i < dim; ++i) {
        const double si = i < s.size() ? s(i) : 0.0;
        if (si < b.threshold || (si == 0.0 && b.threshold == 0.0)) {
            kernel.push_back(i);
        }
    }
    set_gap(b, s, static_cast<int>(kernel.size()), dim, opts.gap_confidence);
    const double sq = std::sqrt(static_cast<double>(ops.Nx));
    b.vectors.resize(dim, static_cast<Eigen::Index>(kernel.size()));
    for (std::size_t c = 0; c < kernel.size(); ++c) {
        const Eigen::VectorXd v = svd.matrixV().col(kernel[c]);
        b.vectors.col(static_cast<Eigen::Index>(c)) = sq * v;
        const double res = (IK * v).norm() + (ops.L.size() > 0 ? (ops.L * v).norm() : 0.0);
        b.certificate = std::max(b.certificate, res);
    }
    return b;
}

namespace {

SubspaceBasis dual_kernel(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts) {
    const ControlToStateMap map(spec, tau, T, opts.solve);
    const GramianMatrix g = assemble_gramian(map);
    const Eigen::VectorXd sw = g.wt.array().sqrt();
    const Eigen::VectorXd sx = g.wx.array().sqrt();
    const Eigen::MatrixXd H = (sw.asDiagonal() * g.G * sx.cwiseInverse().asDiagonal())(Eigen::all, g.active);
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeFullV);
    const int cols = static_cast<int>(H.cols());
    // Spectrum of the Gramian Lambda: squares of the observation singular values, padded with zeros.
    Eigen::VectorXd s = Eigen::VectorXd::Zero(cols);
    for (int i = 0; i < std::min<int>(cols, static_cast<int>(svd.singularValues().size())); ++i) {
        s(i) = svd.singularValues()(i) * svd.singularValues()(i);
    }

    SubspaceBasis b = node_points(map.disc());
    b.route = HRoute::dual;
    b.tau = tau;
    b.T = T;
    b.singular_values = s;
    b.threshold = opts.threshold * (cols > 0 ? s(0) : 0.0);
    std::vector<int> kernel;
    for (int i = 0; i < cols; ++i) {
        if (s(i) < b.threshold) {
            kernel.push_back(i);
            b.certificate = std::max(b.certificate, s(i));
        }
    }
    set_gap(b, s, static_cast<int>(kernel.size()), cols, opts.gap_confidence);
    // Kernel terminal data, mapped to v(tau) by the dual system.
    Eigen::MatrixXd initial(map.state_dim(), static_cast<Eigen::Index>(kernel.size()));
    for (std::size_t c = 0; c < kernel.size(); ++c) {
        Eigen::VectorXd phi = Eigen::VectorXd::Zero(map.state_dim());
        const Eigen::VectorXd y = svd.matrixV().col(kernel[c]);
        for (std::size_t a = 0; a < g.active.size(); ++a) {
            phi(g.active[a]) = y(static_cast<Eigen::Index>(a)) / sx(g.active[a]);
        }
        const SolveResult v = map.adjoint_solution(state_function(map.disc(), phi));
        initial.col(static_cast<Eigen::Index>(c)) = v.field.time_slice(0);
    }
    b.vectors = orthonormalize(initial, b.w, 1e-8, 0.0);
    return b;
}

}  // namespace

SubspaceBasis compute_H(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts) {
    if (T < spec.t_opt() - 1e-12) {
        throw PreconditionError("H(tau, T) needs T >= T_opt = " + std::to_string(spec.t_opt()));
    }
    const HRoute route = resolve_route(spec, opts.route);
    if (route == HRoute::kernel_operators) {
        return kernel_from_operators(spec, assemble_operators(spec, tau, T, opts), opts);
    }
    return dual_kernel(spec, tau, T, opts);
}

std::vector<DimScanRow> dim_scan(const SystemSpec& spec, const std::vector<double>& taus, double T,
                                 const SpectralOptions& opts) {
    std::vector<DimScanRow> rows;
    for (double tau : taus) {
        const SubspaceBasis h = compute_H(spec, tau, T, opts);
        DimScanRow row;
        row.tau = tau;
        row.dim = h.dim();
        row.gap = h.gap;
        row.low_confidence = h.low_confidence;
        rows.push_back(row);
    }
    std::vector<bool> jump(rows.size(), false);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].dim != rows[i - 1].dim) {
            jump[i] = jump[i - 1] = true;
        }
    }
    SpectralOptions fine = opts;
    fine.Nx *= 4;
    fine.solve.N *= 4;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (jump[i]) {
            rows[i].refined_dim = compute_H(spec, rows[i].tau, T, fine).dim();
        }
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (jump[i] && jump[i - 1] && rows[i].refined_dim != rows[i - 1].refined_dim) {
            rows[i].flagged = rows[i - 1].flagged = true;
        }
    }
    return rows;
}

StateFn basis_function(const SubspaceBasis& basis, int col) {
    if (!basis.cells) {
        return state_function(basis.disc, basis.vectors.col(col));
    }
    const int Nx = static_cast<int>(std::lround(1.0 / basis.w(0)));
    const Eigen::VectorXd v = basis.vectors.col(col);
    return [v, Nx](int i, double x) {
        const int c = std::clamp(static_cast<int>(std::floor(x * Nx)), 0, Nx - 1);
        return v((i - 1) * Nx + c);
    };
}

Eigen::VectorXd to_basis_points(const SubspaceBasis& basis, const Discretization& disc, const Eigen::VectorXd& state) {
    const StateGrid& grid = disc.state();
    if (!basis.cells) {
        if (basis.x.size() != grid.dim()) {
            throw PreconditionError("state grid does not match the basis points");
        }
        return state;
    }
    const int Nx = static_cast<int>(std::lround(1.0 / basis.w(0)));
    Eigen::VectorXd out(basis.x.size());
    for (Eigen::Index p = 0; p < basis.x.size(); ++p) {
        const int i = basis.comp[static_cast<std::size_t>(p)];
        const double a = basis.x(p) - 0.5 / Nx;
        out(p) = Nx * gauss4([&](double x) { return grid.evaluate(state, i, x); }, a, a + 1.0 / Nx);
    }
    return out;
}

namespace {

SubspaceBasis empty_like(const SubspaceBasis& points) {
    SubspaceBasis b = points;
    b.vectors.resize(points.x.size(), 0);
    b.singular_values.resize(0);
    b.certificate = 0.0;
    return b;
}

/** @brief End state of a forward solve on (tau, tau + eps). */
Eigen::VectorXd evolve_window(const DiscretizationPtr& disc, const StateFn& u0, const TraceFn& U,
                              const SolveOptions& opts) {
    const SolveResult r = solve_forward(disc, u0, U, opts);
    return r.field.time_slice(disc->time().Nt);
}

}  // namespace

SubspaceBasis attainable_projection(const SystemSpec& spec, double tau, double eps, const SubspaceBasis& H_next,
                                    const SpectralOptions& opts) {
    if (!(eps > 0.0)) {
        throw PreconditionError("attainable projection needs eps > 0");
    }
    SubspaceBasis out = empty_like(H_next);
    out.tau = tau;
    if (H_next.dim() == 0) {
        return out;
    }
    const DiscretizationPtr disc = make_discretization(spec, tau, tau + eps, opts.solve.N);
    const TimeGrid& tg = disc->time();
    const int k = spec.k();
    const int m = spec.m();
    const int controls = m * tg.levels();
    Eigen::MatrixXd Z(H_next.dim(), controls);
    std::vector<double> norms(static_cast<std::size_t>(controls), 0.0);
    parallel_for(controls, opts.threads, [&](int c) {
        Trace U = Trace::zeros(tg, k + 1, m);
        U.values(c / tg.levels(), c % tg.levels()) = 1.0;
        const Eigen::VectorXd y =
            to_basis_points(H_next, *disc, evolve_window(disc, nullptr, trace_function(U), opts.solve));
        norms[static_cast<std::size_t>(c)] = std::sqrt(H_next.dot(y, y));
        Z.col(c) = H_next.vectors.transpose() * H_next.w.asDiagonal() * y;
    });
    // Rank relative to the largest reachable state, not to its projection.
    const double scale = *std::max_element(norms.begin(), norms.end());
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeThinU);
    const Eigen::VectorXd& s = svd.singularValues();
    out.singular_values = s;
    out.threshold = opts.threshold * std::max(scale, s.size() > 0 ? s(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < s.size(); ++i) {
        if (s(i) > out.threshold) {
            ++rank;
        }
    }
    out.vectors = H_next.vectors * svd.matrixU().leftCols(rank);
    return out;
}

SubspaceBasis attainable_projection(const SystemSpec& spec, double tau, double eps, double T,
                                    const SpectralOptions& opts) {
    return attainable_projection(spec, tau, eps, compute_H(spec, tau + eps, T, opts), opts);
}

SubspaceBasis j_space(const SystemSpec& spec, double tau, double eps, const SubspaceBasis& H, const SubspaceBasis& H_next,
                      const SpectralOptions& opts) {
    SubspaceBasis out = empty_like(H);
    out.tau = tau;
    if (H.dim() == 0) {
        return out;
    }
    if (H_next.dim() == 0) {
        // Every projection onto {0} lies in A = {0}.
        out.vectors = H.vectors;
        return out;
    }
    const SubspaceBasis A = attainable_projection(spec, tau, eps, H_next, opts);
    const Eigen::MatrixXd Ac = H_next.vectors.transpose() * H_next.w.asDiagonal() * A.vectors;
    const DiscretizationPtr disc = make_discretization(spec, tau, tau + eps, opts.solve.N);
    Eigen::MatrixXd R(H_next.dim(), H.dim());
    double scale = 0.0;
    for (int c = 0; c < H.dim(); ++c) {
        const Eigen::VectorXd y =
            to_basis_points(H_next, *disc, evolve_window(disc, basis_function(H, c), nullptr, opts.solve));
        scale = std::max(scale, std::sqrt(H_next.dot(y, y)));
        const Eigen::VectorXd z = H_next.vectors.transpose() * H_next.w.asDiagonal() * y;
        R.col(c) = z - Ac * (Ac.transpose() * z);
    }
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullV);
    const Eigen::VectorXd& s = svd.singularValues();
    out.singular_values = s;
    out.threshold = opts.threshold * scale;
    std::vector<int> null;
    for (int i = 0; i < H.dim(); ++i) {
        const double si = i < s.size() ? s(i) : 0.0;
        if (si <= out.threshold) {
            null.push_back(i);
        }
    }
    Eigen::MatrixXd coeffs(H.dim(), static_cast<Eigen::Index>(null.size()));
    for (std::size_t c = 0; c < null.size(); ++c) {
        coeffs.col(static_cast<Eigen::Index>(c)) = svd.matrixV().col(null[c]);
    }
    out.vectors = H.vectors * coeffs;
    return out;
}

SubspaceBasis j_space(const SystemSpec& spec, double tau, double eps, double T, const SpectralOptions& opts) {
    return j_space(spec, tau, eps, compute_H(spec, tau, T, opts), compute_H(spec, tau + eps, T, opts), opts);
}

Eigen::VectorXd principal_angles(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.dim() == 0 || b.dim() == 0) {
        return Eigen::VectorXd(0);
    }
    const Eigen::MatrixXd cross = a.vectors.transpose() * a.w.asDiagonal() * b.vectors;
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(cross);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd angles(s.size());
    for (int i = 0; i < s.size(); ++i) {
        angles(i) = std::acos(std::clamp(s(i), -1.0, 1.0));
    }
    return angles;
}

double containment_defect(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.dim() == 0) {
        return 0.0;
    }
    if (b.dim() == 0) {
        return 1.0;
    }
    const Eigen::VectorXd sw = a.w.array().sqrt();
    const Eigen::MatrixXd Qa = sw.asDiagonal() * a.vectors;
    const Eigen::MatrixXd Qb = sw.asDiagonal() * b.vectors;
    const Eigen::MatrixXd rest = Qa - Qb * (Qb.transpose() * Qa);
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(rest);
    return std::min(1.0, svd.singularValues()(0));
}

double subspace_cosine(const SubspaceBasis& basis, const Eigen::VectorXd& values) {
    const double norm = std::sqrt(basis.dot(values, values));
    if (basis.dim() == 0 || norm == 0.0) {
        return 0.0;
    }
    const Eigen::VectorXd coeffs = basis.vectors.transpose() * basis.w.asDiagonal() * values;
    return std::min(1.0, coeffs.norm() / norm);
}

}  // namespace hyperctrl
