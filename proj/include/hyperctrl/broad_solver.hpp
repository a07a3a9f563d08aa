#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperctrl/errors.hpp"
#include "hyperctrl/grid.hpp"
#include "hyperctrl/solution_field.hpp"
#include "hyperctrl/system_model.hpp"

namespace hyperctrl {

/** @brief Convergence history of one weighted Picard iteration. */
struct PicardReport {
    std::string label;
    int iterations = 0;
    /** @brief Ratios of successive weighted successive-differences. */
    std::vector<double> contraction_estimates;
    /** @brief Unweighted successive differences relative to the field size. */
    std::vector<double> differences;
    double weight_L = 0.0;
    bool converged = false;
    /** @brief Per-subdomain reports for Omega solves. */
    std::vector<PicardReport> parts;

    nlohmann::json to_json() const;
    /** @brief Largest contraction estimate after the first iteration, over all parts. */
    double worst_contraction() const;
};

/** @brief Picard iteration failed to converge; carries the report. */
class SolverError : public Error {
public:
    SolverError(const std::string& what, PicardReport report) : Error(what), report_(std::move(report)) {}
    const PicardReport& report() const { return report_; }

private:
    PicardReport report_;
};

enum class Method {
    /** Exact characteristic tracing when C = 0 and speeds are constant, Picard otherwise. */
    automatic,
    picard,
    exact,
};

struct SolveOptions {
    /** @brief Cells per unit time. */
    int N = 200;
    /** @brief Stop when the successive difference is below tolerance times the field size. */
    double tolerance = 1e-13;
    int max_iterations = 200;
    Method method = Method::automatic;
    /** @brief Optional starting iterate (zero field when null). */
    const SolutionField* initial_iterate = nullptr;
};

struct SolveResult {
    SolutionField field;
    PicardReport report;
};

/**
 * @brief Broad solution of the control system on [t0, t1]:
 * u_-(t, 0) = B u_+(t, 0), u_+(t, 1) = U, u(t0) = u0.
 *
 * u0 is evaluated as u0(i, x) for every component; U as U(i, t) for plus components.
 */
SolveResult solve_forward(DiscretizationPtr disc, const StateFn& u0, const TraceFn& U, const SolveOptions& opts = {});
SolveResult solve_forward(const SystemSpec& spec, const StateFn& u0, const TraceFn& U, double t0, double t1,
                          const SolveOptions& opts = {});

/**
 * @brief Backward broad solution of the dual system on [tau, tau + T] with v(tau + T) = phi,
 * v_-(t, 1) = 0 and Sigma_+(0) v_+(t, 0) = -B^T Sigma_-(0) v_-(t, 0).
 */
SolveResult solve_adjoint(DiscretizationPtr disc, const StateFn& phi, const SolveOptions& opts = {});
SolveResult solve_adjoint(const SystemSpec& spec, const StateFn& phi, double tau, double T,
                          const SolveOptions& opts = {});

/** @brief Sigma_+(1) v_+(., 1): the observation trace of a dual solution (rows k+1..n). */
Trace observation_trace(const SolutionField& v);

/** @brief Data of the Omega and hat problems (time measured from the anchor tau). */
struct OmegaData {
    /** @brief Trace on x = 1 for every component, f(i, t), t in (0, T). */
    TraceFn f;
    /** @brief Plus-part initial state g(i, x), i = k+1..n. */
    StateFn g;
    /** @brief Interior source gamma(i, t, x). */
    SourceFn gamma;
    /** @brief Terminal traces of minus components 1..k-m for the hat problem. */
    StateFn q;
};

/**
 * @brief Broad solution on Omega (below the characteristic of component k-m+1 through (1, T))
 * of w_t = Sigma w_x + Cbold(t + tau, x) w with the staggered Q boundary conditions.
 *
 * Solved subdomain by subdomain (Omega_k with weight e^{Lx}, then Omega_{k-1} ...
 * Omega_{k-m+1} with weight e^{L(-t + Phi(x))}).
 */
SolveResult solve_omega(const SystemSpec& spec, double tau, double T, const OmegaData& data,
                        const SolveOptions& opts = {});
SolveResult solve_omega(DiscretizationPtr disc, double tau, const OmegaData& data, const SolveOptions& opts = {});

/** @brief Broad solution of the hat problem on the full rectangle (0, T) x (0, 1). */
SolveResult solve_rectangle_hat(const SystemSpec& spec, double tau, double T, const OmegaData& data,
                                const SolveOptions& opts = {});
SolveResult solve_rectangle_hat(DiscretizationPtr disc, double tau, const OmegaData& data,
                                const SolveOptions& opts = {});

/** @brief Time levels on which the hat or Omega problem feeds component i (1-based minus) from x = 0. */
bool omega_fed(const SystemSpec& spec, double T, int i, double t);

/**
 * @brief The matrices Q_l (l = k..k-m+1) that solve the last k-l+1 dual boundary equations for v_l..v_k.
 *
 * Row r of the returned matrix gives v_{l+r} as a combination of the inputs
 * [v_1..v_{l-1}, v_{k+m-k+l}..v_{k+m}] at x = 0. Throws PreconditionError if the
 * required block of B is singular.
 */
Eigen::MatrixXd q_matrix(const SystemSpec& spec, int l);

}  // namespace hyperctrl
