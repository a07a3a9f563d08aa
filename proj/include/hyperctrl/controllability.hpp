#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hyperctrl/duality.hpp"

namespace hyperctrl {

/**
 * @brief Dense Gramian Lambda = F F* on the state grid.
 *
 * Assembled in observation form: G maps a terminal state phi to the flattened
 * observation trace, and Lambda = W_x^{-1} G^T W_t G, which is self-adjoint in the
 * W_x inner product. `symmetric` holds W_x^{1/2} Lambda W_x^{-1/2}.
 */
struct GramianMatrix {
    DiscretizationPtr disc;
    Eigen::MatrixXd G;
    Eigen::MatrixXd lambda;
    Eigen::MatrixXd symmetric;
    Eigen::VectorXd wx;
    Eigen::VectorXd wt;
    /**
     * @brief State nodes that enter the dual solution. Terminal values at dual inflow
     * corners (x = 1 for minus, x = 0 for plus components) are overwritten by the
     * boundary conditions and are excluded from the spectral data.
     */
    std::vector<int> active;
    /** @brief Spectrum of `symmetric` restricted to the active nodes (ascending). */
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;

    int dim() const { return static_cast<int>(active.size()); }
    int state_dim() const { return static_cast<int>(wx.size()); }
    double trace() const { return symmetric.trace(); }
    /** @brief max |S - S^T| / max |S| for the symmetrized form. */
    double symmetry_defect() const;
    double min_eigenvalue() const { return eigenvalues(0); }
    double max_eigenvalue() const { return eigenvalues(eigenvalues.size() - 1); }
    /** @brief Eigenvector of the smallest eigenvalue as a state vector, unit in the W_x norm. */
    Eigen::VectorXd min_eigenvector() const;
};

/** @brief 1 on state nodes the dual solution depends on, 0 at the dual inflow corners. */
Eigen::VectorXd dual_visible_mask(const ControlToStateMap& map);

/** @brief Assembles the Gramian with one adjoint solve per state grid node. */
GramianMatrix assemble_gramian(const ControlToStateMap& map);

/** @brief Lambda phi = F(F*(phi)): adjoint solve, then forward solve driven by the observation trace. */
Eigen::VectorXd gramian_apply(const ControlToStateMap& map, const Eigen::VectorXd& phi);

/** @brief Hutchinson estimate of trace(Lambda) with fixed-seed Rademacher probes. */
double gramian_trace_estimate(const ControlToStateMap& map, int probes = 8, unsigned seed = 20240917u);

struct HumOptions {
    /** @brief CG stops when the W_x residual is below tolerance times the right-hand side. */
    double tolerance = 1e-8;
    int max_iterations = 300;
    /** @brief Tikhonov factor relative to trace(Lambda) / dim. */
    double regularization_factor = 1e-10;
    /** @brief Stagnation window: stop if the residual did not halve over this many iterations. */
    int stagnation_window = 50;
};

struct ControlSolution {
    Trace U;
    Eigen::VectorXd phi;
    /** @brief ||u(tau + T)|| from an independent forward solve with U, over the dual-visible nodes. */
    double residual = 0.0;
    /** @brief max |u(tau + T)| at the dual inflow corners (single points, excluded from the residual). */
    double corner_residual = 0.0;
    double initial_norm = 0.0;
    int cg_iterations = 0;
    double regularization = 0.0;
    bool converged = false;
    std::vector<double> cg_history;

    double relative_residual() const { return initial_norm > 0.0 ? residual / initial_norm : residual; }
    nlohmann::json to_json() const;
};

/** @brief HUM control steering u0 at tau to 0 at tau + T (matrix-free CG on Lambda + eps I). */
ControlSolution hum_control(const ControlToStateMap& map, const StateFn& u0, const HumOptions& opts = {});

struct ObservabilityConstant {
    double constant = 0.0;
    double trace = 0.0;
    int dim = 0;
    double largest = 0.0;
    /** @brief Minimizing terminal state, unit in the W_x norm. */
    Eigen::VectorXd minimizer;
    double relative_to_trace() const { return trace > 0.0 ? constant / trace : 0.0; }
    double relative_to_mean() const { return trace > 0.0 ? constant * dim / trace : 0.0; }
};

/**
 * @brief Smallest Rayleigh quotient <Lambda phi, phi> / <phi, phi> over phi in span(E).
 *
 * E holds state vectors as columns (orthonormalized in W_x internally); null means
 * the whole state space.
 */
ObservabilityConstant observability_constant(const GramianMatrix& gramian, const Eigen::MatrixXd* E = nullptr);

enum class Verdict { controllable, degenerate, inconclusive };
std::string to_string(Verdict v);

struct VerdictReport {
    double T = 0.0;
    double tau = 0.0;
    double constant = 0.0;
    double trace = 0.0;
    int dim = 0;
    double condition_number = 0.0;
    double controllable_threshold = 0.0;
    double degenerate_threshold = 0.0;
    double symmetry_defect = 0.0;
    double psd_defect = 0.0;
    Verdict verdict = Verdict::inconclusive;
    nlohmann::json to_json() const;
};

/** @brief Verdict thresholds: controllable above 1e-6 trace/dim, degenerate below 1e-10 trace/dim. */
VerdictReport null_controllability_verdict(const GramianMatrix& gramian, double tau, double T);
VerdictReport null_controllability_verdict(const SystemSpec& spec, double tau, double T, const SolveOptions& opts = {});

}  // namespace hyperctrl
