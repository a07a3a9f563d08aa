#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hyperctrl/broad_solver.hpp"
#include "hyperctrl/controllability.hpp"

namespace hyperctrl {

/** @brief How the obstruction space is computed. */
enum class HRoute {
    /** Kernel operators when k >= m and the row conditions hold, the dual route otherwise. */
    automatic,
    /** Joint kernel of I + K and L assembled from Omega solves (needs k >= m). */
    kernel_operators,
    /** Kernel of the observability Gramian, mapped back to the anchor time by the dual system. */
    dual,
};

std::string to_string(HRoute route);

struct SpectralOptions {
    /** @brief Cells per component of the phi-grid (piecewise-constant indicators). */
    int Nx = 32;
    /** @brief Cells of the L trace grid per unit time (0 means Nx). */
    int trace_cells_per_unit = 0;
    /** @brief Solver options; N is the time resolution of the Omega and dual solves. */
    SolveOptions solve = {128};
    /** @brief Kernel threshold relative to the largest singular value. */
    double threshold = 1e-8;
    /** @brief Consecutive singular values closer than this ratio at the threshold mark a low-confidence result. */
    double gap_confidence = 10.0;
    HRoute route = HRoute::automatic;
    /** @brief Worker threads for the column assembly. */
    int threads = 1;
};

/** @brief Discretized K(tau) and L(tau) on the phi-grid. */
struct OperatorMatrix {
    double tau = 0.0;
    double T = 0.0;
    int Nx = 0;
    int N = 0;
    /** @brief Length of the L window (0, T - tau_{k-m+1}). */
    double window = 0.0;
    int trace_cells = 0;
    /** @brief n Nx x n Nx, coordinates in the orthonormal indicator basis (component-major). */
    Eigen::MatrixXd K;
    /** @brief m trace_cells x n Nx, coordinates in the orthonormal indicator basis of the window. */
    Eigen::MatrixXd L;

    nlohmann::json meta() const;
};

/**
 * @brief K(tau) and L(tau) from one Omega solve per plus-component indicator (f = 0, g = indicator).
 *
 * Minus rows of K read -w_-(0, x). Plus row k + j of I + K samples the j-th dual
 * boundary residual Sigma_+(0) w_+ + B^T Sigma_-(0) w_- at time tau(k + j, x),
 * divided by lambda_{k+j}(0). L samples the whole residual on the window.
 */
OperatorMatrix assemble_operators(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts = {});
/** @brief K part only (L left empty). */
OperatorMatrix assemble_K(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts = {});
/** @brief L part only (K left empty). */
OperatorMatrix assemble_L(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts = {});

/**
 * @brief Orthonormal basis of a subspace of [L^2(0, 1)]^n.
 *
 * Vectors hold function values at sample points (component `comp`, position `x`)
 * and are orthonormal for the weights `w`.
 */
struct SubspaceBasis {
    HRoute route = HRoute::automatic;
    double tau = 0.0;
    double T = 0.0;
    /** @brief Points are cell centres of the phi-grid (true) or state grid nodes of `disc` (false). */
    bool cells = false;
    DiscretizationPtr disc;
    std::vector<int> comp;
    Eigen::VectorXd x;
    Eigen::VectorXd w;
    Eigen::MatrixXd vectors;
    /** @brief Singular values of the operator whose kernel was taken (descending). */
    Eigen::VectorXd singular_values;
    double threshold = 0.0;
    /** @brief Ratio of the singular values on both sides of the threshold (to the threshold when one side is empty). */
    double gap = 0.0;
    bool low_confidence = false;
    /** @brief max over basis vectors of the kernel residual, re-evaluated after the SVD. */
    double certificate = 0.0;

    int dim() const { return static_cast<int>(vectors.cols()); }
    double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
    /** @brief max |V^T W V - I|. */
    double orthonormality_defect() const;
    nlohmann::json to_json(bool with_vectors = false) const;
};

/** @brief H(tau, T); T = T_opt gives H(tau). */
SubspaceBasis compute_H(const SystemSpec& spec, double tau, double T, const SpectralOptions& opts = {});
/** @brief Kernel of the stacked [I + K; w L] with w balancing the two blocks. */
SubspaceBasis kernel_from_operators(const SystemSpec& spec, const OperatorMatrix& ops, const SpectralOptions& opts);

struct DimScanRow {
    double tau = 0.0;
    int dim = 0;
    double gap = 0.0;
    bool low_confidence = false;
    /** @brief Dimension differs from a neighbour and the jump survived a 4x grid refinement. */
    bool flagged = false;
    /** @brief Dimension at the refined grid when a refinement was run (-1 otherwise). */
    int refined_dim = -1;
};

/** @brief dim H(tau, T) along a tau grid; jumps are re-checked on a 4x finer grid before flagging. */
std::vector<DimScanRow> dim_scan(const SystemSpec& spec, const std::vector<double>& taus, double T,
                                 const SpectralOptions& opts = {});

/**
 * @brief A_{tau, eps}: projection onto H(tau + eps, T) of the states reachable at tau + eps
 * from zero at tau with controls on (tau, tau + eps).
 */
SubspaceBasis attainable_projection(const SystemSpec& spec, double tau, double eps, double T,
                                    const SpectralOptions& opts = {});
SubspaceBasis attainable_projection(const SystemSpec& spec, double tau, double eps, const SubspaceBasis& H_next,
                                    const SpectralOptions& opts = {});

/** @brief J(tau, eps) = {phi in H(tau) : Proj_{H(tau + eps)} T^I(phi) in A_{tau, eps}}. */
SubspaceBasis j_space(const SystemSpec& spec, double tau, double eps, double T, const SpectralOptions& opts = {});
SubspaceBasis j_space(const SystemSpec& spec, double tau, double eps, const SubspaceBasis& H, const SubspaceBasis& H_next,
                      const SpectralOptions& opts = {});

/** @brief Principal angles (radians, ascending) between two subspaces on the same sample points. */
Eigen::VectorXd principal_angles(const SubspaceBasis& a, const SubspaceBasis& b);
/** @brief Largest sine of the angle between a vector of span(a) and span(b); 0 when span(a) lies in span(b). */
double containment_defect(const SubspaceBasis& a, const SubspaceBasis& b);

/** @brief Cosine of the angle between a basis vector (or the space) and a function sampled on the same points. */
double subspace_cosine(const SubspaceBasis& basis, const Eigen::VectorXd& values);

/** @brief Basis vector `col` as a function (i, x). */
StateFn basis_function(const SubspaceBasis& basis, int col);

/** @brief Function values of a state vector of `disc` on the sample points of `basis`. */
Eigen::VectorXd to_basis_points(const SubspaceBasis& basis, const Discretization& disc, const Eigen::VectorXd& state);

}  // namespace hyperctrl
