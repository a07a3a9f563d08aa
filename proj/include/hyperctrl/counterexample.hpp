#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hyperctrl/broad_solver.hpp"

namespace hyperctrl {

/** @brief Data of the counterexample construction: constant speeds, B, coupling column ell and time deficit eps. */
struct CounterexampleSpec {
    int k = 1;
    int m = 2;
    int ell = 2;
    /** @brief lambda_1..lambda_n (all positive). */
    std::vector<double> lambdas;
    Eigen::MatrixXd B;
    double eps = 0.1;

    nlohmann::json to_json() const;
    static CounterexampleSpec from_json(const nlohmann::json& j);
};

/** @brief k = 1, m = 2, ell = 2, lambda = (1, 1, 2), B = [1, 1]. */
CounterexampleSpec reference_counterexample(double eps = 0.1);

/** @brief Constants of the construction, recomputed from the spec. */
struct CounterexampleConstants {
    double T = 0.0;
    double tau_k = 0.0;
    double tau_k1 = 0.0;
    double tau_kl = 0.0;
    double t_opt = 0.0;
    /** @brief I = (tau_{k+ell}, tau_{k+1}) intersected with (T - tau_k, T). */
    double I_lo = 0.0;
    double I_hi = 0.0;
    double gamma_k1 = 0.0;
    double gamma_kl = 0.0;
    double theta_k = 0.0;
    double theta_k1 = 0.0;

    nlohmann::json to_json() const;
};

/** @brief Validates admissibility and computes the constants; PreconditionError names the failed condition. */
CounterexampleConstants counterexample_constants(const CounterexampleSpec& cx);

/** @brief Standard mollifier exp(-1 / (1 - s^2)) moved to (a, b) and normalized to unit integral. */
class Bump {
public:
    Bump(double a, double b);
    double operator()(double t) const;
    double lo() const { return a_; }
    double hi() const { return b_; }
    double normalization() const { return c_; }

private:
    double a_;
    double b_;
    double mid_;
    double half_;
    double c_;
};

/** @brief Bump supported in I; PreconditionError if I is empty. */
Bump build_bump(double a, double b);

/** @brief C with C_{k,k+ell} = -alpha and C_{k+1,k+ell} = -beta, all other entries zero. */
CouplingPtr build_coefficients(const CounterexampleSpec& cx);

/** @brief The full system (constant speeds, B, counterexample coupling). */
SystemSpec counterexample_system(const CounterexampleSpec& cx);

struct WitnessTolerances {
    double obs_relative = 1e-6;
    double obs_absolute = 1e-14;
    double initial_floor = 1e-8;
    /** @brief Identity defects are relative to the terminal datum (sup norm or L2 norm). */
    double identity = 1e-8;
    /** @brief Throw ConstructionError when an identity defect exceeds the tolerance. */
    bool strict = true;
};

struct WitnessReport {
    double obs_norm = 0.0;
    double initial_norm = 0.0;
    double data_norm = 0.0;
    double data_sup = 0.0;
    std::map<std::string, double> identity_defects;
    bool pass = false;
    int N = 0;
    double T = 0.0;
    PicardReport solver;

    double ratio() const { return initial_norm > 0.0 ? obs_norm / initial_norm : 0.0; }
    nlohmann::json to_json() const;
};

struct Witness {
    SolveResult solution;
    WitnessReport report;
    /** @brief v(0, .) as a state vector. */
    Eigen::VectorXd initial_state;
    /** @brief v(T, .) as a state vector. */
    Eigen::VectorXd terminal_state;
};

/** @brief Backward solve of the dual system from the constructed terminal datum, with identity checks. */
Witness build_dual_witness(const CounterexampleSpec& cx, const SolveOptions& opts = {},
                           const WitnessTolerances& tol = {});

/** @brief Terminal datum of the witness: v_k(T, x) = phi(T - tau_k x) / gamma_{k+ell}, zero otherwise. */
StateFn witness_terminal_datum(const CounterexampleSpec& cx);

struct ScanRow {
    double eps = 0.0;
    double T = 0.0;
    double ratio = 0.0;
    bool witness_pass = false;
    double constant = 0.0;
    double constant_over_trace = 0.0;
    std::string verdict;
};

/**
 * @brief For each eps: witness ratio at resolution opts.N and, when gramian_N > 0, the
 * Gramian observability constant at T(eps) with that resolution.
 */
std::vector<ScanRow> observability_failure_scan(const CounterexampleSpec& cx, const std::vector<double>& eps_list,
                                                const SolveOptions& opts, int gramian_N = 0);

}  // namespace hyperctrl
