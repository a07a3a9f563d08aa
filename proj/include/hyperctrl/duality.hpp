#pragma once

#include <Eigen/Dense>

#include "hyperctrl/broad_solver.hpp"

namespace hyperctrl {

/**
 * @brief Control-to-state map U -> u(tau + T) with zero initial state, and its adjoint.
 *
 * States are grid vectors on the discretization's StateGrid; controls and
 * observations are Traces of the plus components on its time grid.
 */
class ControlToStateMap {
public:
    ControlToStateMap(const SystemSpec& spec, double tau, double T, SolveOptions opts = {});

    const DiscretizationPtr& disc() const { return disc_; }
    const SystemSpec& spec() const { return disc_->spec(); }
    const SolveOptions& options() const { return opts_; }
    double tau() const { return tau_; }
    double T() const { return T_; }
    int state_dim() const { return disc_->state().dim(); }

    /** @brief u(tau + T) for control U and zero initial state. */
    Eigen::VectorXd forward(const TraceFn& U) const;
    Eigen::VectorXd forward(const Trace& U) const;
    /** @brief u(tau + T) for initial state u0 at tau and zero control. */
    Eigen::VectorXd free_evolution(const StateFn& u0) const;
    Eigen::VectorXd free_evolution(const Eigen::VectorXd& u0) const;
    /** @brief u(tau + T) for initial state u0 and control U. */
    Eigen::VectorXd evolve(const StateFn& u0, const TraceFn& U) const;

    /** @brief Observation trace Sigma_+(1) v_+(., 1) of the dual solution with v(tau + T) = phi. */
    Trace adjoint(const StateFn& phi) const;
    Trace adjoint(const Eigen::VectorXd& phi) const;
    /** @brief Full dual solution with v(tau + T) = phi. */
    SolveResult adjoint_solution(const StateFn& phi) const;

    /** @brief L2(0, 1) inner product of grid states (trapezoid in x). */
    double state_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
    double state_norm(const Eigen::VectorXd& a) const { return std::sqrt(state_dot(a, a)); }
    const Eigen::VectorXd& weights() const { return weights_; }

    /** @brief Zero trace of the plus components on the window's time grid. */
    Trace zero_control() const;
    /** @brief Samples a control function on the time grid. */
    Trace sample_control(const TraceFn& U) const;

private:
    DiscretizationPtr disc_;
    SolveOptions opts_;
    double tau_;
    double T_;
    Eigen::VectorXd weights_;
};

/** @brief forward_map: u(tau + T) from zero initial state with control U. */
Eigen::VectorXd forward_map(const ControlToStateMap& map, const TraceFn& U);
/** @brief adjoint_map: Sigma_+(1) v_+(., 1) with v(tau + T) = phi. */
Trace adjoint_map(const ControlToStateMap& map, const StateFn& phi);

enum class PairingMode {
    /** u_+(., 1) = 0 on the window; any phi. */
    controlled_u,
    /** v_+(., 1) = 0 on the window; any control. */
    zero_observation_v,
};

struct PairingReport {
    /** @brief |<u(tau + T), v(tau + T)> - <u(tau), v(tau)>|. */
    double defect = 0.0;
    /** @brief Product of data norms used for relative tolerances. */
    double scale = 0.0;
    double terminal_pairing = 0.0;
    double initial_pairing = 0.0;
    /** @brief L2 norm of the trace required to vanish. */
    double vanishing_trace_norm = 0.0;
    double relative() const { return scale > 0.0 ? defect / scale : defect; }
};

/**
 * @brief Checks the duality pairing between a forward solution (u0, U) and a dual solution (phi).
 *
 * scale = (||u0|| + ||U||) ||phi||. The vanishing trace of the selected mode must be
 * below trace_tolerance * scale-factor, otherwise PreconditionError.
 */
PairingReport pairing_check(const ControlToStateMap& map, const StateFn& u0, const TraceFn& U, const StateFn& phi,
                            PairingMode mode, double trace_tolerance = 1e-6);

struct AdjointIdentityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double defect = 0.0;
    double scale = 0.0;
    double relative() const { return scale > 0.0 ? defect / scale : defect; }
};

/** @brief |<forward_map(U), phi> - <U, adjoint_map(phi)>| with scale ||U|| ||phi||. */
AdjointIdentityReport adjoint_identity(const ControlToStateMap& map, const TraceFn& U, const StateFn& phi);

}  // namespace hyperctrl
