#include "hyperctrl/duality.hpp"

#include <cmath>

namespace hyperctrl {

ControlToStateMap::ControlToStateMap(const SystemSpec& spec, double tau, double T, SolveOptions opts)
    : disc_(make_discretization(spec, tau, tau + T, opts.N)), opts_(opts), tau_(tau), T_(T) {
    if (!(T > 0.0)) {
        throw PreconditionError("control-to-state map needs T > 0");
    }
    weights_ = disc_->state().weights();
}

Eigen::VectorXd ControlToStateMap::evolve(const StateFn& u0, const TraceFn& U) const {
    const SolveResult r = solve_forward(disc_, u0, U, opts_);
    return r.field.time_slice(disc_->time().Nt);
}

Eigen::VectorXd ControlToStateMap::forward(const TraceFn& U) const { return evolve(nullptr, U); }

Eigen::VectorXd ControlToStateMap::forward(const Trace& U) const { return evolve(nullptr, trace_function(U)); }

Eigen::VectorXd ControlToStateMap::free_evolution(const StateFn& u0) const { return evolve(u0, nullptr); }

Eigen::VectorXd ControlToStateMap::free_evolution(const Eigen::VectorXd& u0) const {
    return evolve(state_function(disc_, u0), nullptr);
}

SolveResult ControlToStateMap::adjoint_solution(const StateFn& phi) const { return solve_adjoint(disc_, phi, opts_); }

Trace ControlToStateMap::adjoint(const StateFn& phi) const { return observation_trace(adjoint_solution(phi).field); }

Trace ControlToStateMap::adjoint(const Eigen::VectorXd& phi) const { return adjoint(state_function(disc_, phi)); }

double ControlToStateMap::state_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return (weights_.array() * a.array() * b.array()).sum();
}

Trace ControlToStateMap::zero_control() const {
    return Trace::zeros(disc_->time(), spec().k() + 1, spec().m());
}

Trace ControlToStateMap::sample_control(const TraceFn& U) const {
    Trace out = zero_control();
    if (!U) {
        return out;
    }
    for (int q = 0; q < spec().m(); ++q) {
        for (int l = 0; l < disc_->time().levels(); ++l) {
            out.values(q, l) = U(spec().k() + 1 + q, disc_->time().t(l));
        }
    }
    return out;
}

Eigen::VectorXd forward_map(const ControlToStateMap& map, const TraceFn& U) { return map.forward(U); }

Trace adjoint_map(const ControlToStateMap& map, const StateFn& phi) { return map.adjoint(phi); }

PairingReport pairing_check(const ControlToStateMap& map, const StateFn& u0, const TraceFn& U, const StateFn& phi,
                            PairingMode mode, double trace_tolerance) {
    const auto& disc = map.disc();
    const StateGrid& grid = disc->state();
    const Trace control = map.sample_control(U);
    const Eigen::VectorXd u0v = u0 ? grid.sample(u0) : Eigen::VectorXd::Zero(grid.dim());
    const Eigen::VectorXd phiv = phi ? grid.sample(phi) : Eigen::VectorXd::Zero(grid.dim());
    const double u_norm = map.state_norm(u0v) + control.norm();
    const double phi_norm = map.state_norm(phiv);

    PairingReport report;
    report.scale = u_norm * phi_norm;
    const SolveResult dual = map.adjoint_solution(phi);
    const Trace observation = observation_trace(dual.field);
    if (mode == PairingMode::controlled_u) {
        report.vanishing_trace_norm = control.norm();
        if (report.vanishing_trace_norm > trace_tolerance * std::max(u_norm, 1e-300)) {
            throw PreconditionError("pairing mode controlled-u needs u_+(., 1) = 0 (control norm " +
                                    std::to_string(report.vanishing_trace_norm) + ")");
        }
    } else {
        report.vanishing_trace_norm = observation.norm();
        if (report.vanishing_trace_norm > trace_tolerance * std::max(phi_norm, 1e-300)) {
            throw PreconditionError("pairing mode zero-observation-v needs v_+(., 1) = 0 (observation norm " +
                                    std::to_string(report.vanishing_trace_norm) + ")");
        }
    }
    const Eigen::VectorXd uT = map.evolve(u0, U);
    const Eigen::VectorXd v0 = dual.field.time_slice(0);
    report.terminal_pairing = map.state_dot(uT, phiv);
    report.initial_pairing = map.state_dot(u0v, v0);
    report.defect = std::abs(report.terminal_pairing - report.initial_pairing);
    return report;
}

AdjointIdentityReport adjoint_identity(const ControlToStateMap& map, const TraceFn& U, const StateFn& phi) {
    const StateGrid& grid = map.disc()->state();
    const Trace control = map.sample_control(U);
    const Eigen::VectorXd phiv = grid.sample(phi);
    AdjointIdentityReport r;
    r.lhs = map.state_dot(map.forward(U), phiv);
    r.rhs = control.dot(map.adjoint(phi));
    r.defect = std::abs(r.lhs - r.rhs);
    r.scale = control.norm() * map.state_norm(phiv);
    return r;
}

}  // namespace hyperctrl
