#pragma once

#include <memory>
#include <vector>

#include "hyperctrl/system_model.hpp"

namespace hyperctrl {

/**
 * @brief Travel coordinate y(x) = int_0^x 1/lambda and its inverse.
 *
 * Closed forms are used when the speed provides them; otherwise y is tabulated
 * on 1024 panels and evaluated by cubic Hermite interpolation (the derivative
 * 1/lambda is known exactly). Outside [0, 1] the map continues linearly with
 * the constant-extended speed.
 */
class TravelMap {
public:
    explicit TravelMap(SpeedPtr speed);

    double y(double x) const;
    double x(double y) const;
    double tau() const { return tau_; }
    double lambda(double x) const { return speed_->value(x); }

private:
    SpeedPtr speed_;
    bool closed_ = false;
    double tau_ = 0.0;
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<double> lam_;
};

/**
 * @brief Characteristic flows x_i(t, s, xi) and boundary crossing times.
 *
 * dx/dt = +lambda_i for i <= k and -lambda_i for i > k. Constant speeds use the
 * straight line; other speeds use classical RK4 with a fixed step.
 */
class CharacteristicFlow {
public:
    explicit CharacteristicFlow(const SystemSpec& spec);

    /** @brief Position at time t of the characteristic of component i through (s, xi). */
    double flow(int i, double t, double s, double xi) const;
    /** @brief Same, always through the RK4 integrator (used to cross-check the fast path). */
    double flow_rk4(int i, double t, double s, double xi) const;
    /** @brief tau(j, x): time for the flow started at (0, x) to reach x = 0 (plus) or x = 1 (minus). */
    double crossing_time(int j, double x) const;
    /** @brief RK4 step used by the integrator. */
    double step() const { return h_; }
    const TravelMap& travel(int i) const { return maps_.at(static_cast<std::size_t>(i - 1)); }
    const SystemSpec& spec() const { return spec_; }

private:
    SystemSpec spec_;
    std::vector<TravelMap> maps_;
    double h_ = 1e-3;
};

/** @brief The upper boundary t = gamma(x) of the region Omega at horizon T. */
struct OmegaBoundary {
    double T = 0.0;
    int component = 0;
    double intercept = 0.0;
    std::vector<double> x;
    std::vector<double> t;
    /** @brief gamma(x) evaluated from the travel map (exact, not from the samples). */
    double operator()(double xq) const { return intercept + map->y(xq); }
    std::shared_ptr<const TravelMap> map;
};

/** @brief Characteristic of component k - m + 1 through (x = 1, t = T), sampled at `samples` points. */
OmegaBoundary omega_boundary(const SystemSpec& spec, const CharacteristicFlow& flow, double T, int samples = 257);

}  // namespace hyperctrl
