#pragma once

#include <cmath>
#include <functional>

#include "hyperctrl/solution_field.hpp"

namespace oracles {

/**
 * @brief Closed-form solution of the k = m = 1 transport system with unit speeds,
 * C = 0, u_1(t, 0) = b u_2(t, 0), u_2(t, 1) = U(t) and u(0) = (g1, g2).
 */
struct UnitTransport {
    double b = 1.0;
    std::function<double(double)> g1;
    std::function<double(double)> g2;
    std::function<double(double)> U;

    double u2(double t, double x) const { return x + t < 1.0 ? g2(x + t) : U(t - (1.0 - x)); }
    double u1(double t, double x) const { return x - t > 0.0 ? g1(x - t) : b * u2(t - x, 0.0); }
    double operator()(int i, double t, double x) const { return i == 1 ? u1(t, x) : u2(t, x); }
};

/** @brief Compatible smooth data for UnitTransport (continuous at both corners). */
inline UnitTransport smooth_unit_transport(double b = 1.0) {
    UnitTransport o;
    o.b = b;
    o.g2 = [](double x) { return std::cos(M_PI * x) + 0.5 * x; };
    o.U = [](double t) { return -0.5 + std::sin(2.0 * t); };
    o.g1 = [b](double x) { return b * 1.0 + x * x - 0.3 * x; };
    return o;
}

/** @brief Largest nodal deviation of a field from an exact solution (i, t, x). */
inline double max_node_error(const hyperctrl::SolutionField& f, const std::function<double(int, double, double)>& exact) {
    double err = 0.0;
    const auto& tg = f.disc().time();
    for (int i = 1; i <= f.n(); ++i) {
        const auto& cg = f.disc().state().comp(i);
        for (int l = 0; l < f.levels(); ++l) {
            for (int p = 0; p < cg.size(); ++p) {
                const double t = tg.t(l), x = cg.x(p);
                err = std::max(err, std::abs(f(i, l, p) - exact(i, t, x)));
            }
        }
    }
    return err;
}

}  // namespace oracles
