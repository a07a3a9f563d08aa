#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hyperctrl/config.hpp"
#include "hyperctrl/system_model.hpp"

namespace testing {

inline hyperctrl::SystemSpec constant_system(int k, int m, std::vector<double> lambdas, Eigen::MatrixXd B,
                                             hyperctrl::CouplingPtr coupling = nullptr) {
    std::vector<hyperctrl::SpeedPtr> speeds;
    for (double l : lambdas) {
        speeds.push_back(hyperctrl::constant_speed(l));
    }
    if (!coupling) {
        coupling = hyperctrl::zero_coupling(k + m);
    }
    return hyperctrl::SystemSpec(k, m, std::move(speeds), std::move(B), std::move(coupling));
}

/** @brief k = m = 1, unit speeds, B = [b], no coupling. */
inline hyperctrl::SystemSpec transport_system(double b = 1.0) {
    return constant_system(1, 1, {1.0, 1.0}, Eigen::MatrixXd::Constant(1, 1, b));
}

inline hyperctrl::SystemSpec preset(const std::string& name) {
    return hyperctrl::system_from_json(hyperctrl::load_preset(name));
}

/** @brief Smooth random state: a few sine modes per component with a fixed seed. */
inline hyperctrl::StateFn random_state(unsigned seed, int n, int modes = 4) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> a(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(modes)));
    for (auto& row : a) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] = normal(rng) / static_cast<double>(j + 1);
        }
    }
    return [a](int i, double x) {
        const auto& row = a[static_cast<std::size_t>(i - 1)];
        double v = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            v += row[j] * std::sin(static_cast<double>(j + 1) * M_PI * x + 0.3 * static_cast<double>(j));
        }
        return v;
    };
}

/** @brief Composite Simpson rule with n (even) panels, used as an independent quadrature oracle. */
template <typename F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    }
    return s * h / 3.0;
}

}  // namespace testing
