#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hyperctrl::quad {

/** @brief Nodes and weights of a quadrature rule on [-1, 1]. */
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/** @brief Gauss-Legendre rule with the given number of points (Newton iteration on P_n). */
const Rule& gauss_legendre(int points);

/**
 * @brief Adaptive composite Gauss-Legendre integral of f over [a, b].
 *
 * The number of equal panels doubles until two successive estimates differ
 * by less than tol * max(1, |estimate|).
 */
double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12);

/**
 * @brief Weights for integrating uniformly spaced samples f_0..f_L with unit step.
 *
 * Paths with L <= 7 steps use closed Newton-Cotes of degree L. Longer paths use
 * the trapezoid rule with Gregory end corrections through fifth differences.
 */
class UniformRule {
public:
    static constexpr int kMaxClosed = 7;
    static constexpr int kCorrection = 6;

    static const UniformRule& instance();

    /** @brief Newton-Cotes weights for 1 <= L <= kMaxClosed (size L + 1). */
    std::span<const double> closed(int steps) const;

    /** @brief Gregory correction c_r added to the trapezoid weight of f_r and of f_{L-r}. */
    std::span<const double> correction() const { return correction_; }

    /** @brief Integral of samples[0..steps] with step h. */
    double apply(const double* samples, int steps, double h) const;

    /** @brief Full weight vector for a path of the given length (unit step). */
    std::vector<double> weights(int steps) const;

private:
    UniformRule();
    std::vector<std::vector<double>> closed_;
    std::vector<double> correction_;
};

}  // namespace hyperctrl::quad
