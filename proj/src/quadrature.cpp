#include "hyperctrl/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Dense>

#include "hyperctrl/errors.hpp"

namespace hyperctrl::quad {

namespace {

Rule make_gauss_legendre(int points) {
    Rule rule;
    rule.nodes.resize(points);
    rule.weights.resize(points);
    for (int i = 0; i < points; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= points; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = points * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

double binomial(int n, int r) {
    double out = 1.0;
    for (int i = 1; i <= r; ++i) {
        out = out * (n - r + i) / i;
    }
    return out;
}

}  // namespace

const Rule& gauss_legendre(int points) {
    static std::mutex mutex;
    static std::map<int, Rule> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(points);
    if (it == cache.end()) {
        if (points < 1) {
            throw PreconditionError("gauss_legendre: need at least one point");
        }
        it = cache.emplace(points, make_gauss_legendre(points)).first;
    }
    return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (a == b) {
        return 0.0;
    }
    const Rule& rule = gauss_legendre(16);
    auto composite = [&](int panels) {
        const double h = (b - a) / panels;
        double sum = 0.0;
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (p + 0.5) * h;
            double local = 0.0;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                local += rule.weights[q] * f(mid + 0.5 * h * rule.nodes[q]);
            }
            sum += 0.5 * h * local;
        }
        return sum;
    };
    double previous = composite(1);
    for (int panels = 2; panels <= (1 << 16); panels *= 2) {
        const double current = composite(panels);
        if (std::abs(current - previous) < tol * std::max(1.0, std::abs(current))) {
            return current;
        }
        previous = current;
    }
    return previous;
}

UniformRule::UniformRule() {
    closed_.resize(kMaxClosed + 1);
    for (int steps = 1; steps <= kMaxClosed; ++steps) {
        // Moment conditions sum_r w_r r^q = L^{q+1}/(q+1), q = 0..L.
        const int size = steps + 1;
        Eigen::MatrixXd vandermonde(size, size);
        Eigen::VectorXd moments(size);
        for (int q = 0; q < size; ++q) {
            for (int r = 0; r < size; ++r) {
                vandermonde(q, r) = std::pow(static_cast<double>(r), q);
            }
            moments(q) = std::pow(static_cast<double>(steps), q + 1) / (q + 1);
        }
        const Eigen::VectorXd w = vandermonde.fullPivLu().solve(moments);
        closed_[steps].assign(w.data(), w.data() + size);
    }
    // Gregory coefficients for differences of order 1..5.
    const double gregory[] = {1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0, 3.0 / 160.0, 863.0 / 60480.0};
    correction_.assign(kCorrection, 0.0);
    for (int j = 1; j <= 5; ++j) {
        for (int r = 0; r <= j; ++r) {
            const double sign = (r % 2 == 0) ? 1.0 : -1.0;
            correction_[r] -= gregory[j - 1] * sign * binomial(j, r);
        }
    }
}

const UniformRule& UniformRule::instance() {
    static const UniformRule rule;
    return rule;
}

std::span<const double> UniformRule::closed(int steps) const {
    if (steps < 1 || steps > kMaxClosed) {
        throw PreconditionError("UniformRule::closed: steps out of range");
    }
    return closed_[steps];
}

double UniformRule::apply(const double* samples, int steps, double h) const {
    if (steps <= 0) {
        return 0.0;
    }
    double sum = 0.0;
    if (steps <= kMaxClosed) {
        const auto& w = closed_[steps];
        for (int r = 0; r <= steps; ++r) {
            sum += w[r] * samples[r];
        }
        return h * sum;
    }
    sum = 0.5 * (samples[0] + samples[steps]);
    for (int r = 1; r < steps; ++r) {
        sum += samples[r];
    }
    for (int r = 0; r < kCorrection; ++r) {
        sum += correction_[r] * (samples[r] + samples[steps - r]);
    }
    return h * sum;
}

std::vector<double> UniformRule::weights(int steps) const {
    std::vector<double> w(static_cast<std::size_t>(std::max(steps, 0)) + 1, 0.0);
    if (steps <= 0) {
        return w;
    }
    if (steps <= kMaxClosed) {
        const auto& c = closed_[steps];
        return std::vector<double>(c.begin(), c.end());
    }
    for (int r = 0; r <= steps; ++r) {
        w[r] = 1.0;
    }
    w[0] = w[steps] = 0.5;
    for (int r = 0; r < kCorrection; ++r) {
        w[r] += correction_[r];
        w[steps - r] += correction_[r];
    }
    return w;
}

}  // namespace hyperctrl::quad
