#include "hyperctrl/characteristics.hpp"

#include <algorithm>
#include <cmath>

#include "hyperctrl/errors.hpp"
#include "hyperctrl/quadrature.hpp"

namespace hyperctrl {

namespace {

constexpr int kPanels = 1024;

double hermite(double t, double h, double f0, double f1, double d0, double d1) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * h * d1;
}

}  // namespace

TravelMap::TravelMap(SpeedPtr speed) : speed_(std::move(speed)) {
    if (speed_->has_closed_travel()) {
        closed_ = true;
        tau_ = speed_->closed_travel(1.0);
        return;
    }
    const quad::Rule& rule = quad::gauss_legendre(8);
    xs_.resize(kPanels + 1);
    ys_.resize(kPanels + 1);
    lam_.resize(kPanels + 1);
    ys_[0] = 0.0;
    for (int p = 0; p <= kPanels; ++p) {
        xs_[p] = static_cast<double>(p) / kPanels;
        lam_[p] = speed_->value(xs_[p]);
        if (!(lam_[p] > 0.0)) {
            throw DomainError("non-positive speed at x = " + std::to_string(xs_[p]));
        }
    }
    for (int p = 0; p < kPanels; ++p) {
        const double a = xs_[p];
        const double h = xs_[p + 1] - a;
        double sum = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double v = speed_->value(a + 0.5 * h * (rule.nodes[q] + 1.0));
            if (!(v > 0.0)) {
                throw DomainError("non-positive speed inside panel at x = " + std::to_string(a));
            }
            sum += rule.weights[q] / v;
        }
        ys_[p + 1] = ys_[p] + 0.5 * h * sum;
    }
    tau_ = ys_.back();
}

double TravelMap::y(double x) const {
    if (closed_) {
        return speed_->closed_travel(x);
    }
    if (x <= 0.0) {
        return x / lam_.front();
    }
    if (x >= 1.0) {
        return tau_ + (x - 1.0) / lam_.back();
    }
    const int p = std::min(static_cast<int>(x * kPanels), kPanels - 1);
    const double h = xs_[p + 1] - xs_[p];
    return hermite((x - xs_[p]) / h, h, ys_[p], ys_[p + 1], 1.0 / lam_[p], 1.0 / lam_[p + 1]);
}

double TravelMap::x(double y) const {
    if (closed_) {
        return speed_->closed_travel_inverse(y);
    }
    if (y <= 0.0) {
        return y * lam_.front();
    }
    if (y >= tau_) {
        return 1.0 + (y - tau_) * lam_.back();
    }
    const auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
    const int p = std::clamp(static_cast<int>(it - ys_.begin()) - 1, 0, kPanels - 1);
    const double h = ys_[p + 1] - ys_[p];
    return hermite((y - ys_[p]) / h, h, xs_[p], xs_[p + 1], lam_[p], lam_[p + 1]);
}

CharacteristicFlow::CharacteristicFlow(const SystemSpec& spec) : spec_(spec) {
    double max_derivative = 0.0;
    for (int i = 1; i <= spec.n(); ++i) {
        maps_.emplace_back(spec.speed_ptr(i));
        for (int s = 0; s <= 256; ++s) {
            max_derivative = std::max(max_derivative, std::abs(spec.speed(i).derivative(s / 256.0)));
        }
    }
    // n h max|lambda'| < 0.1, and small enough for 1e-9 group-property agreement.
    h_ = 2e-3;
    if (max_derivative > 0.0) {
        h_ = std::min(h_, 0.05 / (spec.n() * max_derivative));
    }
}

double CharacteristicFlow::flow(int i, double t, double s, double xi) const {
    const Speed& speed = spec_.speed(i);
    if (speed.is_constant()) {
        const double direction = spec_.is_minus(i) ? 1.0 : -1.0;
        return xi + direction * speed.value(0.5) * (t - s);
    }
    return flow_rk4(i, t, s, xi);
}

double CharacteristicFlow::flow_rk4(int i, double t, double s, double xi) const {
    const Speed& speed = spec_.speed(i);
    const double direction = spec_.is_minus(i) ? 1.0 : -1.0;
    auto rhs = [&](double x) { return direction * speed.value(x); };
    auto rk4 = [&](double x, double h) {
        const double k1 = rhs(x);
        const double k2 = rhs(x + 0.5 * h * k1);
        const double k3 = rhs(x + 0.5 * h * k2);
        const double k4 = rhs(x + h * k3);
        return x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
    };
    if (t == s) {
        return xi;
    }
    // Outside [0, 1] the speed is constant, so the motion there is a straight line. RK4 steps
    // stop exactly on the boundary to keep their order across the kink of the extension.
    const double sign = t > s ? 1.0 : -1.0;
    const double heading = direction * sign;
    double left = std::abs(t - s);
    double x = xi;
    while (left > 0.0) {
        if (x < 0.0 || x > 1.0 || (x == 0.0 && heading < 0.0) || (x == 1.0 && heading > 0.0)) {
            const double edge = x <= 0.0 ? 0.0 : 1.0;
            const double v = speed.value(edge);
            const bool toward = (edge - x) * heading > 0.0;
            const double reach = std::abs(edge - x) / v;
            if (!toward || reach >= left) {
                return x + heading * v * left;
            }
            x = edge;
            left -= reach;
            continue;
        }
        const int steps = std::max(1, static_cast<int>(std::ceil(left / h_)));
        const double h = left / steps;
        const double next = rk4(x, sign * h);
        if (next >= 0.0 && next <= 1.0) {
            x = next;
            left -= h;
            continue;
        }
        // The step leaves [0, 1]: find the sub-step that lands on the boundary.
        const double edge = next < 0.0 ? 0.0 : 1.0;
        double lo = 0.0;
        double hi = h;
        for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((rk4(x, sign * mid) - edge) * heading < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x = edge;
        left -= 0.5 * (lo + hi);
    }
    return x;
}

double CharacteristicFlow::crossing_time(int j, double x) const {
    if (x < 0.0 || x > 1.0) {
        throw PreconditionError("crossing_time: x must lie in [0, 1]");
    }
    const bool minus = spec_.is_minus(j);
    const double target = minus ? 1.0 : 0.0;
    const Speed& speed = spec_.speed(j);
    if (speed.is_constant()) {
        return std::abs(target - x) / speed.value(0.5);
    }
    double slowest = speed.value(0.0);
    for (int s = 0; s <= 256; ++s) {
        slowest = std::min(slowest, speed.value(s / 256.0));
    }
    double lo = 0.0;
    double hi = 1.1 * std::abs(target - x) / slowest + h_;
    // Distance still to travel; positive before the crossing.
    auto remaining = [&](double t) {
        const double pos = flow_rk4(j, t, 0.0, x);
        return minus ? target - pos : pos - target;
    };
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (remaining(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

OmegaBoundary omega_boundary(const SystemSpec& spec, const CharacteristicFlow& flow, double T, int samples) {
    const int c = spec.k() - spec.m() + 1;
    if (c < 1) {
        throw PreconditionError("omega_boundary requires k >= m");
    }
    const double tau_c = spec.tau(c);
    if (T < tau_c) {
        throw DomainError("omega_boundary: T below tau_" + std::to_string(c) + ", curve exits through t < 0");
    }
    OmegaBoundary out;
    out.T = T;
    out.component = c;
    out.intercept = T - tau_c;
    out.map = std::make_shared<const TravelMap>(flow.travel(c));
    samples = std::max(samples, 2);
    out.x.resize(samples);
    out.t.resize(samples);
    for (int s = 0; s < samples; ++s) {
        out.x[s] = static_cast<double>(s) / (samples - 1);
        out.t[s] = out(out.x[s]);
    }
    return out;
}

}  // namespace hyperctrl
