#include "hyperctrl/solution_field.hpp"

#include <algorithm>
#include <cmath>

#include "hyperctrl/errors.hpp"

namespace hyperctrl {

SolutionField::SolutionField(DiscretizationPtr disc, DomainKind domain) : disc_(std::move(disc)), domain_(domain) {
    const int n = disc_->spec().n();
    values_.resize(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        values_[idx(i)].assign(static_cast<std::size_t>(levels()) * static_cast<std::size_t>(nodes(i)), 0.0);
    }
}

Eigen::VectorXd SolutionField::time_slice(int level) const {
    if (level < 0 || level >= levels()) {
        throw PreconditionError("time_slice: level out of range");
    }
    const auto& grid = disc_->state();
    Eigen::VectorXd v(grid.dim());
    for (int i = 1; i <= n(); ++i) {
        for (int p = 0; p < nodes(i); ++p) {
            v(grid.offset(i) + p) = (*this)(i, level, p);
        }
    }
    return v;
}

Eigen::VectorXd SolutionField::boundary_trace(int i, int side) const {
    const int p = side == 0 ? 0 : nodes(i) - 1;
    Eigen::VectorXd v(levels());
    for (int l = 0; l < levels(); ++l) {
        v(l) = (*this)(i, l, p);
    }
    return v;
}

Eigen::VectorXd SolutionField::space_slice(int i, double x) const {
    const Stencil s = disc_->state().comp(i).locate_x(x);
    Eigen::VectorXd v(levels());
    for (int l = 0; l < levels(); ++l) {
        const double a = (*this)(i, l, s.a);
        v(l) = s.theta == 0.0 ? a : (1.0 - s.theta) * a + s.theta * (*this)(i, l, s.a + 1);
    }
    return v;
}

double SolutionField::sample(int i, double t, double x) const {
    const TimeGrid& tg = disc_->time();
    double r = (t - tg.t0) / tg.dt;
    r = std::clamp(r, 0.0, static_cast<double>(tg.Nt));
    int a = static_cast<int>(std::floor(r));
    double theta = r - a;
    if (a >= tg.Nt) {
        a = tg.Nt;
        theta = 0.0;
    }
    const Stencil s = disc_->state().comp(i).locate_x(x);
    auto at_level = [&](int l) {
        const double v = (*this)(i, l, s.a);
        return s.theta == 0.0 ? v : (1.0 - s.theta) * v + s.theta * (*this)(i, l, s.a + 1);
    };
    const double v0 = at_level(a);
    if (theta < 1e-12) {
        return v0;
    }
    return (1.0 - theta) * v0 + theta * at_level(a + 1);
}

SolutionField::YNorm SolutionField::y_norm() const {
    YNorm out;
    const TimeGrid& tg = disc_->time();
    const Eigen::VectorXd wt = tg.weights();
    for (int l = 0; l < levels(); ++l) {
        double sum = 0.0;
        for (int i = 1; i <= n(); ++i) {
            const auto& g = disc_->state().comp(i);
            for (int p = 0; p < nodes(i); ++p) {
                const double v = (*this)(i, l, p);
                sum += g.weight(p) * v * v;
            }
        }
        out.max_t_l2x = std::max(out.max_t_l2x, std::sqrt(sum));
    }
    // L2 in t at fixed x: every component is sampled at its own nodes.
    for (int i = 1; i <= n(); ++i) {
        for (int p = 0; p < nodes(i); ++p) {
            double sum = 0.0;
            for (int l = 0; l < levels(); ++l) {
                const double v = (*this)(i, l, p);
                sum += wt(l) * v * v;
            }
            out.max_x_l2t = std::max(out.max_x_l2t, std::sqrt(sum));
        }
    }
    return out;
}

double SolutionField::max_abs() const {
    double out = 0.0;
    for (const auto& comp : values_) {
        for (double v : comp) {
            out = std::max(out, std::abs(v));
        }
    }
    return out;
}

}  // namespace hyperctrl
