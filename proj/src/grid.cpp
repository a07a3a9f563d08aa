#include "hyperctrl/grid.hpp"

#include <algorithm>
#include <cmath>

#include "hyperctrl/errors.hpp"

namespace hyperctrl {

Eigen::VectorXd TimeGrid::weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(levels(), dt);
    w(0) *= 0.5;
    w(Nt) *= 0.5;
    return w;
}

TimeGrid TimeGrid::make(double t0, double t1, int N) {
    if (N < 1) {
        throw ConfigError("grid resolution must be positive");
    }
    if (!(t1 > t0)) {
        throw PreconditionError("time window must have t1 > t0");
    }
    const double cells = (t1 - t0) * N;
    const double rounded = std::round(cells);
    TimeGrid g;
    g.t0 = t0;
    if (std::abs(cells - rounded) < 1e-9 * std::max(1.0, cells) && rounded >= 1.0) {
        g.Nt = static_cast<int>(rounded);
        g.dt = 1.0 / N;
    } else {
        g.Nt = std::max(1, static_cast<int>(std::ceil(cells)));
        g.dt = (t1 - t0) / g.Nt;
    }
    return g;
}

ComponentGrid::ComponentGrid(const TravelMap& map, double dt) : map_(&map), dt_(dt), tau_(map.tau()) {
    const double ratio = tau_ / dt_;
    P_ = static_cast<int>(std::floor(ratio + 1e-9));
    rem_ = ratio - P_;
    if (rem_ < 1e-9) {
        rem_ = 0.0;
    }
    end_ = rem_ > 0.0;
    const int n = size();
    x_.resize(static_cast<std::size_t>(n));
    w_.resize(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        x_[static_cast<std::size_t>(p)] = (p == n - 1) ? 1.0 : (p == 0 ? 0.0 : map.x(y(p)));
    }
    // Trapezoid in y with dx = lambda dy.
    std::vector<double> hy(static_cast<std::size_t>(n), 0.0);
    for (int p = 0; p + 1 < n; ++p) {
        const double h = y(p + 1) - y(p);
        hy[static_cast<std::size_t>(p)] += 0.5 * h;
        hy[static_cast<std::size_t>(p + 1)] += 0.5 * h;
    }
    for (int p = 0; p < n; ++p) {
        w_[static_cast<std::size_t>(p)] = hy[static_cast<std::size_t>(p)] * map.lambda(x(p));
    }
}

Stencil ComponentGrid::locate_y(double yq) const {
    if (yq <= 0.0) {
        return {0, 0.0};
    }
    if (yq >= tau_) {
        return {last(), 0.0};
    }
    const double r = yq / dt_;
    int a = static_cast<int>(std::floor(r));
    double theta = r - a;
    if (theta > 1.0 - 1e-10) {
        ++a;
        theta = 0.0;
    } else if (theta < 1e-10) {
        theta = 0.0;
    }
    if (a >= P_) {
        if (!end_ || a > P_) {
            return {std::min(a, last()), 0.0};
        }
        // Between the last regular node and the end node.
        theta = (yq - P_ * dt_) / (tau_ - P_ * dt_);
        if (theta < 1e-10) {
            theta = 0.0;
        }
        return {P_, theta};
    }
    return {a, theta};
}

StateGrid::StateGrid(const CharacteristicFlow& flow, double dt) {
    const int n = flow.spec().n();
    int offset = 0;
    for (int i = 1; i <= n; ++i) {
        grids_.emplace_back(flow.travel(i), dt);
        offsets_.push_back(offset);
        offset += grids_.back().size();
    }
    dim_ = offset;
}

Eigen::VectorXd StateGrid::weights() const {
    Eigen::VectorXd w(dim_);
    for (int i = 1; i <= components(); ++i) {
        const auto& g = comp(i);
        for (int p = 0; p < g.size(); ++p) {
            w(offset(i) + p) = g.weight(p);
        }
    }
    return w;
}

Eigen::VectorXd StateGrid::sample(const std::function<double(int, double)>& f) const {
    Eigen::VectorXd v(dim_);
    for (int i = 1; i <= components(); ++i) {
        const auto& g = comp(i);
        for (int p = 0; p < g.size(); ++p) {
            v(offset(i) + p) = f(i, g.x(p));
        }
    }
    return v;
}

double StateGrid::evaluate(const Eigen::VectorXd& v, int i, double x) const {
    const auto& g = comp(i);
    const Stencil s = g.locate_x(x);
    const int base = offset(i);
    if (s.theta == 0.0) {
        return v(base + s.a);
    }
    return (1.0 - s.theta) * v(base + s.a) + s.theta * v(base + s.a + 1);
}

Discretization::Discretization(const SystemSpec& spec, double t0, double t1, int N)
    : spec_(spec), flow_(std::make_shared<CharacteristicFlow>(spec_)), time_(TimeGrid::make(t0, t1, N)), N_(N) {
    state_ = StateGrid(*flow_, time_.dt);
    for (int i = 1; i <= spec_.n(); ++i) {
        if (state_.comp(i).regular() < 4) {
            throw ConfigError("grid too coarse: component " + std::to_string(i) +
                              " has fewer than 4 cells across (0, 1); increase N");
        }
    }
}

DiscretizationPtr make_discretization(const SystemSpec& spec, double t0, double t1, int N) {
    return std::make_shared<Discretization>(spec, t0, t1, N);
}

double Trace::at(int i, double t) const {
    const int r = i - first;
    if (r < 0 || r >= values.rows()) {
        throw PreconditionError("Trace::at: component " + std::to_string(i) + " not stored");
    }
    const double s = (t - grid.t0) / grid.dt;
    if (s <= 0.0) {
        return values(r, 0);
    }
    if (s >= grid.Nt) {
        return values(r, grid.Nt);
    }
    int a = static_cast<int>(std::floor(s));
    double theta = s - a;
    if (theta < 1e-10) {
        return values(r, a);
    }
    if (theta > 1.0 - 1e-10) {
        return values(r, a + 1);
    }
    return (1.0 - theta) * values(r, a) + theta * values(r, a + 1);
}

double Trace::norm() const { return std::sqrt(std::max(0.0, dot(*this))); }

double Trace::dot(const Trace& other) const {
    if (other.values.rows() != values.rows() || other.values.cols() != values.cols()) {
        throw PreconditionError("Trace::dot: shape mismatch");
    }
    const Eigen::VectorXd w = grid.weights();
    double sum = 0.0;
    for (int r = 0; r < values.rows(); ++r) {
        sum += (values.row(r).transpose().array() * other.values.row(r).transpose().array() * w.array()).sum();
    }
    return sum;
}

Trace Trace::zeros(const TimeGrid& grid, int first, int count) {
    Trace t;
    t.grid = grid;
    t.first = first;
    t.values = Eigen::MatrixXd::Zero(count, grid.levels());
    return t;
}

StateFn state_function(DiscretizationPtr disc, const Eigen::VectorXd& v) {
    if (v.size() != disc->state().dim()) {
        throw PreconditionError("state vector does not match the grid");
    }
    return [disc, v](int i, double x) { return disc->state().evaluate(v, i, x); };
}

TraceFn trace_function(const Trace& trace) {
    return [trace](int i, double t) {
        if (i < trace.first || i >= trace.first + trace.values.rows()) {
            return 0.0;
        }
        return trace.at(i, t);
    };
}

}  // namespace hyperctrl
