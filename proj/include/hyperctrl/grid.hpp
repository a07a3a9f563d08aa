#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "hyperctrl/characteristics.hpp"
#include "hyperctrl/system_model.hpp"

namespace hyperctrl {

/** @brief Uniform time levels t_n = t0 + n dt, n = 0..Nt. */
struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    int Nt = 0;

    double t(int n) const { return t0 + n * dt; }
    double t1() const { return t0 + Nt * dt; }
    int levels() const { return Nt + 1; }
    /** @brief Trapezoid weights for L2(t0, t1). */
    Eigen::VectorXd weights() const;
    /**
     * @brief Grid on [t0, t1] with about N cells per unit time.
     *
     * When (t1 - t0) N is an integer up to 1e-9 the step is exactly 1/N.
     */
    static TimeGrid make(double t0, double t1, int N);
};

/** @brief Interpolation stencil: value = (1 - theta) v[a] + theta v[a + 1]. */
struct Stencil {
    int a = 0;
    double theta = 0.0;
};

/**
 * @brief Nodes of one component on its travel coordinate y = int_0^x 1/lambda.
 *
 * Regular nodes sit at y = p dt for p = 0..P. When tau is not a multiple of dt
 * an end node at y = tau (x = 1) follows.
 */
class ComponentGrid {
public:
    ComponentGrid(const TravelMap& map, double dt);

    int regular() const { return P_; }
    bool has_end() const { return end_; }
    int size() const { return P_ + 1 + (end_ ? 1 : 0); }
    int last() const { return size() - 1; }
    double dt() const { return dt_; }
    double tau() const { return tau_; }
    /** @brief Fraction of a step between the last regular node and x = 1 (0 when aligned). */
    double remainder() const { return rem_; }
    double y(int p) const { return p <= P_ ? p * dt_ : tau_; }
    double x(int p) const { return x_[static_cast<std::size_t>(p)]; }
    /** @brief L2(0, 1) trapezoid weight of node p (in x). */
    double weight(int p) const { return w_[static_cast<std::size_t>(p)]; }
    Stencil locate_y(double y) const;
    Stencil locate_x(double x) const { return locate_y(map_->y(x)); }
    const TravelMap& map() const { return *map_; }

private:
    const TravelMap* map_;
    double dt_;
    double tau_;
    int P_;
    bool end_;
    double rem_;
    std::vector<double> x_;
    std::vector<double> w_;
};

/** @brief All component grids; a state vector is their concatenation in component order. */
class StateGrid {
public:
    StateGrid() = default;
    StateGrid(const CharacteristicFlow& flow, double dt);

    int components() const { return static_cast<int>(grids_.size()); }
    /** @brief Grid of component i (1-based). */
    const ComponentGrid& comp(int i) const { return grids_[static_cast<std::size_t>(i - 1)]; }
    int offset(int i) const { return offsets_[static_cast<std::size_t>(i - 1)]; }
    int dim() const { return dim_; }
    Eigen::VectorXd weights() const;
    /** @brief Nodal samples of f(i, x) as a state vector. */
    Eigen::VectorXd sample(const std::function<double(int, double)>& f) const;
    /** @brief Piecewise-linear (in y) evaluation of a state vector. */
    double evaluate(const Eigen::VectorXd& v, int i, double x) const;

private:
    std::vector<ComponentGrid> grids_;
    std::vector<int> offsets_;
    int dim_ = 0;
};

/** @brief Space-time discretization of one solve window. */
class Discretization {
public:
    Discretization(const SystemSpec& spec, double t0, double t1, int N);

    const SystemSpec& spec() const { return spec_; }
    const CharacteristicFlow& flow() const { return *flow_; }
    const TimeGrid& time() const { return time_; }
    const StateGrid& state() const { return state_; }
    int resolution() const { return N_; }

private:
    SystemSpec spec_;
    std::shared_ptr<CharacteristicFlow> flow_;
    TimeGrid time_;
    StateGrid state_;
    int N_;
};

using DiscretizationPtr = std::shared_ptr<const Discretization>;

DiscretizationPtr make_discretization(const SystemSpec& spec, double t0, double t1, int N);

/**
 * @brief Component traces on the time grid of a window.
 *
 * Row r holds component `first + r` (1-based) at every level.
 */
struct Trace {
    TimeGrid grid;
    int first = 1;
    Eigen::MatrixXd values;

    double at(int i, double t) const;
    /** @brief L2 norm over the window, all rows. */
    double norm() const;
    /** @brief L2 inner product with a trace on the same grid. */
    double dot(const Trace& other) const;
    static Trace zeros(const TimeGrid& grid, int first, int count);
};

using StateFn = std::function<double(int, double)>;
using TraceFn = std::function<double(int, double)>;
using SourceFn = std::function<double(int, double, double)>;

/** @brief Wraps a state vector as a function (i, x) via linear interpolation in y. */
StateFn state_function(DiscretizationPtr disc, const Eigen::VectorXd& v);
/** @brief Wraps a Trace as a function (i, t) via linear interpolation in t. */
TraceFn trace_function(const Trace& trace);

}  // namespace hyperctrl
