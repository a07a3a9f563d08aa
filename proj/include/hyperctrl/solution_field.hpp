#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hyperctrl/grid.hpp"

namespace hyperctrl {

enum class DomainKind { rectangle, omega, omega_complement };

/**
 * @brief Space-time field of all n components on a Discretization.
 *
 * Component i (1-based) stores (Nt + 1) x size_i values, level-major. Nodes
 * outside the domain (for Omega solves) are flagged inactive and hold 0.
 */
class SolutionField {
public:
    SolutionField(DiscretizationPtr disc, DomainKind domain = DomainKind::rectangle);

    const Discretization& disc() const { return *disc_; }
    const DiscretizationPtr& disc_ptr() const { return disc_; }
    DomainKind domain() const { return domain_; }
    int n() const { return static_cast<int>(values_.size()); }
    int levels() const { return disc_->time().levels(); }
    int nodes(int i) const { return disc_->state().comp(i).size(); }

    double operator()(int i, int level, int p) const { return values_[idx(i)][flat(i, level, p)]; }
    double& operator()(int i, int level, int p) { return values_[idx(i)][flat(i, level, p)]; }
    std::vector<double>& data(int i) { return values_[idx(i)]; }
    const std::vector<double>& data(int i) const { return values_[idx(i)]; }

    bool active(int i, int level, int p) const {
        return active_.empty() || active_[idx(i)][flat(i, level, p)] != 0;
    }
    void set_active(std::vector<std::vector<std::uint8_t>> mask) { active_ = std::move(mask); }
    const std::vector<std::vector<std::uint8_t>>& active_mask() const { return active_; }

    /** @brief State vector (concatenated component nodes) at a level. */
    Eigen::VectorXd time_slice(int level) const;
    /** @brief Values of component i along x = 0 (side 0) or x = 1 (side 1) at every level. */
    Eigen::VectorXd boundary_trace(int i, int side) const;
    /** @brief Values of component i at a fixed x at every level (linear in y). */
    Eigen::VectorXd space_slice(int i, double x) const;
    /** @brief Piecewise-linear evaluation in (t, y). */
    double sample(int i, double t, double x) const;

    struct YNorm {
        /** @brief max over x of the L2-in-t norm. */
        double max_x_l2t = 0.0;
        /** @brief max over t of the L2-in-x norm. */
        double max_t_l2x = 0.0;
        double total() const { return max_x_l2t + max_t_l2x; }
    };
    /** @brief Norm of the broad-solution class evaluated on the grid (all components). */
    YNorm y_norm() const;
    /** @brief max |value| over active nodes. */
    double max_abs() const;

private:
    std::size_t idx(int i) const { return static_cast<std::size_t>(i - 1); }
    std::size_t flat(int i, int level, int p) const {
        return static_cast<std::size_t>(level) * static_cast<std::size_t>(nodes(i)) + static_cast<std::size_t>(p);
    }
    DiscretizationPtr disc_;
    DomainKind domain_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<std::uint8_t>> active_;
};

}  // namespace hyperctrl
