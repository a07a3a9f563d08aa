#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hyperctrl/broad_solver.hpp"

namespace hyperctrl::detail {

/** @brief Boundary rule at x = 0: which components are prescribed, and how. */
class BoundaryRule {
public:
    virtual ~BoundaryRule() = default;
    /** @brief Whether component i (1-based) at x = 0 on this level is prescribed by the rule. */
    virtual bool fed(int i, int level) const = 0;
    /** @brief Overwrites the prescribed entries of values[0..n-1] (x = 0 values on the level). */
    virtual void apply(int level, double* values) const = 0;
    /** @brief Infinity norm of the reflection map, used to size the Picard weight. */
    virtual double gain() const { return 1.0; }
};

/** @brief A group of nodes solved together, with its Picard weight exponent psi(t, x). */
struct Subset {
    std::string label;
    std::function<double(double, double)> psi;
};

/** @brief Everything the characteristic engine needs for one solve. */
struct EngineInput {
    DiscretizationPtr disc;
    /** @brief Use Sigma' - C^T (dual) instead of C (primal) as the coupling F. */
    bool dual = false;
    /** @brief F is evaluated at (t + shift, x). */
    double shift = 0.0;
    /** @brief Time direction of the integration path per node: -1 backward, +1 forward. */
    std::vector<std::vector<std::int8_t>> direction;
    const BoundaryRule* rule = nullptr;
    StateFn time_lo;
    StateFn time_hi;
    TraceFn x1;
    SourceFn source;
    /** @brief Subset index per node, -1 for inactive; empty means one subset containing every node. */
    std::vector<std::vector<std::int8_t>> region;
    std::vector<Subset> subsets;
    double tolerance = 1e-13;
    int max_iterations = 200;
    const SolutionField* initial_iterate = nullptr;
};

/** @brief Runs the weighted Picard sweeps subset by subset; fills w and returns the report. */
PicardReport run_engine(const EngineInput& input, SolutionField& w);

}  // namespace hyperctrl::detail
