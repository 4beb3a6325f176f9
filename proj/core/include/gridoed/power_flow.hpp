#pragma once

#include <optional>

#include "gridoed/grid_model.hpp"

namespace gridoed {

struct PFSolution {
    StateVector x;
    double residual_norm = 0.0;  // inf-norm of S(x,y) - (u-d)
    int iterations = 0;
    bool converged = false;
};

struct PowerFlowOptions {
    double tolerance = 1e-8;  // inf-norm, p.u.
    int max_iterations = 50;
    int max_step_halvings = 10;
    bool throw_on_failure = true;  // false: report converged=false instead
};

/// Newton solve of S(x,y) = u - d for x. Cold start is the flat profile
/// (v = slack magnitude, theta = 0). Throws SingularJacobian when a Newton
/// step is unsolvable and NonConvergence past the iteration cap, unless
/// throw_on_failure is cleared.
PFSolution solve_power_flow(const GridModel& model, const LineParams& y,
                            const InputVector& u,
                            const std::optional<StateVector>& warm_start = {},
                            const PowerFlowOptions& options = {});

}  // namespace gridoed
