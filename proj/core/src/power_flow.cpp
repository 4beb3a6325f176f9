#include "gridoed/power_flow.hpp"

#include <cmath>
#include <string>

namespace gridoed {

PFSolution solve_power_flow(const GridModel& model, const LineParams& y,
                            const InputVector& u,
                            const std::optional<StateVector>& warm_start,
                            const PowerFlowOptions& options) {
    if (y.values.size() != model.param_size())
        throw DimensionMismatch("line parameter vector has wrong length");
    if (u.values.size() != model.input_size())
        throw DimensionMismatch("input vector has wrong length");

    PFSolution sol;
    sol.x = warm_start ? *warm_start : model.flat_state();
    sol.x.slack_voltage = model.grid().slack_voltage;

    const Eigen::VectorXd rhs = u.values - model.demand_vector();

    auto residual = [&](const StateVector& x) -> Eigen::VectorXd {
        return model.residual_injection(x, y) - rhs;
    };

    Eigen::VectorXd r = residual(sol.x);
    double rnorm = r.lpNorm<Eigen::Infinity>();

    for (sol.iterations = 0; sol.iterations < options.max_iterations; ++sol.iterations) {
        if (!std::isfinite(rnorm)) break;
        if (rnorm <= options.tolerance) {
            sol.converged = true;
            break;
        }

        const Eigen::MatrixXd S_x = model.jacobians(sol.x, y).S_x;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(S_x);
        const Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
        if (diag.minCoeff() <= 1e-14 * std::max(1.0, diag.maxCoeff())) {
            if (options.throw_on_failure)
                throw SingularJacobian("power flow Jacobian is singular");
            sol.residual_norm = rnorm;
            return sol;
        }
        const Eigen::VectorXd step = lu.solve(-r);

        // step halving until the residual norm decreases
        double t = 1.0;
        StateVector trial = sol.x;
        bool accepted = false;
        for (int h = 0; h <= options.max_step_halvings; ++h) {
            trial.values = sol.x.values + t * step;
            const Eigen::VectorXd rt = residual(trial);
            const double tn = rt.lpNorm<Eigen::Infinity>();
            if (std::isfinite(tn) && tn < rnorm) {
                sol.x = trial;
                r = rt;
                rnorm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // stalled; reported below
    }

    if (rnorm <= options.tolerance) sol.converged = true;
    sol.residual_norm = rnorm;
    if (!sol.converged && options.throw_on_failure)
        throw NonConvergence("power flow did not converge: residual " +
                             std::to_string(rnorm) + " after " +
                             std::to_string(sol.iterations) + " iterations");
    return sol;
}

}  // namespace gridoed
