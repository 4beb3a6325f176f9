#pragma once

#include <Eigen/Dense>
#include <functional>

namespace gridoed::nlp {

/// Smooth constrained program: min f(z) s.t. c(z) = 0, h(z) <= 0,
/// lb <= z <= ub. Callables fill the gradient/Jacobian only when the
/// output pointer is non-null.
struct Problem {
    int dimension = 0;
    std::function<double(const Eigen::VectorXd& z, Eigen::VectorXd* grad)> objective;

    int n_eq = 0;
    std::function<void(const Eigen::VectorXd& z, Eigen::VectorXd& c, Eigen::MatrixXd* jac)>
        equalities;
    int n_ineq = 0;
    std::function<void(const Eigen::VectorXd& z, Eigen::VectorXd& h, Eigen::MatrixXd* jac)>
        inequalities;

    /// Optional PSD approximation of the objective Hessian (e.g. Gauss-Newton
    /// for least-squares objectives). When set, the inner loop takes damped
    /// Newton steps instead of BFGS.
    std::function<void(const Eigen::VectorXd& z, Eigen::MatrixXd& H)> objective_hessian;

    Eigen::VectorXd initial_point;
    // Optional box; empty vectors mean unbounded. Folded into the
    // inequality machinery internally.
    Eigen::VectorXd lower_bounds;
    Eigen::VectorXd upper_bounds;
};

struct Options {
    double tol = 1e-6;  // KKT tolerance (stationarity scaled by gradient size)
    int max_outer = 50;
    int max_inner = 400;        // quasi-Newton steps per outer iteration
    int max_total_inner = 6000;
    double initial_penalty = 10.0;
    double penalty_growth = 10.0;
    double max_penalty = 1e12;
    bool check_gradients = false;  // debug: validate caller derivatives by FD
};

enum class Status { optimal, max_iter, failure };

struct Solution {
    Eigen::VectorXd z;
    double objective_value = 0.0;
    double kkt_residual = 0.0;
    Status status = Status::failure;
    Eigen::VectorXd eq_multipliers;
    Eigen::VectorXd ineq_multipliers;   // caller inequalities only
    Eigen::VectorXd bound_multipliers;  // upper rows then lower rows
    int outer_iterations = 0;
    int inner_iterations = 0;
};

/// Augmented-Lagrangian solve to local optimality. Deterministic for
/// identical inputs and options; each call owns its workspace.
Solution solve(const Problem& problem, const Options& options = {});

}  // namespace gridoed::nlp
