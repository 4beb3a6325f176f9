#pragma once

#include <Eigen/Dense>
#include <optional>

#include "gridoed/estimator.hpp"
#include "gridoed/grid_model.hpp"
#include "gridoed/nlp.hpp"

namespace gridoed {

/// Fisher information F = Sigma_0^{-1} + M_p^T Sigma^{-1} M_p together with
/// its inverse (the predicted parameter covariance) and the cached trace.
struct FisherMatrix {
    Eigen::MatrixXd F;
    Eigen::MatrixXd covariance;  // F^{-1}
    double trace_inverse = 0.0;
};

/// Parameter sensitivity of the measurement along the power-flow manifold,
/// evaluated at (x, y_hat): the total derivative dM/dy with the state
/// eliminated through dS/dx. Shape m x 2|L|.
Eigen::MatrixXd sensitivity(const GridModel& model, const StateVector& x,
                            const LineParams& y_hat,
                            SensitivityMode mode = SensitivityMode::full);

/// Builds F from prior information and a sensitivity block; the trace of
/// the inverse goes through a symmetric positive-definite factorization.
/// Throws NotPositiveDefinite when F is singular.
FisherMatrix fisher(const Eigen::MatrixXd& prior_information, const Eigen::MatrixXd& M_p,
                    const Eigen::VectorXd& noise_diag);

enum class DecisionKind { opf, oed, oed_opf };

struct DecisionSpec {
    DecisionKind kind = DecisionKind::opf;
    double rho = 1e-4;                 // oed_opf only
    double input_change_weight = 0.1;  // oed only
    Belief belief;                     // prior information and y_hat
    InputVector previous_input;        // p^{g-}
    Eigen::VectorXd noise_diag;
    SensitivityMode sensitivity_mode = SensitivityMode::full;
};

struct DecisionWarmStart {
    StateVector x;
    InputVector u;
};

struct DecisionResult {
    StateVector x;
    InputVector u;
    double cost = 0.0;     // C(u*) including the slack generator, $/h
    double trace_v = 0.0;  // Tr(F^{-1}) at the solution
    nlp::Status status = nlp::Status::failure;
    double kkt_residual = 0.0;
};

/// Solves one of the three decision problems over (x, u): cost-only OPF,
/// pure experiment design, or the rho-weighted combination, subject to
/// S(x, y_hat) = u - d and the operating envelope H(x,u) <= 0.
DecisionResult solve_decision(const GridModel& model, const DecisionSpec& spec,
                              const std::optional<DecisionWarmStart>& warm = {},
                              const nlp::Options& options = {});

/// Total generation cost per hour: sum of alpha_i P_i^2 + beta_i P_i over
/// all generators, with power in MW (p.u. scaled by base). The slack
/// generator's dependent injection is passed in from the solved state.
double generation_cost(const GridCase& grid, const InputVector& u, double slack_p);

/// Trace of F(x)^{-1} and its gradient with respect to x, via the identity
/// dTr(F^{-1}) = -Tr(F^{-1} dF F^{-1}) with dM_p by central differences.
struct TraceEval {
    double value = 0.0;
    Eigen::VectorXd grad_x;
};
TraceEval trace_inverse_with_gradient(const GridModel& model, const StateVector& x,
                                      const LineParams& y_hat,
                                      const Eigen::MatrixXd& prior_information,
                                      const Eigen::VectorXd& noise_diag,
                                      SensitivityMode mode, bool want_gradient);

}  // namespace gridoed
