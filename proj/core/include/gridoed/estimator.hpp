#pragma once

#include <Eigen/Dense>

#include "gridoed/grid_model.hpp"
#include "gridoed/nlp.hpp"

namespace gridoed {

/// Gaussian parameter belief kept in information form: a vacuous prior
/// (variance 1e20) becomes a near-zero PSD information matrix instead of a
/// hostile 1e20-scaled covariance.
struct Belief {
    LineParams mean;
    Eigen::MatrixXd information;  // Sigma_0^{-1}, symmetric PSD, size 2|L|

    static Belief isotropic(LineParams mean, double prior_variance);

    Eigen::MatrixXd covariance() const;  // throws NotPositiveDefinite
    /// Tr(Sigma_0) through an eigendecomposition. Eigenvalues below
    /// `min_information` are clamped to it: the information can never drop
    /// below the initial prior in any direction, so a rank-deficient update
    /// still has a well-defined (prior-sized) variance there.
    double trace_covariance(double min_information = 0.0) const;
    void validate() const;  // symmetry 1e-10, eigenvalues >= 0
};

enum class SensitivityMode {
    full,          // dM/dy = dM/dy - (dM/dx)(dS/dx)^{-1}(dS/dy)
    paper_strict,  // omit the direct dM/dy term
};

struct MLEOptions {
    nlp::Options nlp;
    SensitivityMode sensitivity_mode = SensitivityMode::full;
    /// State bounds in the estimation problem are relaxed this far beyond
    /// the nominal envelope so transient bound violations in the applied
    /// operating point never abort estimation.
    double bound_relaxation = 0.5;
    /// Also polish from a data-driven start (measured state, per-line linear
    /// admittance solve) and keep whichever local solution fits better. The
    /// one-shot likelihood is nearly flat along weakly excited directions;
    /// a single start can stall in a poor basin there.
    bool data_start = true;
    /// Constrain estimates to the physical orthant (g >= 0; b <= 0 under the
    /// case's inductive-line convention).
    bool sign_constraints = true;

    MLEOptions() { nlp.tol = 1e-9; }
};

struct MLEOutcome {
    StateVector x;     // x_s, the solved state at the estimate
    Belief posterior;  // mean = y^+, information = Fisher at (x_s, u, y^+)
    double objective = 0.0;
    double kkt_residual = 0.0;
    nlp::Status status = nlp::Status::failure;
};

/// One step of regularized maximum-likelihood estimation: fits (x, y) to a
/// measurement under the power-flow constraint S(x,y) = u - d, then carries
/// the Fisher matrix at the solution forward as the new belief information.
MLEOutcome mle_update(const GridModel& model, const Belief& belief,
                      const InputVector& u_hat, const MeasurementVector& eta,
                      const Eigen::VectorXd& noise_diag,
                      const MLEOptions& options = {});

}  // namespace gridoed
