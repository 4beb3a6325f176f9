#include "gridoed/estimator.hpp"

#include <cmath>
#include <string>

#include "gridoed/oed.hpp"
#include "gridoed/power_flow.hpp"

namespace gridoed {

Belief Belief::isotropic(LineParams mean, double prior_variance) {
    if (prior_variance <= 0.0) throw OutOfRange("prior variance must be positive");
    Belief b;
    const int n = static_cast<int>(mean.values.size());
    b.mean = std::move(mean);
    b.information = Eigen::MatrixXd::Identity(n, n) / prior_variance;
    return b;
}

Eigen::MatrixXd Belief::covariance() const {
    Eigen::LLT<Eigen::MatrixXd> llt(information);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("belief information matrix is singular");
    return llt.solve(Eigen::MatrixXd::Identity(information.rows(), information.cols()));
}

double Belief::trace_covariance(double min_information) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(information, Eigen::EigenvaluesOnly);
    double trace = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = std::max(es.eigenvalues()[i], min_information);
        if (lam <= 0.0)
            throw NotPositiveDefinite("belief information matrix is singular");
        trace += 1.0 / lam;
    }
    return trace;
}

void Belief::validate() const {
    if (information.rows() != information.cols())
        throw DimensionMismatch("information matrix must be square");
    if (information.rows() != mean.values.size())
        throw DimensionMismatch("information size does not match the mean");
    const double scale = std::max(1.0, information.cwiseAbs().maxCoeff());
    if ((information - information.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw NotPositiveDefinite("information matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(information,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw NotPositiveDefinite("information matrix has negative eigenvalues");
}

MLEOutcome mle_update(const GridModel& model, const Belief& belief,
                      const InputVector& u_hat, const MeasurementVector& eta,
                      const Eigen::VectorXd& noise_diag, const MLEOptions& options) {
    const int nx = model.state_size();
    const int ny = model.param_size();
    const int nm = model.measurement_size();

    belief.validate();
    if (belief.mean.values.size() != ny)
        throw DimensionMismatch("belief mean has wrong length");
    if (u_hat.values.size() != model.input_size())
        throw DimensionMismatch("input vector has wrong length");
    if (eta.values.size() != nm)
        throw DimensionMismatch("measurement vector has wrong length for this topology");
    if (noise_diag.size() != nm)
        throw DimensionMismatch("noise diagonal has wrong length");
    if (noise_diag.minCoeff() <= 0.0) throw OutOfRange("noise variances must be positive");

    const Eigen::VectorXd weights = noise_diag.cwiseInverse();
    const Eigen::VectorXd rhs = u_hat.values - model.demand_vector();
    const Eigen::MatrixXd& prior_info = belief.information;
    const Eigen::VectorXd& prior_mean = belief.mean.values;

    // Primary start: the power-flow state for the applied input at the
    // current estimate, parameters at the prior mean.
    Eigen::VectorXd z0(nx + ny);
    {
        PowerFlowOptions pf;
        pf.throw_on_failure = false;
        const PFSolution sol = solve_power_flow(model, belief.mean, u_hat, {}, pf);
        z0.head(nx) = (sol.converged ? sol.x : model.flat_state()).values;
        z0.tail(ny) = prior_mean;
    }

    // Alternative start from the data: the state block of eta measures x
    // directly, and given that state each line's (g, b) solves a 2x2 linear
    // system against the measured flows. Lines with too little excitation
    // keep the prior mean.
    Eigen::VectorXd z1;
    if (options.data_start) {
        StateVector xm;
        xm.slack_voltage = model.grid().slack_voltage;
        xm.values = eta.values.head(nx);
        bool usable = true;
        for (int i = 0; i < nx && usable; i += 2)
            usable = xm.values[i] > 0.1 && std::abs(xm.values[i + 1]) < M_PI;
        if (usable) {
            LineParams y1{prior_mean};
            for (int i = 0; i < model.n_lines(); ++i) {
                const auto& line = model.grid().lines[i];
                const double vk = model.v(xm, line.from_bus);
                const double vl = model.v(xm, line.to_bus);
                const double dth =
                    model.theta(xm, line.from_bus) - model.theta(xm, line.to_bus);
                const double A = vk * vk - vk * vl * std::cos(dth);
                const double B = vk * vl * std::sin(dth);
                const double den = A * A + B * B;
                if (den < 1e-4) continue;
                const double p = eta.values[nx + 2 * i];
                const double q = eta.values[nx + 2 * i + 1];
                y1.g(i) = (A * p - B * q) / den;
                y1.b(i) = -(A * q + B * p) / den;
            }
            z1.resize(nx + ny);
            z1.head(nx) = xm.values;
            z1.tail(ny) = y1.values;
        }
    }

    auto split = [&](const Eigen::VectorXd& z) {
        StateVector x;
        x.values = z.head(nx);
        x.slack_voltage = model.grid().slack_voltage;
        LineParams y{z.tail(ny)};
        return std::make_pair(x, y);
    };

    auto raw_objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
        const auto [x, y] = split(z);
        const MeasurementVector m = model.measurement(x, y);
        const Eigen::VectorXd r = m.values - eta.values;
        const Eigen::VectorXd dy = y.values - prior_mean;
        const double f = 0.5 * r.dot(weights.cwiseProduct(r)) + 0.5 * dy.dot(prior_info * dy);
        if (grad) {
            const GridJacobians J = model.jacobians(x, y);
            grad->resize(nx + ny);
            const Eigen::VectorXd wr = weights.cwiseProduct(r);
            grad->head(nx) = J.M_x.transpose() * wr;
            grad->tail(ny) = J.M_y.transpose() * wr + prior_info * dy;
        }
        return f;
    };

    const double scale = std::max(1.0, std::abs(raw_objective(z0, nullptr)));

    nlp::Problem prob;
    prob.dimension = nx + ny;
    prob.initial_point = z0;
    prob.objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
        const double f = raw_objective(z, grad);
        if (grad) *grad /= scale;
        return f / scale;
    };
    // Gauss-Newton curvature J^T W J plus the prior block
    prob.objective_hessian = [&](const Eigen::VectorXd& z, Eigen::MatrixXd& H) {
        const auto [x, y] = split(z);
        const GridJacobians J = model.jacobians(x, y);
        Eigen::MatrixXd Jfull(nm, nx + ny);
        Jfull.leftCols(nx) = J.M_x;
        Jfull.rightCols(ny) = J.M_y;
        H.noalias() = Jfull.transpose() * weights.asDiagonal() * Jfull;
        H.bottomRightCorner(ny, ny) += prior_info;
        H /= scale;
    };
    prob.n_eq = nx;
    prob.equalities = [&](const Eigen::VectorXd& z, Eigen::VectorXd& c, Eigen::MatrixXd* jac) {
        const auto [x, y] = split(z);
        c = model.residual_injection(x, y) - rhs;
        if (jac) {
            const GridJacobians J = model.jacobians(x, y);
            jac->resize(nx, nx + ny);
            jac->leftCols(nx) = J.S_x;
            jac->rightCols(ny) = J.S_y;
        }
    };

    // relaxed state envelope: estimation must not fail on transient bound
    // violations of the applied operating point
    prob.lower_bounds = Eigen::VectorXd::Constant(nx + ny, -std::numeric_limits<double>::infinity());
    prob.upper_bounds = Eigen::VectorXd::Constant(nx + ny, std::numeric_limits<double>::infinity());
    for (const auto& bus : model.grid().buses) {
        if (model.is_slack(bus.index)) continue;
        const int slot = 2 * model.bus_position(bus.index);
        prob.lower_bounds[slot] = bus.v_min * (1.0 - options.bound_relaxation);
        prob.upper_bounds[slot] = bus.v_max * (1.0 + options.bound_relaxation);
        prob.lower_bounds[slot + 1] = -M_PI;
        prob.upper_bounds[slot + 1] = M_PI;
    }
    // keep the parameters in the physical orthant: line conductances are
    // non-negative, and susceptances stay non-positive when the prior says
    // the case follows the inductive-line convention. Weakly excited
    // snapshots otherwise drag parameters across the sign boundary and the
    // information recursion cannot recover from it.
    if (options.sign_constraints) {
        bool inductive = true;
        for (int i = 0; i < model.n_lines(); ++i)
            inductive = inductive && belief.mean.b(i) <= 0.0;
        for (int i = 0; i < model.n_lines(); ++i) {
            prob.lower_bounds[nx + i] = 0.0;
            if (inductive) prob.upper_bounds[nx + model.n_lines() + i] = 0.0;
        }
    }

    nlp::Solution sol;
    bool have = false;
    auto attempt = [&](const Eigen::VectorXd& start) {
        prob.initial_point = start;
        try {
            nlp::Solution cand = nlp::solve(prob, options.nlp);
            if (cand.status == nlp::Status::failure) return;
            if (!have || cand.objective_value < sol.objective_value) {
                sol = std::move(cand);
                have = true;
            }
        } catch (const EvaluationFailure&) {
        }
    };
    attempt(z0);
    if (z1.size() == prob.dimension) attempt(z1);
    if (!have) throw NLPFailure("MLE solve failed from every start");

    MLEOutcome out;
    auto [xs, y_plus] = split(sol.z);
    out.x = xs;
    out.objective = sol.objective_value * scale;
    out.kkt_residual = sol.kkt_residual;
    out.status = sol.status;

    // carry the Fisher matrix at the solution forward as the new belief
    const Eigen::MatrixXd Mp = sensitivity(model, xs, y_plus, options.sensitivity_mode);
    Eigen::MatrixXd F = prior_info + Mp.transpose() * weights.asDiagonal() * Mp;
    F = 0.5 * (F + F.transpose()).eval();

    out.posterior.mean = y_plus;
    out.posterior.information = F;
    out.posterior.validate();
    return out;
}

}  // namespace gridoed
