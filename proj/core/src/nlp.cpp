#include "gridoed/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gridoed/errors.hpp"

namespace gridoed::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
    double f = 0.0;
    Eigen::VectorXd fgrad;
    Eigen::VectorXd c;
    Eigen::MatrixXd Jc;
    Eigen::VectorXd h;  // user inequalities then ub rows then lb rows
    Eigen::MatrixXd Jh; // user rows only; bound rows are +-e_i implicitly
    bool finite = false;
};

class AugLag {
public:
    AugLag(const Problem& p, const Options& opt) : p_(p), opt_(opt) {
        n_ = p.dimension;
        me_ = p.n_eq;
        mi_ = p.n_ineq;
        if (p.lower_bounds.size() != 0 && p.lower_bounds.size() != n_)
            throw DimensionMismatch("lower_bounds length mismatch");
        if (p.upper_bounds.size() != 0 && p.upper_bounds.size() != n_)
            throw DimensionMismatch("upper_bounds length mismatch");
        for (int i = 0; i < n_; ++i) {
            if (p.upper_bounds.size() && std::isfinite(p.upper_bounds[i])) ub_idx_.push_back(i);
            if (p.lower_bounds.size() && std::isfinite(p.lower_bounds[i])) lb_idx_.push_back(i);
        }
        mh_ = mi_ + static_cast<int>(ub_idx_.size() + lb_idx_.size());
        lambda_ = Eigen::VectorXd::Zero(me_);
        nu_ = Eigen::VectorXd::Zero(mh_);
        mu_ = opt.initial_penalty;
    }

    Evaluation evaluate(const Eigen::VectorXd& z, bool want_derivatives) const {
        Evaluation e;
        e.f = p_.objective(z, want_derivatives ? &e.fgrad : nullptr);
        if (me_ > 0) {
            e.c.resize(me_);
            p_.equalities(z, e.c, want_derivatives ? &e.Jc : nullptr);
            if (e.c.size() != me_) throw DimensionMismatch("equality value count mismatch");
        } else {
            e.c.resize(0);
        }
        e.h.resize(mh_);
        if (mi_ > 0) {
            Eigen::VectorXd hu(mi_);
            p_.inequalities(z, hu, want_derivatives ? &e.Jh : nullptr);
            if (hu.size() != mi_) throw DimensionMismatch("inequality value count mismatch");
            e.h.head(mi_) = hu;
        }
        int row = mi_;
        for (int i : ub_idx_) e.h[row++] = z[i] - p_.upper_bounds[i];
        for (int i : lb_idx_) e.h[row++] = p_.lower_bounds[i] - z[i];

        e.finite = std::isfinite(e.f) && e.c.allFinite() && e.h.allFinite();
        if (want_derivatives && e.finite) {
            e.finite = e.fgrad.allFinite() && (me_ == 0 || e.Jc.allFinite()) &&
                       (mi_ == 0 || e.Jh.allFinite());
        }
        return e;
    }

    double al_value(const Evaluation& e) const {
        if (!e.finite) return kInf;
        double v = e.f;
        if (me_ > 0) v += lambda_.dot(e.c) + 0.5 * mu_ * e.c.squaredNorm();
        for (int i = 0; i < mh_; ++i) {
            const double t = std::max(0.0, nu_[i] + mu_ * e.h[i]);
            v += (t * t - nu_[i] * nu_[i]) / (2.0 * mu_);
        }
        return v;
    }

    Eigen::VectorXd al_gradient(const Evaluation& e) const {
        Eigen::VectorXd g = e.fgrad;
        if (me_ > 0) g += e.Jc.transpose() * (lambda_ + mu_ * e.c);
        for (int i = 0; i < mi_; ++i) {
            const double t = std::max(0.0, nu_[i] + mu_ * e.h[i]);
            if (t > 0.0) g += t * e.Jh.row(i).transpose();
        }
        int row = mi_;
        for (int i : ub_idx_) {
            const double t = std::max(0.0, nu_[row] + mu_ * e.h[row]);
            g[i] += t;
            ++row;
        }
        for (int i : lb_idx_) {
            const double t = std::max(0.0, nu_[row] + mu_ * e.h[row]);
            g[i] -= t;
            ++row;
        }
        return g;
    }

    // stationarity of the true Lagrangian with the updated multipliers
    Eigen::VectorXd kkt_gradient(const Evaluation& e, const Eigen::VectorXd& lambda,
                                 const Eigen::VectorXd& nu) const {
        Eigen::VectorXd g = e.fgrad;
        if (me_ > 0) g += e.Jc.transpose() * lambda;
        for (int i = 0; i < mi_; ++i)
            if (nu[i] > 0.0) g += nu[i] * e.Jh.row(i).transpose();
        int row = mi_;
        for (int i : ub_idx_) g[i] += nu[row++];
        for (int i : lb_idx_) g[i] -= nu[row++];
        return g;
    }

    // Gauss-Newton style Hessian of the augmented Lagrangian: the caller's
    // objective Hessian approximation plus penalty curvature of the
    // active constraint set.
    Eigen::MatrixXd al_hessian(const Evaluation& e, const Eigen::VectorXd& z) const {
        Eigen::MatrixXd H(n_, n_);
        p_.objective_hessian(z, H);
        if (me_ > 0) H += mu_ * (e.Jc.transpose() * e.Jc);
        for (int i = 0; i < mi_; ++i) {
            if (nu_[i] + mu_ * e.h[i] > 0.0)
                H += mu_ * (e.Jh.row(i).transpose() * e.Jh.row(i));
        }
        int row = mi_;
        for (int i : ub_idx_) {
            if (nu_[row] + mu_ * e.h[row] > 0.0) H(i, i) += mu_;
            ++row;
        }
        for (int i : lb_idx_) {
            if (nu_[row] + mu_ * e.h[row] > 0.0) H(i, i) += mu_;
            ++row;
        }
        return H;
    }

    const Problem& p_;
    const Options& opt_;
    int n_ = 0, me_ = 0, mi_ = 0, mh_ = 0;
    std::vector<int> ub_idx_, lb_idx_;
    Eigen::VectorXd lambda_, nu_;
    double mu_ = 10.0;
};

void check_gradients_fd(const AugLag& al, const Eigen::VectorXd& z0) {
    const Evaluation e0 = al.evaluate(z0, true);
    if (!e0.finite) throw EvaluationFailure("non-finite evaluation at initial point");
    const int n = static_cast<int>(z0.size());
    Eigen::VectorXd fd(n);
    for (int i = 0; i < n; ++i) {
        const double step = 1e-6 * std::max(1.0, std::abs(z0[i]));
        Eigen::VectorXd zp = z0, zm = z0;
        zp[i] += step;
        zm[i] -= step;
        fd[i] = (al.p_.objective(zp, nullptr) - al.p_.objective(zm, nullptr)) / (2.0 * step);
    }
    const double scale = std::max(1.0, e0.fgrad.lpNorm<Eigen::Infinity>());
    const double err = (fd - e0.fgrad).lpNorm<Eigen::Infinity>() / scale;
    if (!(err <= 1e-4))
        throw EvaluationFailure("objective gradient mismatch vs. finite differences: " +
                                std::to_string(err));
}

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
    if (problem.dimension <= 0) throw DimensionMismatch("problem dimension must be positive");
    if (!problem.objective) throw EvaluationFailure("objective callable missing");
    if (problem.n_eq > 0 && !problem.equalities)
        throw EvaluationFailure("equality callable missing");
    if (problem.n_ineq > 0 && !problem.inequalities)
        throw EvaluationFailure("inequality callable missing");

    AugLag al(problem, options);
    const int n = problem.dimension;

    Eigen::VectorXd z = problem.initial_point.size() == n
                            ? problem.initial_point
                            : Eigen::VectorXd::Zero(n);
    // start inside the box when one is given
    for (int i = 0; i < n; ++i) {
        if (problem.lower_bounds.size() && std::isfinite(problem.lower_bounds[i]))
            z[i] = std::max(z[i], problem.lower_bounds[i]);
        if (problem.upper_bounds.size() && std::isfinite(problem.upper_bounds[i]))
            z[i] = std::min(z[i], problem.upper_bounds[i]);
    }
    if (!z.allFinite()) throw EvaluationFailure("initial point is not finite");

    if (options.check_gradients) check_gradients_fd(al, z);

    Evaluation cur = al.evaluate(z, true);
    if (!cur.finite) throw EvaluationFailure("non-finite evaluation at initial point");

    const double gscale = std::max(1.0, cur.fgrad.lpNorm<Eigen::Infinity>());

    Solution sol;
    sol.status = Status::max_iter;
    double omega = std::max(1e-2 * gscale, 10.0 * options.tol * gscale);
    const double omega_floor = 0.3 * options.tol * gscale;
    const bool unconstrained = (al.me_ == 0 && al.mh_ == 0);
    if (unconstrained) omega = omega_floor;

    double prev_feas = kInf;
    int total_inner = 0;
    int stall_count = 0;

    for (int outer = 0; outer < options.max_outer; ++outer) {
        sol.outer_iterations = outer + 1;

        // ---- inner minimization of the augmented Lagrangian:
        // damped Newton when an objective Hessian approximation is supplied,
        // BFGS otherwise
        const bool use_newton = static_cast<bool>(problem.objective_hessian);
        Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n) / gscale;
        bool have_curvature = false;
        double tau = 0.0;  // Levenberg damping for the Newton path
        double al_cur = al.al_value(cur);
        Eigen::VectorXd g = al.al_gradient(cur);

        for (int it = 0; it < options.max_inner && total_inner < options.max_total_inner; ++it) {
            if (g.lpNorm<Eigen::Infinity>() <= omega) break;
            ++total_inner;
            ++sol.inner_iterations;

            Eigen::VectorXd d;
            double descent = 0.0;
            if (use_newton) {
                const Eigen::MatrixXd H = al.al_hessian(cur, z);
                const double damp0 = std::max(1e-12, 1e-10 * H.trace() / n);
                bool solved = false;
                for (int attempt = 0; attempt < 25 && !solved; ++attempt) {
                    Eigen::MatrixXd Hd = H;
                    if (tau > 0.0) Hd.diagonal().array() += tau;
                    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hd);
                    if (ldlt.info() == Eigen::Success) {
                        d = ldlt.solve(-g);
                        descent = d.dot(g);
                        if (descent < 0.0 && d.allFinite()) {
                            solved = true;
                            break;
                        }
                    }
                    tau = tau == 0.0 ? damp0 : tau * 10.0;
                }
                if (!solved) break;
            } else {
                d = -Hinv * g;
                descent = d.dot(g);
                if (!(descent < 0.0)) {
                    Hinv = Eigen::MatrixXd::Identity(n, n) /
                           std::max(1.0, g.lpNorm<Eigen::Infinity>());
                    have_curvature = false;
                    d = -Hinv * g;
                    descent = d.dot(g);
                }
            }

            double t = 1.0;
            bool accepted = false;
            Evaluation trial;
            double al_trial = kInf;
            for (int ls = 0; ls < 50; ++ls) {
                trial = al.evaluate(z + t * d, false);
                al_trial = al.al_value(trial);
                if (al_trial <= al_cur + 1e-4 * t * descent) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;  // line search exhausted: inner stall

            const Eigen::VectorXd z_new = z + t * d;
            Evaluation next = al.evaluate(z_new, true);
            if (!next.finite) break;
            const Eigen::VectorXd g_new = al.al_gradient(next);

            if (use_newton) {
                // full steps shed damping, short steps raise it
                if (t >= 1.0) tau *= 0.25;
                else if (t < 0.25) tau = std::max(tau * 4.0, 1e-12);
                if (tau < 1e-14) tau = 0.0;
            } else {
                const Eigen::VectorXd s = z_new - z;
                const Eigen::VectorXd yv = g_new - g;
                const double sy = s.dot(yv);
                if (sy > 1e-12 * s.norm() * yv.norm()) {
                    if (!have_curvature) {
                        Hinv = Eigen::MatrixXd::Identity(n, n) * (sy / yv.squaredNorm());
                        have_curvature = true;
                    }
                    const double rho = 1.0 / sy;
                    const Eigen::VectorXd Hy = Hinv * yv;
                    const double yHy = yv.dot(Hy);
                    Hinv += (sy + yHy) * rho * rho * (s * s.transpose()) -
                            rho * (Hy * s.transpose() + s * Hy.transpose());
                }
            }

            z = z_new;
            cur = next;
            g = g_new;
            al_cur = al.al_value(cur);
        }

        // ---- multiplier / penalty update and KKT test
        Eigen::VectorXd lambda_new = al.lambda_ + al.mu_ * cur.c;
        Eigen::VectorXd nu_new = (al.nu_ + al.mu_ * cur.h).cwiseMax(0.0);
        lambda_new = lambda_new.cwiseMax(-1e12).cwiseMin(1e12);
        nu_new = nu_new.cwiseMin(1e12);

        double feas = 0.0;
        if (al.me_ > 0) feas = cur.c.lpNorm<Eigen::Infinity>();
        if (al.mh_ > 0) feas = std::max(feas, cur.h.maxCoeff());
        feas = std::max(feas, 0.0);

        double comp = 0.0;
        for (int i = 0; i < al.mh_; ++i)
            comp = std::max(comp, std::abs(nu_new[i] * cur.h[i]) / std::max(1.0, nu_new[i]));

        const double stat =
            al.kkt_gradient(cur, lambda_new, nu_new).lpNorm<Eigen::Infinity>() / gscale;
        const double kkt = std::max({stat, feas, comp});

        al.lambda_ = lambda_new;
        al.nu_ = nu_new;
        sol.kkt_residual = kkt;

        if (kkt <= options.tol) {
            sol.status = Status::optimal;
            break;
        }
        if (total_inner >= options.max_total_inner) break;

        if (feas > 0.25 * prev_feas && feas > options.tol) {
            if (al.mu_ >= options.max_penalty) {
                if (++stall_count >= 3) {
                    sol.status = Status::failure;
                    break;
                }
            }
            al.mu_ = std::min(al.mu_ * options.penalty_growth, options.max_penalty);
        } else {
            stall_count = 0;
        }
        prev_feas = feas;
        omega = std::max(omega * 0.2, omega_floor);
    }

    sol.z = z;
    sol.objective_value = cur.f;
    sol.eq_multipliers = al.lambda_;
    sol.ineq_multipliers = al.nu_.head(al.mi_);
    sol.bound_multipliers = al.nu_.tail(al.mh_ - al.mi_);
    return sol;
}

}  // namespace gridoed::nlp
