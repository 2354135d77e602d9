#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "covmatch/covariates.hpp"
#include "covmatch/graph.hpp"

namespace covmatch {

enum class LinkKind { Identity, Logit };

inline const char* link_name(LinkKind link) {
    return link == LinkKind::Identity ? "identity" : "logit";
}

// Mean function mu(t) = g^{-1}(t).
inline double link_mean(LinkKind link, double t) {
    if (link == LinkKind::Identity) return t;
    // Sigmoid, written to avoid overflow on both tails.
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double link_mean_deriv(LinkKind link, double t) {
    if (link == LinkKind::Identity) return 1.0;
    const double mu = link_mean(LinkKind::Logit, t);
    return mu * (1.0 - mu);
}

// Cumulant psi with psi' = mu: t^2/2 for Identity, softplus for Logit.
inline double link_cumulant(LinkKind link, double t) {
    if (link == LinkKind::Identity) return 0.5 * t * t;
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Fully observed regression block: one row per unordered vertex pair.
// Sampled graphs give 0/1 responses; expectation-based references may
// pass probabilities, so anything in [0, 1] is accepted.
struct GlmData {
    Eigen::MatrixXd X;  // rows are design vectors
    Eigen::VectorXd y;  // responses in [0, 1]

    void validate() const {
        if (X.rows() < 1) throw std::invalid_argument("regression data has no observations");
        if (X.cols() < 1) throw std::invalid_argument("regression data has no columns");
        if (y.size() != X.rows())
            throw std::invalid_argument("response length does not match design rows");
        if (!X.allFinite()) throw std::invalid_argument("design matrix has a non-finite entry");
        for (Eigen::Index k = 0; k < y.size(); ++k)
            if (!(y(k) >= 0.0 && y(k) <= 1.0))
                throw std::invalid_argument("responses must lie in [0, 1]");
    }
};

// Negative log-likelihood up to the theta-free term:
// sum_k { -y_k x_k'theta + psi(x_k'theta) }.
inline double glm_loss(const Eigen::VectorXd& theta, const GlmData& data, LinkKind link) {
    data.validate();
    if (theta.size() != data.X.cols())
        throw std::invalid_argument("theta dimension does not match design columns");
    const Eigen::VectorXd t = data.X * theta;
    double loss = 0.0;
    for (Eigen::Index k = 0; k < t.size(); ++k)
        loss += -data.y(k) * t(k) + link_cumulant(link, t(k));
    return loss;
}

// Gradient sum_k -(y_k - mu(t_k)) x_k and Hessian sum_k mu'(t_k) x_k x_k'.
// The Hessian is positive semidefinite for both links, so Newton steps
// on this loss never point uphill.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> glm_gradient_hessian(
    const Eigen::VectorXd& theta, const GlmData& data, LinkKind link) {
    data.validate();
    if (theta.size() != data.X.cols())
        throw std::invalid_argument("theta dimension does not match design columns");
    const Eigen::Index d = data.X.cols();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
    const Eigen::VectorXd t = data.X * theta;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
        const Eigen::VectorXd x = data.X.row(k).transpose();
        grad.noalias() += (link_mean(link, t(k)) - data.y(k)) * x;
        hess.noalias() += link_mean_deriv(link, t(k)) * (x * x.transpose());
    }
    return {std::move(grad), std::move(hess)};
}

struct GlmOptions {
    double grad_tol = 1e-8;
    int max_iter = 100;
    bool standardize = false;        // divide non-intercept columns by their max abs
    bool compute_std_errors = true;  // sqrt of diag of inverse Hessian at theta_hat
    double theta_cap = 30.0;         // logistic separation guard, sup-norm

    void validate() const {
        if (grad_tol <= 0.0) throw std::invalid_argument("grad_tol must be positive");
        if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
        if (theta_cap <= 0.0) throw std::invalid_argument("theta_cap must be positive");
    }
};

struct GlmFit {
    LinkKind link = LinkKind::Identity;
    Eigen::VectorXd theta;  // original (unstandardized) units
    std::vector<double> loss_trace;
    int iterations = 0;
    bool converged = false;
    bool separation_warning = false;
    bool ridge_used = false;
    double grad_inf_norm = 0.0;
    std::optional<Eigen::VectorXd> std_errors;     // original units
    std::optional<Eigen::VectorXd> column_scales;  // set when standardized
    std::optional<Eigen::VectorXd> theta_scaled;   // standardized units
};

namespace detail {

// Solve H d = -g. Falls back to one ridge retry because the seed block
// can be collinear (constant covariate columns); a second failure is a
// hard error rather than a silent garbage direction.
inline Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad,
                                        bool& ridge_used) {
    const Eigen::Index d = hess.rows();
    Eigen::VectorXd dir = hess.ldlt().solve(-grad);
    if (dir.allFinite() && grad.dot(dir) < 0.0) return dir;
    const double lambda = 1e-8 * (hess.trace() / static_cast<double>(d));
    Eigen::MatrixXd ridged = hess;
    ridged.diagonal().array() += (lambda > 0.0 ? lambda : 1e-8);
    dir = ridged.ldlt().solve(-grad);
    if (!dir.allFinite() || grad.dot(dir) >= 0.0)
        throw std::runtime_error("normal equations are singular even after ridge rescue");
    ridge_used = true;
    return dir;
}

inline std::optional<Eigen::VectorXd> inverse_hessian_std_errors(const Eigen::MatrixXd& hess) {
    const Eigen::Index d = hess.rows();
    const Eigen::MatrixXd inv = hess.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
    if (!inv.allFinite()) return std::nullopt;
    Eigen::VectorXd se(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        if (inv(k, k) <= 0.0) return std::nullopt;
        se(k) = std::sqrt(inv(k, k));
    }
    return se;
}

}  // namespace detail

// Newton-Raphson with step halving. The Identity link is quadratic, so
// its first full step lands on the normal-equations solution; later
// iterations only polish rounding error.
inline GlmFit fit_glm(const GlmData& data, LinkKind link, const GlmOptions& opts = {}) {
    data.validate();
    opts.validate();
    const Eigen::Index d = data.X.cols();

    // Optionally rescale columns so wide-ranging covariates cannot swamp
    // the 0/1 ones. The loss depends on X*theta only, so traces and
    // convergence flags are comparable across the two parameterizations.
    Eigen::VectorXd scales = Eigen::VectorXd::Ones(d);
    GlmData work;
    if (opts.standardize) {
        for (Eigen::Index k = 1; k < d; ++k) {
            const double s = data.X.col(k).cwiseAbs().maxCoeff();
            if (s > 0.0) scales(k) = s;
        }
        work.X = data.X * scales.cwiseInverse().asDiagonal();
        work.y = data.y;
    }
    const GlmData& fd = opts.standardize ? work : data;

    GlmFit fit;
    fit.link = link;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    double loss = glm_loss(theta, fd, link);
    fit.loss_trace.push_back(loss);

    int flat_steps = 0;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        auto [grad, hess] = glm_gradient_hessian(theta, fd, link);
        fit.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
        if (fit.grad_inf_norm <= opts.grad_tol) {
            fit.converged = true;
            break;
        }
        const Eigen::VectorXd dir = detail::newton_direction(hess, grad, fit.ridge_used);

        // Quadratic-model decrease of the full step, 0.5 * g' H^{-1} g.
        const double predicted = -0.5 * grad.dot(dir);
        const double loss_resolution =
            16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(loss));
        if (predicted <= loss_resolution && dir.lpNorm<Eigen::Infinity>() <= 1.0) {
            // The step's true effect on the loss is smaller than the rounding
            // error of evaluating it, so a measured comparison would be pure
            // noise; take the full step on the model's say-so and let the
            // gradient check at the top of the loop decide convergence.
            theta += dir;
            loss = std::min(loss, glm_loss(theta, fd, link));
            fit.loss_trace.push_back(loss);
            ++fit.iterations;
            if (++flat_steps >= 3) break;  // settled to rounding error
            continue;
        }
        flat_steps = 0;

        double eta = 1.0;
        bool accepted = false;
        for (int h = 0; h < 60; ++h, eta *= 0.5) {
            const Eigen::VectorXd cand = theta + eta * dir;
            const double cand_loss = glm_loss(cand, fd, link);
            if (std::isfinite(cand_loss) && cand_loss < loss) {
                theta = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // flat to rounding error; the final gradient check decides
        fit.loss_trace.push_back(loss);
        ++fit.iterations;
        if (link == LinkKind::Logit && theta.lpNorm<Eigen::Infinity>() > opts.theta_cap) {
            // Quasi-separated seed block: the MLE is off at infinity.
            theta = theta.cwiseMax(-opts.theta_cap).cwiseMin(opts.theta_cap);
            fit.separation_warning = true;
            fit.converged = false;
            break;
        }
    }

    if (!fit.converged && !fit.separation_warning) {
        const auto [grad, hess] = glm_gradient_hessian(theta, fd, link);
        fit.grad_inf_norm = grad.lpNorm<Eigen::Infinity>();
        fit.converged = fit.grad_inf_norm <= opts.grad_tol;
        (void)hess;
    }

    if (opts.compute_std_errors) {
        const auto [grad, hess] = glm_gradient_hessian(theta, fd, link);
        (void)grad;
        fit.std_errors = detail::inverse_hessian_std_errors(hess);
    }

    if (opts.standardize) {
        fit.theta_scaled = theta;
        fit.column_scales = scales;
        fit.theta = theta.cwiseQuotient(scales);
        if (fit.std_errors) *fit.std_errors = fit.std_errors->cwiseQuotient(scales);
    } else {
        fit.theta = theta;
    }
    return fit;
}

// Symmetric matrix of fitted edge probabilities with zero diagonal.
class ProbMatrix {
public:
    explicit ProbMatrix(Eigen::MatrixXd values, long clamp_count = 0)
        : values_(std::move(values)), clamp_count_(clamp_count) {
        validate();
    }

    int n() const { return static_cast<int>(values_.rows()); }
    const Eigen::MatrixXd& values() const { return values_; }
    double at(int i, int j) const { return values_(i, j); }
    // Unordered pairs whose raw prediction fell outside [0, 1].
    long clamp_count() const { return clamp_count_; }

private:
    void validate() const {
        if (values_.rows() != values_.cols())
            throw std::invalid_argument("probability matrix must be square");
        if (values_.rows() < 1)
            throw std::invalid_argument("probability matrix must be at least 1 x 1");
        if (!values_.allFinite())
            throw std::invalid_argument("probability matrix has a non-finite entry");
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            if (values_(i, i) != 0.0)
                throw std::invalid_argument("probability matrix diagonal must be zero");
            for (Eigen::Index j = i + 1; j < values_.cols(); ++j) {
                if (values_(i, j) != values_(j, i))
                    throw std::invalid_argument("probability matrix must be symmetric");
                if (values_(i, j) < 0.0 || values_(i, j) > 1.0)
                    throw std::invalid_argument("probabilities must lie in [0, 1]");
            }
        }
    }

    Eigen::MatrixXd values_;
    long clamp_count_ = 0;
};

// Plug-in edge probabilities mu(x_ij'theta_hat) for every pair. Identity
// link predictions can leave [0, 1]; they are clamped and counted.
inline ProbMatrix predict_prob_matrix(const GlmFit& fit, const Graph& a,
                                      const CovariateBundle& c) {
    const int n = a.n();
    c.check_compatible(n);
    if (fit.theta.size() != c.dim())
        throw std::invalid_argument("fitted theta dimension does not match covariate bundle");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    long clamps = 0;
    for (int i = 1; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            const double t = build_design_row(a, c, i, j).dot(fit.theta);
            double mu = link_mean(fit.link, t);
            if (mu < 0.0) {
                mu = 0.0;
                ++clamps;
            } else if (mu > 1.0) {
                mu = 1.0;
                ++clamps;
            }
            p(i, j) = mu;
            p(j, i) = mu;
        }
    }
    return ProbMatrix(std::move(p), clamps);
}

}  // namespace covmatch
