#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "covmatch/glm.hpp"
#include "covmatch/rng.hpp"
#include "helpers.hpp"

using namespace covmatch;

namespace {

// Design-like random data: intercept, a 0/1 column, then uniform columns.
GlmData make_glm_data(int m, int d, Rng& rng) {
    GlmData data;
    data.X.resize(m, d);
    data.y.resize(m);
    for (int k = 0; k < m; ++k) {
        data.X(k, 0) = 1.0;
        if (d > 1) data.X(k, 1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        for (int c = 2; c < d; ++c) data.X(k, c) = rng.uniform01();
        data.y(k) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    return data;
}

Eigen::VectorXd random_theta(int d, Rng& rng) {
    Eigen::VectorXd t(d);
    for (int k = 0; k < d; ++k) t(k) = 2.0 * rng.uniform01() - 1.0;
    return t;
}

// Loss recomputed with a from-scratch formula path, kept deliberately
// separate from the library's cumulant helpers.
double oracle_loss(const Eigen::VectorXd& theta, const GlmData& data, LinkKind link) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < data.X.rows(); ++k) {
        const double t = data.X.row(k).dot(theta);
        const double psi = link == LinkKind::Identity ? t * t / 2.0 : std::log(1.0 + std::exp(t));
        total += -data.y(k) * t + psi;
    }
    return total;
}

}  // namespace

TEST_CASE("link functions at reference points") {
    CHECK(link_mean(LinkKind::Identity, 0.37) == 0.37);
    CHECK(link_mean_deriv(LinkKind::Identity, -2.0) == 1.0);
    CHECK(link_cumulant(LinkKind::Identity, 3.0) == 4.5);

    CHECK(link_mean(LinkKind::Logit, 0.0) == 0.5);
    CHECK(link_mean(LinkKind::Logit, 800.0) == Catch::Approx(1.0));
    CHECK(link_mean(LinkKind::Logit, -800.0) == Catch::Approx(0.0).margin(1e-300));
    CHECK(std::isfinite(link_cumulant(LinkKind::Logit, 800.0)));
    CHECK(link_cumulant(LinkKind::Logit, 800.0) == Catch::Approx(800.0));
    CHECK(link_cumulant(LinkKind::Logit, -800.0) == Catch::Approx(0.0).margin(1e-300));
    CHECK(link_cumulant(LinkKind::Logit, 0.0) == Catch::Approx(std::log(2.0)));
    CHECK(link_mean_deriv(LinkKind::Logit, 0.0) == Catch::Approx(0.25));

    // psi' = mu by central differences.
    Rng rng(7);
    for (int rep = 0; rep < 40; ++rep) {
        const double t = 8.0 * rng.uniform01() - 4.0;
        const double h = 1e-6;
        for (const LinkKind link : {LinkKind::Identity, LinkKind::Logit}) {
            const double fd =
                (link_cumulant(link, t + h) - link_cumulant(link, t - h)) / (2.0 * h);
            CHECK(fd == Catch::Approx(link_mean(link, t)).margin(1e-8));
            const double fd2 = (link_mean(link, t + h) - link_mean(link, t - h)) / (2.0 * h);
            CHECK(fd2 == Catch::Approx(link_mean_deriv(link, t)).margin(1e-6));
        }
    }
}

TEST_CASE("glm data validation") {
    GlmData data;
    data.X = Eigen::MatrixXd::Ones(3, 2);
    data.y = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
    data.y = Eigen::VectorXd::Constant(3, 1.5);
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
    data.y = Eigen::VectorXd::Constant(3, 0.5);
    data.validate();  // probabilities are fine
    CHECK_THROWS_AS(glm_loss(Eigen::VectorXd::Zero(3), data, LinkKind::Logit),
                    std::invalid_argument);
}

TEST_CASE("loss equals an independently coded sum") {
    Rng rng(11);
    for (int rep = 0; rep < 30; ++rep) {
        const int m = 1 + static_cast<int>(rng.below(40));
        const int d = 1 + static_cast<int>(rng.below(4));
        const GlmData data = make_glm_data(m, d, rng);
        const Eigen::VectorXd theta = random_theta(d, rng);
        for (const LinkKind link : {LinkKind::Identity, LinkKind::Logit})
            CHECK(glm_loss(theta, data, link) ==
                  Catch::Approx(oracle_loss(theta, data, link)).epsilon(1e-12));
    }
}

TEST_CASE("gradient and hessian match central finite differences of the loss") {
    Rng rng(13);
    const double h = 1e-4;
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 5 + static_cast<int>(rng.below(40));
        const int d = 2 + static_cast<int>(rng.below(3));
        const GlmData data = make_glm_data(m, d, rng);
        const Eigen::VectorXd theta = random_theta(d, rng);
        for (const LinkKind link : {LinkKind::Identity, LinkKind::Logit}) {
            const auto [grad, hess] = glm_gradient_hessian(theta, data, link);
            for (int k = 0; k < d; ++k) {
                Eigen::VectorXd up = theta, dn = theta;
                up(k) += h;
                dn(k) -= h;
                const double fd = (glm_loss(up, data, link) - glm_loss(dn, data, link)) / (2 * h);
                CHECK(std::abs(fd - grad(k)) <= 1e-5 * std::max(1.0, std::abs(grad(k))));
            }
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    Eigen::VectorXd pp = theta, pm = theta, mp = theta, mm = theta;
                    pp(k) += h; pp(l) += h;
                    pm(k) += h; pm(l) -= h;
                    mp(k) -= h; mp(l) += h;
                    mm(k) -= h; mm(l) -= h;
                    const double fd =
                        (glm_loss(pp, data, link) - glm_loss(pm, data, link) -
                         glm_loss(mp, data, link) + glm_loss(mm, data, link)) /
                        (4 * h * h);
                    CHECK(std::abs(fd - hess(k, l)) <=
                          1e-4 * std::max(1.0, std::abs(hess(k, l))));
                }
        }
    }
}

TEST_CASE("hessian is positive semidefinite") {
    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 3 + static_cast<int>(rng.below(30));
        const int d = 2 + static_cast<int>(rng.below(3));
        const GlmData data = make_glm_data(m, d, rng);
        const Eigen::VectorXd theta = random_theta(d, rng);
        for (const LinkKind link : {LinkKind::Identity, LinkKind::Logit}) {
            const auto [grad, hess] = glm_gradient_hessian(theta, data, link);
            (void)grad;
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
            CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        }
    }
}

TEST_CASE("identity-link fit recovers noiseless coefficients to 1e-8") {
    Rng rng(19);
    for (int rep = 0; rep < 10; ++rep) {
        const int m = 60;
        GlmData data = make_glm_data(m, 3, rng);
        Eigen::VectorXd theta_star(3);
        theta_star << 0.2, 0.3, 0.25;  // keeps X * theta inside [0, 1]
        data.y = data.X * theta_star;
        const GlmFit fit = fit_glm(data, LinkKind::Identity);
        REQUIRE(fit.converged);
        CHECK((fit.theta - theta_star).lpNorm<Eigen::Infinity>() <= 1e-8);
        CHECK(fit.grad_inf_norm <= 1e-8);
        REQUIRE(fit.std_errors.has_value());
        CHECK(fit.std_errors->allFinite());
    }
}

TEST_CASE("loss trace never increases") {
    Rng rng(23);
    for (int rep = 0; rep < 15; ++rep) {
        const GlmData data = make_glm_data(80, 3, rng);
        for (const LinkKind link : {LinkKind::Identity, LinkKind::Logit}) {
            const GlmFit fit = fit_glm(data, link);
            for (std::size_t k = 1; k < fit.loss_trace.size(); ++k)
                CHECK(fit.loss_trace[k] <= fit.loss_trace[k - 1]);
        }
    }
}

TEST_CASE("logistic fit recovers generating coefficients within sampling error") {
    Rng rng(29);
    const int m = 20000;
    GlmData data = make_glm_data(m, 3, rng);
    Eigen::VectorXd theta_star(3);
    theta_star << -1.0, 1.0, 0.5;
    for (int k = 0; k < m; ++k) {
        const double p = link_mean(LinkKind::Logit, data.X.row(k).dot(theta_star));
        data.y(k) = rng.bernoulli(p) ? 1.0 : 0.0;
    }
    const GlmFit fit = fit_glm(data, LinkKind::Logit);
    REQUIRE(fit.converged);
    REQUIRE(fit.std_errors.has_value());
    for (int k = 0; k < 3; ++k)
        CHECK(std::abs(fit.theta(k) - theta_star(k)) <= 4.0 * (*fit.std_errors)(k));
}

TEST_CASE("correlated-graph identity fit approaches the generating pair") {
    // P(edge | base) = (1 - rho) p + rho * base with design (1, base):
    // intercept (1 - rho) p, slope rho.
    const double rho = 0.6, p = 0.3;
    Rng rng(31);
    const auto fit_at = [&](int m) {
        GlmData data;
        data.X.resize(m, 2);
        data.y.resize(m);
        for (int k = 0; k < m; ++k) {
            const double a = rng.bernoulli(p) ? 1.0 : 0.0;
            data.X(k, 0) = 1.0;
            data.X(k, 1) = a;
            data.y(k) = rng.bernoulli((1.0 - rho) * p + rho * a) ? 1.0 : 0.0;
        }
        return fit_glm(data, LinkKind::Identity);
    };
    const GlmFit small = fit_at(400);
    const GlmFit big = fit_at(40000);
    Eigen::VectorXd truth(2);
    truth << (1.0 - rho) * p, rho;
    const double err_small = (small.theta - truth).lpNorm<Eigen::Infinity>();
    const double err_big = (big.theta - truth).lpNorm<Eigen::Infinity>();
    CHECK(err_big < err_small);
    CHECK(err_big <= 0.05);
    REQUIRE(big.std_errors.has_value());
    for (int k = 0; k < 2; ++k)
        CHECK(std::abs(big.theta(k) - truth(k)) <= 4.0 * (*big.std_errors)(k));
}

TEST_CASE("perfect separation trips the guard instead of diverging") {
    GlmData data;
    const int m = 40;
    data.X.resize(m, 2);
    data.y.resize(m);
    Rng rng(37);
    for (int k = 0; k < m; ++k) {
        const double z = 2.0 * rng.uniform01() - 1.0;
        data.X(k, 0) = 1.0;
        data.X(k, 1) = z;
        data.y(k) = z > 0.0 ? 1.0 : 0.0;
    }
    const GlmFit fit = fit_glm(data, LinkKind::Logit);
    CHECK(fit.separation_warning);
    CHECK_FALSE(fit.converged);
    CHECK(fit.theta.lpNorm<Eigen::Infinity>() <= 30.0 + 1e-12);
}

TEST_CASE("collinear design still yields a loss minimizer") {
    // Duplicate column: theta is unidentifiable but X * theta is not.
    Rng rng(41);
    GlmData data = make_glm_data(50, 2, rng);
    GlmData dup;
    dup.X.resize(50, 3);
    dup.X.col(0) = data.X.col(0);
    dup.X.col(1) = data.X.col(1);
    dup.X.col(2) = data.X.col(1);
    Eigen::VectorXd theta_star(2);
    theta_star << 0.3, 0.4;
    dup.y = data.X * theta_star;
    const GlmFit fit = fit_glm(dup, LinkKind::Identity);
    CHECK((dup.X * fit.theta - dup.y).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("standardization reports both units and changes nothing testable") {
    Rng rng(43);
    GlmData data = make_glm_data(300, 3, rng);
    data.X.col(2) *= 57.0;  // wide column that standardization tames
    Eigen::VectorXd theta_star(3);
    theta_star << 0.1, 0.2, 0.004;
    data.y = data.X * theta_star;

    GlmOptions opts;
    opts.standardize = true;
    const GlmFit fit = fit_glm(data, LinkKind::Identity, opts);
    REQUIRE(fit.converged);
    REQUIRE(fit.column_scales.has_value());
    REQUIRE(fit.theta_scaled.has_value());
    CHECK((fit.theta - theta_star).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK((*fit.column_scales)(0) == 1.0);
    // Scaled and original coefficients describe the same fit.
    for (int k = 0; k < 3; ++k)
        CHECK((*fit.theta_scaled)(k) ==
              Catch::Approx(fit.theta(k) * (*fit.column_scales)(k)).epsilon(1e-12));

    const GlmFit plain = fit_glm(data, LinkKind::Identity);
    CHECK((fit.theta - plain.theta).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("predict_prob_matrix clamps identity predictions and counts them") {
    const Graph g = Graph::complete(4);
    GlmFit fit;
    fit.link = LinkKind::Identity;
    fit.theta.resize(2);
    fit.theta << 1.7, 0.0;  // every raw prediction is 1.7
    fit.loss_trace = {0.0};
    const ProbMatrix p = predict_prob_matrix(fit, g, CovariateBundle{});
    CHECK(p.clamp_count() == 6);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(p.at(i, j) == (i == j ? 0.0 : 1.0));

    fit.theta << -0.2, 0.1;  // negative everywhere
    const ProbMatrix q = predict_prob_matrix(fit, g, CovariateBundle{});
    CHECK(q.clamp_count() == 6);
    CHECK(q.values().maxCoeff() == 0.0);
}

TEST_CASE("predict_prob_matrix output is a valid probability matrix") {
    Rng rng(47);
    const Graph g = testing_support::random_graph(9, 0.4, rng);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(9, 9);
    for (int i = 1; i < 9; ++i)
        for (int j = 0; j < i; ++j) y(i, j) = y(j, i) = rng.uniform01();
    const CovariateBundle c({y}, Eigen::MatrixXd(0, 0), {});
    GlmFit fit;
    fit.link = LinkKind::Logit;
    fit.theta.resize(3);
    fit.theta << -0.5, 1.0, 0.7;
    fit.loss_trace = {0.0};
    const ProbMatrix p = predict_prob_matrix(fit, g, c);
    CHECK(p.clamp_count() == 0);
    CHECK(p.values() == p.values().transpose().eval());
    CHECK(p.values().diagonal().isZero());
    CHECK(p.values().minCoeff() >= 0.0);
    CHECK(p.values().maxCoeff() <= 1.0);
    CHECK_THROWS_AS(predict_prob_matrix(fit, g, CovariateBundle{}), std::invalid_argument);
}

TEST_CASE("probability matrix validation rejects bad inputs") {
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 1) = 1.2;
    bad(1, 0) = 1.2;
    CHECK_THROWS_AS(ProbMatrix(bad), std::invalid_argument);
    bad(0, 1) = 0.5;
    CHECK_THROWS_AS(ProbMatrix(bad), std::invalid_argument);  // asymmetric
    Eigen::MatrixXd diag = Eigen::MatrixXd::Constant(2, 2, 0.5);
    CHECK_THROWS_AS(ProbMatrix(diag), std::invalid_argument);
}
