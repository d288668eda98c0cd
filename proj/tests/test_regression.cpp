#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "icop/quadrature.hpp"
#include "icop/regression.hpp"
#include "icop/special.hpp"

#include <cmath>

using namespace icop;

namespace {

HorseshoeState unit_state(int p) {
    HorseshoeState s;
    s.lambda = Eigen::VectorXd::Ones(p);
    s.tau = 1.0;
    return s;
}

} // namespace

TEST_CASE("scale function closed forms") {
    HorseshoeState s = unit_state(2);
    CHECK(reg_scale(Eigen::VectorXd::Zero(2), s) == doctest::Approx(1.0));
    // x = (1, 1), lambda = 1: s = 1 / sqrt(3)
    CHECK(reg_scale(Eigen::VectorXd::Ones(2), s) ==
          doctest::Approx(0.5773502691896258).epsilon(1e-12));
    // lambda -> 0 forces s -> 1
    s.lambda = Eigen::VectorXd::Constant(2, 1e-12);
    CHECK(reg_scale(Eigen::VectorXd::Ones(2), s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlation matrix via both formulas") {
    Rng rng(127);
    for (int rep = 0; rep < 20; ++rep) {
        int n = 3 + static_cast<int>(rng.uniform() * 6);
        int p = 1 + static_cast<int>(rng.uniform() * 4);
        Eigen::MatrixXd B(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) B(i, j) = rng.normal();
        HorseshoeState s;
        s.lambda = Eigen::VectorXd(p);
        for (int j = 0; j < p; ++j) s.lambda(j) = std::exp(0.5 * rng.normal());
        s.tau = std::exp(0.3 * rng.normal());

        Eigen::MatrixXd R = reg_correlation(B, s).values();
        // direct: cov = B P^{-1} B' + I, normalized to unit diagonal
        Eigen::VectorXd lam = s.lambda;
        Eigen::MatrixXd cov =
            B * lam.array().square().matrix().asDiagonal() * B.transpose() +
            Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd dinv = cov.diagonal().cwiseSqrt().cwiseInverse();
        Eigen::MatrixXd R2 = dinv.asDiagonal() * cov * dinv.asDiagonal();
        CHECK((R - R2).cwiseAbs().maxCoeff() < 1e-10);
    }

    // B = 0: identity
    HorseshoeState s = unit_state(2);
    Eigen::MatrixXd R0 = reg_correlation(Eigen::MatrixXd::Zero(4, 2), s).values();
    CHECK((R0 - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
    // n = 1 trivially [1]
    Eigen::MatrixXd R1 = reg_correlation(Eigen::MatrixXd::Ones(1, 2), s).values();
    CHECK(R1(0, 0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(reg_correlation(Eigen::MatrixXd::Zero(2001, 2), s),
                    std::length_error);
}

TEST_CASE("conditional loglik reductions") {
    Rng rng(131);
    int n = 8, p = 2;
    Eigen::MatrixXd B(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) B(i, j) = rng.normal();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = 0.5 + 1.5 * rng.normal();
    RegressionData data{B, y, Margin::normal(0.5, 1.5)};
    HorseshoeState s = unit_state(p);

    // beta = 0: sum of zero-mean normals with variance s_i^2, plus the
    // margin-to-z change of variables
    double got = reg_conditional_loglik(data, Eigen::VectorXd::Zero(p), s);
    double expect = 0.0;
    for (int i = 0; i < n; ++i) {
        double si = reg_scale(data.B.row(i), s);
        double z = norm_quantile(data.margin.cdf(data.y(i)));
        expect += norm1_logpdf(z, 0.0, si * si) + data.margin.logpdf(data.y(i)) -
                  norm_logpdf(z);
    }
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));

    // lambda -> 0 at beta = 0: exact independence, product of the margins
    HorseshoeState tiny;
    tiny.lambda = Eigen::VectorXd::Constant(p, 1e-14);
    tiny.tau = 1.0;
    double indep = reg_conditional_loglik(data, Eigen::VectorXd::Zero(p), tiny);
    double marg_sum = 0.0;
    for (int i = 0; i < n; ++i) marg_sum += data.margin.logpdf(data.y(i));
    CHECK(indep == doctest::Approx(marg_sum).epsilon(1e-8));

    // out of support
    data.y(0) = 1e308;
    CHECK_THROWS_AS(reg_conditional_loglik(data, Eigen::VectorXd::Zero(p), s),
                    std::domain_error);
}

TEST_CASE("marginalizing beta recovers the copula times the margins") {
    // int exp(loglik(beta)) N(beta; 0, P^{-1}) dbeta
    //   = exp(gaussian copula logdensity at R) * prod g(y_i)
    Rng rng(137);
    int n = 4, p = 1;
    Eigen::MatrixXd B(n, p);
    for (int i = 0; i < n; ++i) B(i, 0) = rng.normal();
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = rng.normal();
    RegressionData data{B, y, Margin::normal(0.0, 1.0)};
    HorseshoeState s;
    s.lambda = Eigen::VectorXd::Constant(1, 0.8);
    s.tau = 1.2; // hyperparameter only, does not enter the likelihood
    double prior_sd = s.lambda(0);

    GaussHermite gh = gauss_hermite(60);
    double integral = 0.0;
    for (size_t k = 0; k < gh.nodes.size(); ++k) {
        Eigen::VectorXd beta(1);
        beta << std::sqrt(2.0) * prior_sd * gh.nodes[k];
        integral += gh.weights[k] / std::sqrt(PI) *
                    std::exp(reg_conditional_loglik(data, beta, s));
    }

    Eigen::VectorXd u(n);
    double marg_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        u(i) = data.margin.cdf(data.y(i));
        marg_sum += data.margin.logpdf(data.y(i));
    }
    double expect =
        std::exp(gaussian_copula_logdensity(reg_correlation(data.B, s), u) +
                 marg_sum);
    CHECK(integral == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("mcmc fit smoke, shrinkage, and validation") {
    Rng rng(139);
    int n = 120, p = 4;
    Eigen::MatrixXd B(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) B(i, j) = rng.normal();
    // y from the copula model: z_i = s_i (x_i'beta + eps_i), only beta_1 active
    Eigen::VectorXd beta_true = Eigen::VectorXd::Zero(p);
    beta_true(0) = 1.5;
    HorseshoeState gen = HorseshoeState{Eigen::VectorXd::Ones(p), 1.0};
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        double si = reg_scale(B.row(i), gen);
        double z = si * (B.row(i).dot(beta_true) + rng.normal());
        y(i) = norm_quantile(std::min(1.0 - 1e-12, std::max(1e-12, norm_cdf(z))));
    }
    RegressionData data{B, y, Margin::normal(0.0, 1.0)};

    Chain empty = reg_mcmc_fit(data, 0, rng);
    CHECK(empty.n_draws() == 0);

    Chain chain = reg_mcmc_fit(data, 2000, rng);
    CHECK(chain.n_draws() == 1600);
    CHECK(chain.draws.allFinite());
    double b1 = 0.0, b2 = 0.0;
    for (int i = 0; i < chain.n_draws(); ++i) {
        b1 += chain.column("beta_1")(i);
        b2 += chain.column("beta_2")(i);
    }
    b1 /= chain.n_draws();
    b2 /= chain.n_draws();
    CHECK(b1 > 0.8);                 // active coefficient found
    CHECK(std::fabs(b2) < std::fabs(b1) * 0.3); // inactive one shrunk
    for (auto& [name, rate] : chain.acceptance_rates) {
        CHECK(rate > 0.0);
        CHECK(rate < 1.0);
    }

    RegressionData bad = data;
    bad.B = data.B.topRows(5);
    bad.y = data.y.head(5);
    CHECK_THROWS_AS(reg_mcmc_fit(bad, 100, rng), std::domain_error);
}

TEST_CASE("predictive densities") {
    Margin normal = Margin::normal(0.0, 1.0);
    std::vector<double> grid = default_y_grid(normal, 300);
    CHECK(grid.size() == 300);
    CHECK(grid.front() == doctest::Approx(normal.quantile(0.001)));
    CHECK(grid.back() == doctest::Approx(normal.quantile(0.999)));

    int p = 2;
    // single-draw chain: bayes curve equals the plug-in curve
    Chain one;
    for (int j = 1; j <= p; ++j) one.names.push_back("beta_" + std::to_string(j));
    for (int j = 1; j <= p; ++j) one.names.push_back("lambda_" + std::to_string(j));
    one.names.push_back("tau");
    one.draws = Eigen::MatrixXd(1, 2 * p + 1);
    one.draws << 0.7, -0.3, 0.5, 0.9, 1.1;
    Eigen::VectorXd x(p);
    x << 1.0, 0.5;
    PredictiveCurves c = reg_predict_density(x, one, normal, grid);
    for (size_t i = 0; i < grid.size(); ++i)
        CHECK(c.bayes[i] == doctest::Approx(c.point[i]).epsilon(1e-12));

    // predictive integrates to one
    double total = 0.0;
    for (size_t i = 1; i < grid.size(); ++i)
        total += 0.5 * (c.bayes[i] + c.bayes[i - 1]) * (grid[i] - grid[i - 1]);
    CHECK(total == doctest::Approx(1.0).epsilon(0.01));

    // fully shrunk chain: predictive equals the margin
    Chain zero = one;
    zero.draws << 0.0, 0.0, 1e-14, 1e-14, 1.0;
    PredictiveCurves cz = reg_predict_density(x, zero, normal, grid);
    for (size_t i = 0; i < grid.size(); ++i)
        CHECK(cz.bayes[i] == doctest::Approx(normal.pdf(grid[i])).epsilon(1e-6));

    // closed form for a normal margin: y | draw ~ N(s x'beta, fixed variance?)
    // with G = Phi the map y = z is the identity, so the density at y is
    // phi(z; s x'beta, s^2) directly
    HorseshoeState s;
    s.lambda = Eigen::VectorXd(p);
    s.lambda << 0.5, 0.9;
    s.tau = 1.1;
    Eigen::VectorXd beta(p);
    beta << 0.7, -0.3;
    double si = reg_scale(x, s);
    double mu = si * x.dot(beta);
    Chain cf = one;
    cf.draws << beta(0), beta(1), s.lambda(0), s.lambda(1), s.tau;
    PredictiveCurves cc = reg_predict_density(x, cf, normal, grid);
    for (size_t i = 0; i < grid.size(); i += 37)
        CHECK(cc.bayes[i] ==
              doctest::Approx(std::exp(norm1_logpdf(grid[i], mu, si * si)))
                  .epsilon(1e-10));

    Chain none;
    CHECK_THROWS_AS(reg_predict_density(x, none, normal, grid), std::domain_error);
}

TEST_CASE("tau is a hyperparameter only and never enters the likelihood") {
    Eigen::MatrixXd B = Eigen::MatrixXd::Random(6, 2);
    HorseshoeState a, b;
    a.lambda = Eigen::VectorXd(2);
    a.lambda << 0.4, 1.2;
    a.tau = 3.0;
    b.lambda = a.lambda;
    b.tau = 0.1;
    CHECK((reg_correlation(B, a).values() - reg_correlation(B, b).values())
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    CHECK(reg_scale(B.row(0), a) == doctest::Approx(reg_scale(B.row(0), b)));
}
