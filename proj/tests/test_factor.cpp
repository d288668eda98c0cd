#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "icop/copula_core.hpp"
#include "icop/factor.hpp"

#include <cmath>

using namespace icop;

TEST_CASE("implied correlation, closed forms") {
    // single factor, equal loadings l, d = 1 - l^2: off-diagonals l^2
    FactorParams p;
    p.lambda = Eigen::MatrixXd::Constant(3, 1, std::sqrt(0.5));
    p.d = Eigen::VectorXd::Constant(3, 0.5);
    Eigen::MatrixXd R = factor_to_correlation(p).values();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(R(i, j) == doctest::Approx(i == j ? 1.0 : 0.5).epsilon(1e-12));

    // lambda = (1, 2)', d = (1, 1): corr = 2 / sqrt(2 * 5) = 2 / sqrt(10)
    FactorParams q;
    q.lambda = Eigen::MatrixXd(2, 1);
    q.lambda << 1.0, 2.0;
    q.d = Eigen::VectorXd::Ones(2);
    CHECK(factor_to_correlation(q).values()(0, 1) ==
          doctest::Approx(0.6324555320336759).epsilon(1e-12));

    // zero loadings: identity
    FactorParams z;
    z.lambda = Eigen::MatrixXd::Zero(4, 2);
    z.lambda(0, 0) = z.lambda(1, 1) = 1e-14;
    z.d = Eigen::VectorXd::Ones(4);
    CHECK((factor_to_correlation(z).values() - Eigen::MatrixXd::Identity(4, 4))
              .norm() < 1e-12);
}

TEST_CASE("validate rejects malformed parameters") {
    FactorParams p;
    p.lambda = Eigen::MatrixXd::Ones(3, 2);
    p.d = Eigen::VectorXd::Ones(3);
    CHECK_THROWS(p.validate()); // upper triangle not zero
    p.lambda(0, 1) = 0.0;
    CHECK_NOTHROW(p.validate());
    p.d(1) = 0.0;
    CHECK_THROWS(p.validate());
    p.d(1) = 1.0;
    p.lambda(0, 0) = -1.0;
    CHECK_THROWS(p.validate()); // leading diagonal must be positive
}

TEST_CASE("simulation has unit variances and the implied correlation") {
    Rng rng(61);
    FactorParams p;
    p.lambda = Eigen::MatrixXd(3, 1);
    p.lambda << 0.9, 0.7, -0.5;
    p.d = Eigen::VectorXd::Constant(3, 0.4);
    Eigen::MatrixXd R = factor_to_correlation(p).values();

    const int n = 400000;
    Eigen::MatrixXd z = simulate_factor_z(p, n, rng);
    Eigen::MatrixXd c = z.transpose() * z / double(n);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(c(i, j) == doctest::Approx(R(i, j)).epsilon(0.02).scale(1.0));
}

TEST_CASE("copula density matches the plain gaussian copula") {
    Rng rng(67);
    FactorParams p;
    p.lambda = Eigen::MatrixXd(4, 2);
    p.lambda << 0.8, 0.0, 0.5, 0.6, -0.3, 0.4, 0.2, -0.7;
    p.d = Eigen::VectorXd::Constant(4, 0.3);
    CorrelationMatrix omega = factor_to_correlation(p);
    CorrelationMatrix direct = CorrelationMatrix::from_covariance(
        p.lambda * p.lambda.transpose() +
        Eigen::MatrixXd(p.d.asDiagonal()));
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd u(4);
        for (int j = 0; j < 4; ++j) u(j) = rng.uniform();
        CHECK(gaussian_copula_logdensity(omega, u) ==
              doctest::Approx(gaussian_copula_logdensity(direct, u))
                  .epsilon(1e-10));
    }
}

TEST_CASE("em recovers a one-factor model") {
    Rng rng(71);
    FactorParams truth;
    truth.lambda = Eigen::MatrixXd(3, 1);
    truth.lambda << 0.9, 0.6, 0.4;
    truth.d = Eigen::VectorXd(3);
    truth.d << 0.19, 0.64, 0.84;
    Eigen::MatrixXd z = simulate_factor_z(truth, 5000, rng);

    FactorFit fit = factor_fit_em(z, 1);
    CHECK(fit.converged);
    Eigen::MatrixXd R_true = factor_to_correlation(truth).values();
    Eigen::MatrixXd R_fit = factor_to_correlation(fit.params).values();
    CHECK((R_fit - R_true).cwiseAbs().maxCoeff() < 0.05);
    for (int j = 0; j < 3; ++j)
        CHECK(fit.params.lambda(j, 0) ==
              doctest::Approx(truth.lambda(j, 0)).epsilon(0.15));

    // loglik nondecreasing
    for (size_t i = 1; i < fit.loglik.size(); ++i)
        CHECK(fit.loglik[i] >= fit.loglik[i - 1] - 1e-10);
}

TEST_CASE("em identification constraints hold") {
    Rng rng(73);
    FactorParams truth;
    truth.lambda = Eigen::MatrixXd(5, 2);
    truth.lambda << 0.8, 0.0, 0.4, 0.6, 0.3, -0.5, -0.2, 0.4, 0.5, 0.3;
    truth.d = Eigen::VectorXd::Constant(5, 0.3);
    Eigen::MatrixXd z = simulate_factor_z(truth, 4000, rng);
    FactorFit fit = factor_fit_em(z, 2);
    CHECK_NOTHROW(fit.params.validate());
    CHECK(fit.params.lambda(0, 1) == doctest::Approx(0.0));
    CHECK(fit.params.lambda(0, 0) > 0.0);
    CHECK(fit.params.lambda(1, 1) > 0.0);
}

TEST_CASE("em input validation") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Random(100, 3);
    CHECK_THROWS_AS(factor_fit_em(z, 0), std::domain_error);
    CHECK_THROWS_AS(factor_fit_em(z, 3), std::domain_error);
    CHECK_THROWS_AS(factor_fit_em(Eigen::MatrixXd::Random(3, 3), 1),
                    std::invalid_argument);
}

TEST_CASE("json round trip") {
    FactorParams p;
    p.lambda = Eigen::MatrixXd(3, 2);
    p.lambda << 0.5, 0.0, 0.25, 0.75, -0.125, 0.375;
    p.d = Eigen::VectorXd(3);
    p.d << 0.5, 0.25, 0.125;
    FactorParams q = FactorParams::from_json(p.to_json());
    CHECK((q.lambda - p.lambda).norm() == doctest::Approx(0.0));
    CHECK((q.d - p.d).norm() == doctest::Approx(0.0));
}

TEST_CASE("simulator uniformity") {
    Rng rng(79);
    FactorParams p;
    p.lambda = Eigen::MatrixXd::Constant(2, 1, 0.8);
    p.d = Eigen::VectorXd::Constant(2, 0.36);
    Eigen::MatrixXd u = simulate_copula_u(make_factor_simulator(p), 20000, rng);
    std::vector<double> u0(u.col(0).data(), u.col(0).data() + u.rows());
    CHECK(ks_uniform(u0) < ks_crit01(u0.size()));
}
