#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "icop/copula_core.hpp"
#include "icop/special.hpp"

#include <cmath>

using namespace icop;

namespace {

Eigen::MatrixXd corr2(double r) {
    Eigen::MatrixXd R(2, 2);
    R << 1.0, r, r, 1.0;
    return R;
}

CorrelationMatrix random_correlation(int m, Rng& rng) {
    Eigen::MatrixXd A(m, m + 2);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m + 2; ++j) A(i, j) = rng.normal();
    return CorrelationMatrix::from_covariance(A * A.transpose());
}

} // namespace

TEST_CASE("gaussian copula point values") {
    Eigen::VectorXd u(2);
    u << 0.5, 0.5;
    CHECK(gaussian_copula_logdensity(CorrelationMatrix::identity(2), u) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CorrelationMatrix half(corr2(0.5));
    CHECK(gaussian_copula_logdensity(half, u) ==
          doctest::Approx(0.14384103622589045).epsilon(1e-10));
    Eigen::VectorXd u1(2);
    u1 << norm_cdf(1.0), norm_cdf(1.0);
    CHECK(gaussian_copula_logdensity(half, u1) ==
          doctest::Approx(0.4771743695592239).epsilon(1e-8));
}

TEST_CASE("t copula point values") {
    Eigen::VectorXd u(2);
    u << 0.5, 0.5;
    CHECK(t_copula_logdensity({CorrelationMatrix::identity(2), 5.0}, u) ==
          doctest::Approx(0.09936211170010356).epsilon(1e-9));
    CHECK(t_copula_logdensity({CorrelationMatrix::identity(2), 1e6}, u) ==
          doctest::Approx(0.0).epsilon(1e-3));
    CHECK_THROWS_AS(
        t_copula_logdensity({CorrelationMatrix::identity(2), 0.0}, u),
        std::domain_error);
}

TEST_CASE("density ratio identity, gaussian and t") {
    Rng rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        int m = 2 + static_cast<int>(rng.uniform() * 9); // 2..10
        CorrelationMatrix omega = random_correlation(m, rng);
        Eigen::VectorXd u(m), z(m);
        for (int j = 0; j < m; ++j) u(j) = 0.02 + 0.96 * rng.uniform();

        for (int j = 0; j < m; ++j) z(j) = norm_quantile(u(j));
        double direct = mvn_logpdf(z, Eigen::VectorXd::Zero(m), omega.values());
        for (int j = 0; j < m; ++j) direct -= norm_logpdf(z(j));
        CHECK(gaussian_copula_logdensity(omega, u) ==
              doctest::Approx(direct).epsilon(1e-10));

        double nu = 3.0 + 10.0 * rng.uniform();
        for (int j = 0; j < m; ++j) z(j) = t_quantile(u(j), nu);
        double tdirect =
            mvt_logpdf(z, Eigen::VectorXd::Zero(m), omega.values(), nu);
        for (int j = 0; j < m; ++j) tdirect -= t_logpdf(z(j), nu);
        CHECK(t_copula_logdensity({omega, nu}, u) ==
              doctest::Approx(tdirect).epsilon(1e-10));
    }
}

TEST_CASE("copula invariant to the covariance scale") {
    Rng rng(19);
    Eigen::MatrixXd cov(3, 3);
    cov << 4.0, 1.2, -0.8, 1.2, 2.0, 0.3, -0.8, 0.3, 9.0;
    CorrelationMatrix a = CorrelationMatrix::from_covariance(cov);
    CorrelationMatrix b = CorrelationMatrix::from_covariance(25.0 * cov);
    Eigen::VectorXd u(3);
    for (int rep = 0; rep < 20; ++rep) {
        for (int j = 0; j < 3; ++j) u(j) = 0.05 + 0.9 * rng.uniform();
        CHECK(gaussian_copula_logdensity(a, u) ==
              doctest::Approx(gaussian_copula_logdensity(b, u)).epsilon(1e-12));
    }
}

TEST_CASE("correlation matrix validation") {
    Eigen::MatrixXd bad = corr2(0.5);
    bad(0, 0) = 1.5;
    CHECK_THROWS(CorrelationMatrix(bad));
    CHECK_THROWS(CorrelationMatrix(corr2(1.2))); // not PD
}

TEST_CASE("simulation spearman and marginal uniformity") {
    Rng rng(23);
    auto sim = make_gaussian_simulator(CorrelationMatrix(corr2(0.5)));
    Eigen::MatrixXd u = simulate_copula_u(sim, 100000, rng);
    std::vector<double> c0(u.col(0).data(), u.col(0).data() + u.rows());
    std::vector<double> c1(u.col(1).data(), u.col(1).data() + u.rows());
    CHECK(spearman(c0, c1) == doctest::Approx(0.4825837395309974).epsilon(0.025));
    CHECK(ks_uniform(c0) < ks_crit01(c0.size()));

    auto ind = make_gaussian_simulator(CorrelationMatrix::identity(2));
    Eigen::MatrixXd u0 = simulate_copula_u(ind, 100000, rng);
    std::vector<double> d0(u0.col(0).data(), u0.col(0).data() + u0.rows());
    std::vector<double> d1(u0.col(1).data(), u0.col(1).data() + u0.rows());
    CHECK(std::fabs(spearman(d0, d1)) < 0.01);
}

TEST_CASE("marginalization closure in a 4-dim copula") {
    Rng rng(29);
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(4, 4);
    R(0, 2) = R(2, 0) = 0.6;
    R(0, 1) = R(1, 0) = 0.2;
    R(1, 3) = R(3, 1) = 0.1;
    auto sim = make_gaussian_simulator(CorrelationMatrix(R));
    Eigen::MatrixXd u = simulate_copula_u(sim, 100000, rng);
    std::vector<double> a(u.col(0).data(), u.col(0).data() + u.rows());
    std::vector<double> b(u.col(2).data(), u.col(2).data() + u.rows());
    double expected = 6.0 / PI * std::asin(0.3);
    CHECK(spearman(a, b) == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("simulation determinism") {
    auto sim = make_gaussian_simulator(CorrelationMatrix(corr2(0.3)));
    Rng r1(99), r2(99);
    Eigen::MatrixXd a = simulate_copula_u(sim, 50, r1);
    Eigen::MatrixXd b = simulate_copula_u(sim, 50, r2);
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("discrete bounds") {
    DiscreteCdf bern{{0.0, 1.0}, {0.5, 1.0}};
    auto b1 = discrete_bounds({bern}, {1.0});
    CHECK(b1.a[0] == doctest::Approx(0.5));
    CHECK(b1.b[0] == doctest::Approx(1.0));
    auto b0 = discrete_bounds({bern}, {0.0});
    CHECK(b0.a[0] == doctest::Approx(0.0));
    CHECK(b0.b[0] == doctest::Approx(0.5));

    DiscreteCdf pois{{0.0, 1.0, 2.0},
                     {std::exp(-1.0), 2.0 * std::exp(-1.0), 0.92}};
    auto bp = discrete_bounds({pois}, {0.0});
    CHECK(bp.b[0] == doctest::Approx(0.36787944117144233).epsilon(1e-12));
    CHECK_THROWS(discrete_bounds({bern}, {3.0}));
}

TEST_CASE("differencing: bivariate bernoulli masses") {
    auto copula_cdf = [](const std::vector<double>& u) {
        return binorm_cdf(norm_quantile(std::min(std::max(u[0], 1e-14), 1 - 1e-14)),
                          norm_quantile(std::min(std::max(u[1], 1e-14), 1 - 1e-14)),
                          0.5);
    };
    auto cdf0 = [](const std::vector<double>& u) { return u[0] * u[1]; };

    DiscreteBounds b11{{0.5, 0.5}, {1.0, 1.0}};
    CHECK(discrete_mass_by_differencing(cdf0, b11) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(discrete_mass_by_differencing(copula_cdf, b11) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-6));

    // all four cells sum to one
    double total = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            DiscreteBounds b{{i ? 0.5 : 0.0, j ? 0.5 : 0.0},
                             {i ? 1.0 : 0.5, j ? 1.0 : 0.5}};
            total += discrete_mass_by_differencing(copula_cdf, b);
        }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

    DiscreteBounds degen{{0.5, 0.2}, {0.5, 0.7}};
    CHECK(discrete_mass_by_differencing(copula_cdf, degen) == 0.0);
}

TEST_CASE("data augmentation z step") {
    Rng rng(31);
    // unconstrained independence: outputs are standard normal
    CorrelationMatrix eye = CorrelationMatrix::identity(2);
    DiscreteBounds open{{0.0, 0.0}, {1.0, 1.0}};
    Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
    std::vector<double> draws;
    for (int i = 0; i < 50000; ++i) {
        z = gaussian_da_z_step(eye, open, z, rng);
        draws.push_back(z(0));
    }
    CHECK(mean_of(draws) == doctest::Approx(0.0).epsilon(0.02));
    CHECK(var_of(draws) == doctest::Approx(1.0).epsilon(0.03));

    // coordinate 1 held in its upper decile drags coordinate 2 with it
    CorrelationMatrix half(corr2(0.5));
    DiscreteBounds upper{{0.9, 0.0}, {1.0, 1.0}};
    Eigen::VectorXd z2(2);
    z2 << 1.5, 0.0;
    std::vector<double> z2s;
    for (int i = 0; i < 100000; ++i) {
        z2 = gaussian_da_z_step(half, upper, z2, rng);
        z2s.push_back(z2(1));
    }
    CHECK(mean_of(z2s) == doctest::Approx(0.5 * 1.7549833193248683).epsilon(0.03));
}

TEST_CASE("augmentation frequencies match differencing") {
    Rng rng(37);
    CorrelationMatrix half(corr2(0.5));
    auto copula_cdf = [](const std::vector<double>& u) {
        return binorm_cdf(norm_quantile(std::min(std::max(u[0], 1e-14), 1 - 1e-14)),
                          norm_quantile(std::min(std::max(u[1], 1e-14), 1 - 1e-14)),
                          0.5);
    };
    DiscreteBounds b11{{0.5, 0.5}, {1.0, 1.0}};
    double target = discrete_mass_by_differencing(copula_cdf, b11);

    // unconstrained copula draws classified into the (1,1) cell
    auto sim = make_gaussian_simulator(half);
    Eigen::MatrixXd u = simulate_copula_u(sim, 200000, rng);
    int hits = 0;
    for (int i = 0; i < u.rows(); ++i)
        if (u(i, 0) > 0.5 && u(i, 1) > 0.5) ++hits;
    CHECK(double(hits) / u.rows() == doctest::Approx(target).epsilon(0.015));
}
