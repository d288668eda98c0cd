#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "icop/interp.hpp"
#include "icop/quadrature.hpp"
#include "icop/rng.hpp"
#include "icop/special.hpp"

#include <cmath>

using namespace icop;

TEST_CASE("normal quantile") {
    CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    // reference value from an independent implementation
    CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
    CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
    for (double p : {1e-10, 1e-4, 0.3, 0.9, 1 - 1e-8})
        CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("student t pdf/cdf/quantile") {
    CHECK(t_pdf(0.0, 5.0) == doctest::Approx(0.3796066898224944).epsilon(1e-12));
    CHECK(t_cdf(0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-12));
    for (double p : {0.001, 0.05, 0.5, 0.9, 0.999})
        for (double nu : {2.5, 5.0, 30.0})
            CHECK(t_cdf(t_quantile(p, nu), nu) == doctest::Approx(p).epsilon(1e-9));
    // large nu approaches the normal
    CHECK(t_quantile(0.975, 1e6) == doctest::Approx(1.959964).epsilon(1e-4));
}

TEST_CASE("incomplete beta inverse round trip") {
    for (double a : {0.5, 2.0, 7.5})
        for (double b : {1.0, 3.0})
            for (double p : {0.01, 0.4, 0.99})
                CHECK(incbeta(a, b, incbeta_inv(a, b, p)) ==
                      doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("bivariate normal cdf") {
    CHECK(binorm_cdf(0.0, 0.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(binorm_cdf(0.0, 0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(binorm_cdf(1.0, 2.0, 0.0) ==
          doctest::Approx(norm_cdf(1.0) * norm_cdf(2.0)).epsilon(1e-10));
    CHECK(binorm_cdf(8.0, 8.0, 0.3) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gauss hermite integrates gaussian moments") {
    GaussHermite gh = gauss_hermite(30);
    double m0 = 0.0, m2 = 0.0;
    for (int i = 0; i < 30; ++i) {
        m0 += gh.weights[i];
        m2 += gh.weights[i] * gh.nodes[i] * gh.nodes[i];
    }
    CHECK(m0 == doctest::Approx(std::sqrt(PI)).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(0.5 * std::sqrt(PI)).epsilon(1e-12));
}

TEST_CASE("adaptive simpson and real-line transform") {
    CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    CHECK(integrate_real_line([](double x) { return norm_pdf(x); }) ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(integrate_left_tail([](double x) { return norm_pdf(x); }, 0.0) ==
          doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("interp table: standard normal accuracy") {
    InterpTable t = build_interp_table([](double z) { return norm_cdf(z); },
                                       [](double z) { return norm_logpdf(z); },
                                       100);
    CHECK(t.quantile(0.5) == doctest::Approx(0.0).epsilon(1e-6));
    double max_err = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        double p = 0.001 + (0.999 - 0.001) * i / 2000.0;
        max_err = std::max(max_err, std::fabs(t.quantile(p) - norm_quantile(p)));
    }
    CHECK(max_err <= 1e-3);
}

TEST_CASE("interp table: monotone quantile and round trip") {
    InterpTable t = build_interp_table([](double z) { return norm_cdf(z); },
                                       [](double z) { return norm_logpdf(z); },
                                       100);
    double prev = -1e300;
    for (int i = 1; i < 10000; ++i) {
        double q = t.quantile(i / 10000.0);
        CHECK(q >= prev);
        prev = q;
    }
    for (double p : {0.001, 0.02, 0.5, 0.97, 0.999})
        CHECK(t.cdf(t.quantile(p)) == doctest::Approx(p).epsilon(1e-4));
}

TEST_CASE("interp table: N=5 still monotone") {
    InterpTable t = build_interp_table([](double z) { return norm_cdf(z); },
                                       [](double z) { return norm_logpdf(z); },
                                       5);
    double prev = -1e300;
    for (int i = 1; i < 1000; ++i) {
        double q = t.quantile(i / 1000.0);
        CHECK(q >= prev);
        prev = q;
    }
}

TEST_CASE("rng determinism and stream independence") {
    Rng a(42), b(42), c(42, 1);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    bool differ = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i)
        if (a2.uniform() != c.uniform()) differ = true;
    CHECK(differ);
}
