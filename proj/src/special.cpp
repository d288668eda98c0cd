#include "icop/special.hpp"

#include <limits>
#include <stdexcept>

namespace icop {

namespace {

// Acklam's rational approximation for the standard normal quantile,
// refined below by one Halley step.
double norm_quantile_approx(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("norm_quantile: p must lie in (0,1)");
    double x = norm_quantile_approx(p);
    // Halley refinement against erfc-based CDF
    double e = norm_cdf(x) - p;
    double u = e * std::sqrt(2.0 * PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace {

// continued fraction for the incomplete beta (Lentz's method)
double incbeta_cf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 1e-15, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace

double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double lnfront = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    double front = std::exp(lnfront);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * incbeta_cf(a, b, x) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(a, b)) *
                     incbeta_cf(b, a, 1.0 - x) / b;
}

double incbeta_inv(double a, double b, double p) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0, x = 0.5;
    for (int it = 0; it < 200; ++it) {
        x = 0.5 * (lo + hi);
        double f = incbeta(a, b, x);
        if (f < p) lo = x; else hi = x;
        // Newton step inside the bracket
        double lpdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b);
        double deriv = std::exp(lpdf);
        if (deriv > 0.0) {
            double xn = x - (f - p) / deriv;
            if (xn > lo && xn < hi) x = xn;
        }
        if (hi - lo < 1e-15) break;
        double fx = incbeta(a, b, x);
        if (std::fabs(fx - p) < 1e-15) break;
        if (fx < p) lo = x; else hi = x;
    }
    return x;
}

double t_logpdf(double x, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("t_logpdf: nu must be positive");
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(nu * PI) -
           0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double t_cdf(double x, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("t_cdf: nu must be positive");
    if (x == 0.0) return 0.5;
    double ib = incbeta(0.5 * nu, 0.5, nu / (nu + x * x));
    return x > 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

double t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("t_quantile: p must lie in (0,1)");
    if (!(nu > 0.0)) throw std::domain_error("t_quantile: nu must be positive");
    bool upper = p > 0.5;
    double pp = upper ? 1.0 - p : p;
    double x = incbeta_inv(0.5 * nu, 0.5, 2.0 * pp);
    double t = std::sqrt(nu * (1.0 - x) / x);
    // x can hit 0 for extreme p; guard
    if (!std::isfinite(t)) t = std::numeric_limits<double>::max();
    double q = upper ? t : -t;
    // one Newton polish
    double f = t_cdf(q, nu) - p;
    double d = t_pdf(q, nu);
    if (d > 0.0) q -= f / d;
    return q;
}

// Drezner & Wesolowsky style Gauss-Legendre evaluation
double binorm_cdf(double h, double k, double r) {
    if (std::fabs(r) >= 1.0) {
        if (r >= 1.0) return norm_cdf(std::min(h, k));
        return std::max(0.0, norm_cdf(h) + norm_cdf(k) - 1.0);
    }
    // P(Z1<=h, Z2<=k; r) = Phi(h)Phi(k) + integral of the density over rho in [0, r]
    static const double xs[] = {0.04691008, 0.23076534, 0.5,
                                0.76923466, 0.95308992};
    static const double ws[] = {0.118463443, 0.239314335, 0.284444444,
                                0.239314335, 0.118463443};
    double sum = 0.0;
    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < 5; ++j) {
            double rho = r * (i + xs[j]) / 32.0;
            double om = 1.0 - rho * rho;
            double f = std::exp(-(h * h - 2.0 * rho * h * k + k * k) / (2.0 * om)) /
                       (2.0 * PI * std::sqrt(om));
            sum += ws[j] * f * r / 32.0;
        }
    }
    return norm_cdf(h) * norm_cdf(k) + sum;
}

} // namespace icop
