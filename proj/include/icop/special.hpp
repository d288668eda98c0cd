#pragma once

#include <cmath>

namespace icop {

inline constexpr double PI = 3.14159265358979323846;
inline constexpr double LOG_SQRT_2PI = 0.9189385332046727417803297; // log(sqrt(2*pi))

// ---- standard normal ----

inline double norm_logpdf(double z) { return -0.5 * z * z - LOG_SQRT_2PI; }
inline double norm_pdf(double z) { return std::exp(norm_logpdf(z)); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
// upper tail, accurate for large z
inline double norm_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double norm_quantile(double p);

inline double norm1_logpdf(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * d * d / var - 0.5 * std::log(var) - LOG_SQRT_2PI;
}

// ---- gamma / beta ----

double log_beta(double a, double b);
// regularized incomplete beta I_x(a, b)
double incbeta(double a, double b, double x);
// inverse of I_x(a, b) in x
double incbeta_inv(double a, double b, double p);

inline double gamma_logpdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) +
           (shape - 1.0) * std::log(x) - rate * x;
}

// ---- Student t (location 0, scale 1) ----

double t_logpdf(double x, double nu);
inline double t_pdf(double x, double nu) { return std::exp(t_logpdf(x, nu)); }
double t_cdf(double x, double nu);
double t_quantile(double p, double nu);

// ---- bivariate standard normal CDF P(Z1 <= h, Z2 <= k), corr r ----
double binorm_cdf(double h, double k, double r);

} // namespace icop
