#pragma once

#include "icop/interp.hpp"

#include <memory>
#include <cmath>
#include <string>
#include <vector>

namespace icop {

enum class MarginFamily {
    normal,          // params: mean, sd
    student_t,       // params: nu (location 0, scale 1)
    skew_t_univariate, // params: delta, nu (Sahu skew t, gamma = 1)
    asym_laplace,    // params: mu, sigma, p (quantile parameterization)
    kde,             // params: none; kernel data held separately
    interp_table,    // table-backed margin
};

struct AsymLaplaceParams {
    double mu = 0.0;
    double sigma = 1.0;
    double p = 0.5; // CDF(mu) = p
};

// Univariate continuous margin: density, CDF, quantile.
class Margin {
public:
    static Margin normal(double mean, double sd);
    static Margin student_t(double nu);
    static Margin skew_t(double delta, double nu);
    static Margin asym_laplace(double mu, double sigma, double p);
    static Margin from_table(InterpTable table);

    MarginFamily family() const { return family_; }
    const std::vector<double>& params() const { return params_; }

    double logpdf(double y) const;
    double pdf(double y) const { return std::exp(logpdf(y)); }
    double cdf(double y) const;
    // p clamped internally to [1e-12, 1-1e-12]; p outside (0,1) is an error
    double quantile(double p) const;

    double support_lo() const { return support_lo_; }
    double support_hi() const { return support_hi_; }

    std::string to_json() const;
    static Margin from_json(const std::string& text);

private:
    friend Margin fit_kde(const std::vector<double>&, bool);

    Margin() = default;

    MarginFamily family_ = MarginFamily::normal;
    std::vector<double> params_;
    double support_lo_ = -1e308;
    double support_hi_ = 1e308;

    // kde state
    std::vector<double> kde_points_;
    std::vector<double> kde_bandwidths_;

    std::shared_ptr<InterpTable> table_;

    double quantile_root(double p, double tol) const;
};

// Gaussian KDE. adaptive=true applies Abramson local bandwidths on top of a
// Silverman-rule pilot.
Margin fit_kde(const std::vector<double>& data, bool adaptive = true);

// Maximum likelihood fit of the quantile-parameterized asymmetric Laplace.
Margin fit_asym_laplace(const std::vector<double>& data);

double asym_laplace_logpdf(double y, const AsymLaplaceParams& par);
double asym_laplace_cdf(double y, const AsymLaplaceParams& par);
double asym_laplace_quantile(double p, const AsymLaplaceParams& par);

// Sahu skew t marginal (gamma = 1): the m = 1 case of the skew t density.
double skewt1_logpdf(double z, double delta, double nu);
double skewt1_cdf(double z, double delta, double nu);

} // namespace icop
