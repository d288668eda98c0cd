#pragma once

#include "icop/copula_core.hpp"
#include "icop/interp.hpp"
#include "icop/mcmc.hpp"
#include "icop/rng.hpp"

#include <Eigen/Dense>

namespace icop {

struct SkewTCopulaParams {
    CorrelationMatrix gamma; // Gamma restricted to unit diagonal
    Eigen::VectorXd delta;   // asymmetry, one per coordinate
    double nu;               // degrees of freedom
};

struct SkewTAugmentation {
    Eigen::VectorXd q; // componentwise positive
    double w;          // positive
};

// m = 1 specialization of the multivariate skew t density (gamma = 1):
// see skewt1_logpdf in margins.hpp. Re-exported here by name for the module:
double skewt_marginal_logpdf(double delta_j, double nu, double z);

// Quantile / log-density table for the skew t auxiliary margin; CDF by
// quadrature of the density.
InterpTable skewt_marginal_table(double delta_j, double nu, int n_points = 100);

// Hidden-conditioning draws: w ~ Gamma(nu/2, nu/2), q positive-truncated
// N(0, I/w), z ~ N(D q, Gamma/w).
Eigen::MatrixXd simulate_skewt_z(const SkewTCopulaParams& params, int n, Rng& rng);

// Full m-variate skew t density for z (includes the Pr(V > 0) term).
double skewt_mv_logpdf(const SkewTCopulaParams& params, const Eigen::VectorXd& z);

// log of the augmented density: phi_m(x; Dq, Gamma/w) phi_m(q; 0, I/w)
// Gamma-pdf(w; nu/2, nu/2), up to the fixed 2^m normalizer.
double skewt_aug_logdensity(const SkewTCopulaParams& params,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& q,
                            double w);

struct SkewTPrior {
    double delta_sd = std::sqrt(10.0); // delta_j ~ N(0, 10)
    double nu_shape = 2.0;             // nu ~ Gamma(2, 0.1) on (2, 200)
    double nu_rate = 0.1;
    double nu_lo = 2.0;
    double nu_hi = 200.0;
    bool fix_delta_zero = false;       // t-copula reduction
};

// Data augmentation MCMC over (Gamma, delta, nu) and per-observation (q, w).
Chain skewt_mcmc_fit(const Eigen::MatrixXd& u_data, const SkewTPrior& prior,
                     int iters, Rng& rng, double burn_frac = 0.2);

CopulaSimulator make_skewt_simulator(const SkewTCopulaParams& params,
                                     int table_points = 100);

// Canonical partial-correlation vector (tanh of the unconstrained values)
// to correlation matrix; preserves positive definiteness for any input.
Eigen::MatrixXd partials_to_correlation(const Eigen::VectorXd& unconstrained, int m);

} // namespace icop
