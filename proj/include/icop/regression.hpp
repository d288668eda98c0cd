#pragma once

#include "icop/copula_core.hpp"
#include "icop/margins.hpp"
#include "icop/mcmc.hpp"
#include "icop/rng.hpp"

#include <Eigen/Dense>
#include <vector>

namespace icop {

struct RegressionData {
    Eigen::MatrixXd B; // n x p design, rows x_i'
    Eigen::VectorXd y;
    Margin margin; // G, fitted before the copula step
};

struct HorseshoeState {
    Eigen::VectorXd lambda; // prior sd of beta_j; P = diag(lambda)^{-2}
    double tau = 1.0;
};

// s = (1 + x' P^{-1} x)^{-1/2}, in (0, 1]
double reg_scale(const Eigen::VectorXd& x, const HorseshoeState& theta);

// R = S (I + B P^{-1} B') S; n capped at 2000, estimation never needs it
CorrelationMatrix reg_correlation(const Eigen::MatrixXd& B,
                                  const HorseshoeState& theta);

// log f(y | x, beta, theta) = sum log phi(z_i; s_i x_i'beta, s_i^2)
//                             + log g(y_i) - log phi(z_i)
double reg_conditional_loglik(const RegressionData& data,
                              const Eigen::VectorXd& beta,
                              const HorseshoeState& theta);

// exact conjugate beta draw plus per-element log-scale random walks on
// lambda_j and tau; covariate columns scaled internally, draws mapped back
Chain reg_mcmc_fit(const RegressionData& data, int iters, Rng& rng,
                   double burn_frac = 0.2);

struct PredictiveCurves {
    std::vector<double> y;
    std::vector<double> bayes; // posterior mixture over draws
    std::vector<double> point; // plug-in at the posterior means
};

PredictiveCurves reg_predict_density(const Eigen::VectorXd& x_new,
                                     const Chain& chain, const Margin& margin,
                                     const std::vector<double>& y_grid);

// 512 equispaced points between margin quantiles 0.001 and 0.999
std::vector<double> default_y_grid(const Margin& margin, int n = 512);

} // namespace icop
