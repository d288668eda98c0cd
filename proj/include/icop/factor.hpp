#pragma once

#include "icop/copula_core.hpp"
#include "icop/rng.hpp"

#include <Eigen/Dense>
#include <string>

namespace icop {

// static factor model z~ = Lambda eta + eps; identified with zero upper
// triangle of Lambda and positive leading diagonal
struct FactorParams {
    Eigen::MatrixXd lambda; // m x p loadings
    Eigen::VectorXd d;      // m idiosyncratic variances

    int dim() const { return static_cast<int>(lambda.rows()); }
    int n_factors() const { return static_cast<int>(lambda.cols()); }

    void validate() const;
    std::string to_json() const;
    static FactorParams from_json(const std::string& text);
};

// Omega = S^{-1/2} (Lambda Lambda' + D) S^{-1/2}, S = diag(Lambda Lambda' + D)
CorrelationMatrix factor_to_correlation(const FactorParams& params);

// eta ~ N_p(0, I), eps ~ N_m(0, D), z = S^{-1/2} (Lambda eta + eps)
Eigen::MatrixXd simulate_factor_z(const FactorParams& params, int n, Rng& rng);

struct FactorFit {
    FactorParams params;
    bool converged = false;
    int iterations = 0;
    std::vector<double> loglik; // per-iteration, nondecreasing
};

// EM for the Gaussian factor model on standardized data; result rotated into
// the identified form by QR of Lambda with sign flips
FactorFit factor_fit_em(const Eigen::MatrixXd& z_data, int p, int max_iter = 2000,
                        double tol = 1e-8);

CopulaSimulator make_factor_simulator(const FactorParams& params);

} // namespace icop
