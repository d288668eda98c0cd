#pragma once

#include "icop/margins.hpp"
#include "icop/rng.hpp"

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace icop {

// Symmetric positive definite with unit diagonal. Construction validates and
// caches the Cholesky factor, applying a jitter ladder before failing.
class CorrelationMatrix {
public:
    explicit CorrelationMatrix(Eigen::MatrixXd values);
    static CorrelationMatrix identity(int m);
    // normalize a covariance to its correlation matrix
    static CorrelationMatrix from_covariance(const Eigen::MatrixXd& cov);

    int dim() const { return static_cast<int>(values_.rows()); }
    const Eigen::MatrixXd& values() const { return values_; }
    const Eigen::MatrixXd& cholesky_lower() const { return chol_; }
    double log_det() const;

    // z' (Omega^{-1} - I) z via the cached factor
    double excess_quadform(const Eigen::VectorXd& z) const;

private:
    Eigen::MatrixXd values_;
    Eigen::MatrixXd chol_;
};

struct TCopulaParams {
    CorrelationMatrix omega;
    double nu;
};

struct DiscreteBounds {
    std::vector<double> a;
    std::vector<double> b;
};

double gaussian_copula_logdensity(const CorrelationMatrix& omega,
                                  const Eigen::VectorXd& u);
double t_copula_logdensity(const TCopulaParams& params, const Eigen::VectorXd& u);

// multivariate normal / t log densities (shared oracles and building blocks)
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov);
double mvt_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& scale, double nu);

// One z-draw from the model's auxiliary distribution plus its marginal CDF:
// the two family hooks generic simulation needs.
struct CopulaSimulator {
    int dim;
    std::function<Eigen::VectorXd(Rng&)> draw_z;
    std::function<double(int j, double z)> marginal_cdf;
};

CopulaSimulator make_gaussian_simulator(const CorrelationMatrix& omega);
CopulaSimulator make_t_simulator(const TCopulaParams& params);

// Algorithm-1 simulation: z ~ F_Z, u_j = F_{Z_j}(z_j), y_j = F_{Y_j}^{-1}(u_j)
Eigen::MatrixXd simulate_copula_model(const CopulaSimulator& sim,
                                      const std::vector<Margin>& margins,
                                      int n, Rng& rng);
// u-scale output (margins uniform)
Eigen::MatrixXd simulate_copula_u(const CopulaSimulator& sim, int n, Rng& rng);

// Bounds a_j = F(y_j^-), b_j = F(y_j) from discrete CDF tables. Each table
// lists (support value, CDF at value) in ascending order.
struct DiscreteCdf {
    std::vector<double> values;
    std::vector<double> cdf;
};
DiscreteBounds discrete_bounds(const std::vector<DiscreteCdf>& cdfs,
                               const std::vector<double>& y);

// 2^m corner differencing of a copula CDF over the bounds box.
double discrete_mass_by_differencing(
    const std::function<double(const std::vector<double>&)>& copula_cdf,
    const DiscreteBounds& bounds);

// One Gibbs sweep of the latent z for discrete-margin data augmentation:
// each z_j redrawn from its conditional normal truncated to
// [Phi^{-1}(a_j), Phi^{-1}(b_j)).
Eigen::VectorXd gaussian_da_z_step(const CorrelationMatrix& omega,
                                   const DiscreteBounds& bounds,
                                   const Eigen::VectorXd& z, Rng& rng);

} // namespace icop
