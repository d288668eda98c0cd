#pragma once

#include "icop/copula_core.hpp"
#include "icop/interp.hpp"
#include "icop/margins.hpp"
#include "icop/mcmc.hpp"
#include "icop/rng.hpp"

#include <Eigen/Dense>
#include <vector>

namespace icop {

// ---- stationary AR(p) Gaussian copula ----

struct ArCopulaParams {
    Eigen::VectorXd rho;    // AR coefficients, innovation variance fixed at 1
    bool projected = false; // true when a nonstationary fit was shrunk back
};

// Yule-Walker autocovariances gamma_0..gamma_hmax with unit innovation variance
Eigen::VectorXd ar_autocovariances(const Eigen::VectorXd& rho, int h_max);

// Toeplitz correlation matrix gamma_|i-j| / gamma_0, t x t
CorrelationMatrix ar_copula_correlation(const Eigen::VectorXd& rho, int t);

// rho_h^S = (6/pi) asin(gamma_h / (2 gamma_0))
double spearman_lag(const Eigen::VectorXd& rho, int h);

// log f(u_next | history); z on the N(0, gamma_0) scale
double ar_conditional_logdensity(const Eigen::VectorXd& rho,
                                 const std::vector<double>& u_history,
                                 double u_next);

// conditional least squares on z_t = Phi^{-1}(u_t)
ArCopulaParams ar_fit(const std::vector<double>& u_data, int p);

// ---- Gaussian VAR copula ----

struct VarCopulaParams {
    std::vector<Eigen::MatrixXd> b; // B_1..B_p, each d x d
    Eigen::MatrixXd sigma;          // innovation covariance
    bool projected = false;

    int dim() const { return static_cast<int>(sigma.rows()); }
    int lags() const { return static_cast<int>(b.size()); }
};

// least squares on z columns; rescaled so the implied Var(Z_jt) = 1
VarCopulaParams var_fit(const Eigen::MatrixXd& u_data, int p);

// Omega_0..Omega_hmax, cross-correlation blocks Corr(Z_{t+h}, Z_t)
std::vector<Eigen::MatrixXd> var_block_correlations(const VarCopulaParams& params,
                                                    int h_max);

// one draw of Y_{t+1}: simulate Z_{t+1} from the VAR, map through the margins
Eigen::VectorXd var_predict_draw(const VarCopulaParams& params,
                                 const std::vector<Margin>& margins,
                                 const Eigen::MatrixXd& u_history, Rng& rng);

// stationary covariance of x_t = F x_{t-1} + e, e ~ N(0, Q)
Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Q);

// ---- UCSV copula ----

struct UcsvParams {
    double rho_mu = 0.0;
    double rho_zeta = 0.0;
    double sigma2_mu = 0.1;
    double sigma2_zeta = 0.1;
};

struct UcsvDerived {
    double s2_mu = 0.0;   // stationary variance of mu_t
    double s2_zeta = 0.0; // stationary variance of zeta_t
    double zeta_bar = 0.0;
};

// checks |rho| < 1, sigma2 > 0, sigma2_mu < 1 - rho_mu^2; returns the derived
// constants with Var(Z_t) = s2_mu + exp(zeta_bar + s2_zeta/2) = 1
UcsvDerived ucsv_validate(const UcsvParams& params);

// scale-mixture margin f_Z(z) = int phi(z; 0, s2_mu + e^zeta) p(zeta) dzeta,
// Gauss-Hermite in zeta, tabulated
InterpTable ucsv_margin(const UcsvParams& params, int n_table = 100,
                        int n_quad = 50);

struct StatePaths {
    Eigen::VectorXd mu;
    Eigen::VectorXd zeta;
};

std::pair<Eigen::VectorXd, StatePaths> ucsv_simulate_z(const UcsvParams& params,
                                                       int T, Rng& rng);

struct UcsvPrior {
    double sigma2_zeta_max = 10.0; // otherwise flat 1/(s2m s2z) on the region
};

// data augmentation MCMC: exact band-1 Gaussian draw for mu, independence MH
// from a Laplace approximation for zeta, adaptive random walk for theta
Chain ucsv_mcmc_fit(const std::vector<double>& u_data, const UcsvPrior& prior,
                    int iters, Rng& rng, double burn_frac = 0.2,
                    bool store_states = false);

struct DensityGrid {
    Eigen::VectorXd u;      // grid points, midpoints of (0,1)
    Eigen::MatrixXd values; // c(u_i, u_j)
};

// lag-1 copula density c(u_1, u_2) on a grid, latent states integrated out by
// bivariate Gauss-Hermite
DensityGrid ucsv_bivariate_density_grid(const UcsvParams& params, int grid_n);

// ---- one-step-ahead predictive density on a y grid ----

struct TsModel {
    enum class Kind { ar, ucsv } kind = Kind::ar;
    Eigen::VectorXd rho; // AR
    UcsvParams ucsv;
    int n_particles = 2000; // UCSV bootstrap filter
};

std::vector<double> ts_predictive_density(const TsModel& model,
                                          const std::vector<double>& u_history,
                                          const Margin& margin,
                                          const std::vector<double>& y_grid,
                                          Rng& rng);

} // namespace icop
