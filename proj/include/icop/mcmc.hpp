#pragma once

#include "icop/rng.hpp"

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace icop {

// Posterior draws plus per-block acceptance counters.
struct Chain {
    std::vector<std::string> names;
    Eigen::MatrixXd draws; // retained iterates x parameters
    std::map<std::string, Eigen::MatrixXd> latent_blocks;
    std::map<std::string, double> acceptance_rates;
    int burn_in = 0;
    std::uint64_t seed = 0;

    int n_draws() const { return static_cast<int>(draws.rows()); }
    Eigen::VectorXd column(const std::string& name) const;
};

struct ParamSummary {
    double mean = 0.0;
    double q05 = 0.0, q50 = 0.0, q95 = 0.0;
    double accept_rate = -1.0; // -1 when no MH block applies
};

std::map<std::string, ParamSummary> chain_summary(const Chain& chain);

void write_chain_csv(const Chain& chain, const std::string& path);
std::string summary_json(const Chain& chain);

// Symmetric banded matrix stored by diagonals: bands[k](i) = A(i+k, i),
// k = 0..bandwidth. Must be positive definite.
struct BandedPrecision {
    int dim = 0;
    int bandwidth = 0;
    std::vector<Eigen::VectorXd> bands;

    static BandedPrecision zero(int dim, int bandwidth);
    Eigen::MatrixXd dense() const;
};

// Banded Cholesky factor, lower triangular, same storage layout.
struct BandedCholesky {
    int dim = 0;
    int bandwidth = 0;
    std::vector<Eigen::VectorXd> bands;

    Eigen::VectorXd solve_lower(const Eigen::VectorXd& b) const;  // L x = b
    Eigen::VectorXd solve_upper(const Eigen::VectorXd& b) const;  // L^T x = b
};

BandedCholesky banded_cholesky(const BandedPrecision& prec);

// Draw from N(prec^{-1} linear_term, prec^{-1}).
Eigen::VectorXd banded_gaussian_sample(const BandedPrecision& prec,
                                       const Eigen::VectorXd& linear_term,
                                       Rng& rng);
// log N(x; prec^{-1} b, prec^{-1}) up to no dropped terms
double banded_gaussian_logpdf(const BandedPrecision& prec,
                              const Eigen::VectorXd& linear_term,
                              const Eigen::VectorXd& x);

// Exact draw on [lo, hi); inverse CDF centrally, Robert's exponential
// rejection when the interval sits beyond 4 sd in a tail.
double truncated_normal(double mean, double sd, double lo, double hi, Rng& rng);

// Adaptive random-walk Metropolis-Hastings on a transformed scale.
struct RwScale {
    double log_step = 0.0;
    double target = 0.234;
    long accepts = 0;
    long proposals = 0;
    bool frozen = false;

    double step() const { return std::exp(log_step); }
    double rate() const { return proposals ? double(accepts) / proposals : 0.0; }
};

// One multivariate RW-MH move; returns true on acceptance and updates state
// in place. Robbins-Monro adaptation of the proposal scale until frozen.
bool adaptive_rw_mh(const std::function<double(const Eigen::VectorXd&)>& logpost,
                    Eigen::VectorXd& state, double& current_logpost,
                    RwScale& scale, Rng& rng);

} // namespace icop
