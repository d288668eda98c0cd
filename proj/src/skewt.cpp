#include "icop/skewt.hpp"
#include "icop/quadrature.hpp"
#include "icop/special.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace icop {

double skewt_marginal_logpdf(double delta_j, double nu, double z) {
    return skewt1_logpdf(z, delta_j, nu);
}

InterpTable skewt_marginal_table(double delta_j, double nu, int n_points) {
    return build_interp_table(
        [delta_j, nu](double z) { return skewt1_cdf(z, delta_j, nu); },
        [delta_j, nu](double z) { return skewt1_logpdf(z, delta_j, nu); },
        n_points);
}

Eigen::MatrixXd simulate_skewt_z(const SkewTCopulaParams& params, int n, Rng& rng) {
    const int m = params.gamma.dim();
    if (params.delta.size() != m)
        throw std::invalid_argument("simulate_skewt_z: delta size mismatch");
    if (!(params.nu > 0.0))
        throw std::domain_error("simulate_skewt_z: nu must be positive");
    const Eigen::MatrixXd& L = params.gamma.cholesky_lower();
    Eigen::MatrixXd z(n, m);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double w = rng.gamma(0.5 * params.nu, 0.5 * params.nu);
        double sd = 1.0 / std::sqrt(w);
        Eigen::VectorXd q(m), eps(m);
        for (int j = 0; j < m; ++j) {
            q(j) = truncated_normal(0.0, sd, 0.0, inf, rng);
            eps(j) = rng.normal();
        }
        z.row(i) = (params.delta.cwiseProduct(q) + sd * (L * eps)).transpose();
    }
    return z;
}

namespace {

// P(V > 0) for V ~ t_m(mean, scale, df), m <= 3, by conditioning recursion.
double t_orthant_prob(const Eigen::VectorXd& mean, const Eigen::MatrixXd& scale,
                      double df) {
    const int m = static_cast<int>(mean.size());
    // spherical central case: all orthants equal by symmetry
    bool central = mean.lpNorm<Eigen::Infinity>() < 1e-14;
    bool diag_prop = true;
    for (int i = 0; i < m && diag_prop; ++i)
        for (int j = 0; j < i; ++j)
            if (std::fabs(scale(i, j)) > 1e-14 * scale(0, 0)) diag_prop = false;
    if (central && diag_prop) return std::pow(2.0, -m);

    if (m == 1)
        return t_cdf(mean(0) / std::sqrt(scale(0, 0)), df);
    if (m > 3)
        throw std::length_error("t_orthant_prob: only m <= 3 supported");

    double s11 = scale(0, 0);
    auto integrand = [&](double v1) {
        double d1 = v1 - mean(0);
        double f1 = t_pdf(d1 / std::sqrt(s11), df) / std::sqrt(s11);
        if (f1 <= 0.0) return 0.0;
        int r = m - 1;
        Eigen::VectorXd cmean(r);
        Eigen::MatrixXd cscale(r, r);
        for (int i = 0; i < r; ++i) {
            cmean(i) = mean(i + 1) + scale(i + 1, 0) / s11 * d1;
            for (int j = 0; j < r; ++j)
                cscale(i, j) = scale(i + 1, j + 1) -
                               scale(i + 1, 0) * scale(0, j + 1) / s11;
        }
        double q1 = d1 * d1 / s11;
        cscale *= (df + q1) / (df + 1.0);
        return f1 * t_orthant_prob(cmean, cscale, df + 1.0);
    };
    // v1 in (0, inf), mapped through tan
    auto g = [&](double t) {
        double c = std::cos(t);
        if (c < 1e-300) return 0.0;
        double x = std::tan(t);
        return integrand(x) / (c * c);
    };
    double tol = (m == 2) ? 1e-11 : 1e-8;
    return integrate(g, 1e-12, 0.5 * PI - 1e-12, tol);
}

} // namespace

double skewt_mv_logpdf(const SkewTCopulaParams& params, const Eigen::VectorXd& z) {
    const int m = params.gamma.dim();
    if (!(params.nu > 0.0))
        throw std::domain_error("skewt_mv_logpdf: nu must be positive");
    const double nu = params.nu;
    Eigen::MatrixXd D = params.delta.asDiagonal();
    Eigen::MatrixXd A = params.gamma.values() + D * D;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("skewt_mv_logpdf: Gamma + D^2 not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    double logdetA = 2.0 * L.diagonal().array().log().sum();
    Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(z);
    double S = w.squaredNorm();

    // f_t with identity scale depends on z only through S(z)
    double log_ft = std::lgamma(0.5 * (nu + m)) - std::lgamma(0.5 * nu) -
                    0.5 * m * std::log(nu * PI) -
                    0.5 * (nu + m) * std::log1p(S / nu);

    Eigen::VectorXd Ainv_z = llt.solve(z);
    Eigen::VectorXd v_mean = D * Ainv_z;
    Eigen::MatrixXd v_scale =
        (S + nu) / (m + nu) *
        (Eigen::MatrixXd::Identity(m, m) - D * llt.solve(D));
    double pr = t_orthant_prob(v_mean, v_scale, m + nu);
    if (pr <= 0.0) pr = 1e-300;
    return m * std::log(2.0) - 0.5 * logdetA + log_ft + std::log(pr);
}

double skewt_aug_logdensity(const SkewTCopulaParams& params,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& q,
                            double w) {
    const int m = params.gamma.dim();
    if (q.size() != m || x.size() != m)
        throw std::invalid_argument("skewt_aug_logdensity: dimension mismatch");
    if (!(w > 0.0)) throw std::domain_error("skewt_aug_logdensity: w must be positive");
    for (int j = 0; j < m; ++j)
        if (!(q(j) > 0.0))
            throw std::domain_error("skewt_aug_logdensity: q must be positive");

    Eigen::VectorXd mean = params.delta.cwiseProduct(q);
    Eigen::VectorXd d = x - mean;
    Eigen::VectorXd wd =
        params.gamma.cholesky_lower().triangularView<Eigen::Lower>().solve(d);
    double log_x_term = -0.5 * w * wd.squaredNorm() -
                        0.5 * params.gamma.log_det() + 0.5 * m * std::log(w) -
                        0.5 * m * std::log(2.0 * PI);
    double log_q_term = -0.5 * w * q.squaredNorm() + 0.5 * m * std::log(w) -
                        0.5 * m * std::log(2.0 * PI);
    double log_w_term = gamma_logpdf(w, 0.5 * params.nu, 0.5 * params.nu);
    return log_x_term + log_q_term + log_w_term;
}

Eigen::MatrixXd partials_to_correlation(const Eigen::VectorXd& unconstrained, int m) {
    const int n_off = m * (m - 1) / 2;
    if (unconstrained.size() != n_off)
        throw std::invalid_argument("partials_to_correlation: wrong length");
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
    int idx = 0;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            P(i, j) = std::tanh(unconstrained(idx++));

    // canonical-vine recursion: P(i,j) is the partial correlation of (i, j)
    // given 0..i-1
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            double r = P(i, j);
            for (int k = i - 1; k >= 0; --k)
                r = r * std::sqrt((1.0 - P(k, i) * P(k, i)) *
                                  (1.0 - P(k, j) * P(k, j))) +
                    P(k, i) * P(k, j);
            R(i, j) = r;
            R(j, i) = r;
        }
    }
    return R;
}

CopulaSimulator make_skewt_simulator(const SkewTCopulaParams& params,
                                     int table_points) {
    const int m = params.gamma.dim();
    auto tables = std::make_shared<std::vector<InterpTable>>();
    for (int j = 0; j < m; ++j)
        tables->push_back(skewt_marginal_table(params.delta(j), params.nu,
                                               table_points));
    auto p = std::make_shared<SkewTCopulaParams>(params);
    CopulaSimulator sim;
    sim.dim = m;
    sim.draw_z = [p](Rng& rng) {
        return Eigen::VectorXd(simulate_skewt_z(*p, 1, rng).row(0));
    };
    sim.marginal_cdf = [tables](int j, double z) { return (*tables)[j].cdf(z); };
    return sim;
}

namespace {

struct TableCache {
    std::map<std::pair<long long, long long>, std::shared_ptr<InterpTable>> map;

    std::shared_ptr<InterpTable> get(double delta, double nu, int n_points) {
        // rebuilt only when (delta, nu) moved beyond 1e-8
        auto key = std::make_pair(llround(delta * 1e8), llround(nu * 1e8));
        auto it = map.find(key);
        if (it != map.end()) return it->second;
        auto t = std::make_shared<InterpTable>(
            skewt_marginal_table(delta, nu, n_points));
        if (map.size() > 400) map.clear();
        map[key] = t;
        return t;
    }
};

} // namespace

Chain skewt_mcmc_fit(const Eigen::MatrixXd& u_data, const SkewTPrior& prior,
                     int iters, Rng& rng, double burn_frac) {
    const int n = static_cast<int>(u_data.rows());
    const int m = static_cast<int>(u_data.cols());
    if (iters > 0 && n < 10)
        throw std::invalid_argument("skewt_mcmc_fit: need at least 10 observations");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (!(u_data(i, j) > 0.0 && u_data(i, j) < 1.0))
                throw std::domain_error("skewt_mcmc_fit: u must lie in (0,1)");

    const int n_off = m * (m - 1) / 2;
    const int table_points = 100;

    Chain chain;
    chain.burn_in = static_cast<int>(burn_frac * iters);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            chain.names.push_back("gamma_" + std::to_string(i + 1) + "_" +
                                  std::to_string(j + 1));
    for (int j = 0; j < m; ++j)
        chain.names.push_back("delta_" + std::to_string(j + 1));
    chain.names.push_back("nu");
    int retained = std::max(0, iters - chain.burn_in);
    chain.draws.resize(retained, static_cast<int>(chain.names.size()));
    if (iters == 0) return chain;

    // state on working scales
    Eigen::VectorXd eta_gamma = Eigen::VectorXd::Zero(n_off);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(m);
    double log_nu = std::log(8.0);

    Eigen::MatrixXd q_lat = Eigen::MatrixXd::Ones(n, m);
    Eigen::VectorXd w_lat = Eigen::VectorXd::Ones(n);

    TableCache cache;

    auto make_params = [&](const Eigen::VectorXd& eta, const Eigen::VectorXd& del,
                           double lnu) {
        return SkewTCopulaParams{
            CorrelationMatrix(partials_to_correlation(eta, m)), del,
            std::exp(lnu)};
    };

    // z and marginal log-densities implied by (delta, nu)
    auto compute_z = [&](const Eigen::VectorXd& del, double nu,
                         Eigen::MatrixXd& z, double& sum_log_fz) {
        sum_log_fz = 0.0;
        z.resize(n, m);
        for (int j = 0; j < m; ++j) {
            auto table = cache.get(prior.fix_delta_zero ? 0.0 : del(j), nu,
                                   table_points);
            for (int i = 0; i < n; ++i) {
                z(i, j) = table->quantile(u_data(i, j));
                sum_log_fz += table->logpdf(z(i, j));
            }
        }
    };

    // full augmented log posterior for a candidate (eta, delta, log nu)
    auto logpost = [&](const Eigen::VectorXd& eta, const Eigen::VectorXd& del,
                       double lnu) -> double {
        double nu = std::exp(lnu);
        if (nu <= prior.nu_lo || nu >= prior.nu_hi)
            return -std::numeric_limits<double>::infinity();
        SkewTCopulaParams par = make_params(eta, del, lnu);
        Eigen::MatrixXd z;
        double sum_log_fz;
        compute_z(del, nu, z, sum_log_fz);
        double lp = -sum_log_fz;
        for (int i = 0; i < n; ++i)
            lp += skewt_aug_logdensity(par, z.row(i).transpose(),
                                       q_lat.row(i).transpose(), w_lat(i));
        // priors: delta_j ~ N(0, sd^2); partials uniform via tanh Jacobian;
        // nu ~ Gamma truncated, sampled on the log scale
        for (int j = 0; j < m; ++j)
            lp += norm1_logpdf(del(j), 0.0, prior.delta_sd * prior.delta_sd);
        for (int k = 0; k < n_off; ++k) {
            double t = std::tanh(eta(k));
            lp += std::log1p(-t * t);
        }
        lp += gamma_logpdf(nu, prior.nu_shape, prior.nu_rate) + lnu;
        return lp;
    };

    RwScale sc_gamma{.log_step = std::log(0.1), .target = n_off > 1 ? 0.234 : 0.44};
    RwScale sc_delta{.log_step = std::log(0.1), .target = m > 1 ? 0.234 : 0.44};
    RwScale sc_nu{.log_step = std::log(0.3), .target = 0.44};

    const double inf = std::numeric_limits<double>::infinity();
    int row = 0;
    for (int it = 0; it < iters; ++it) {
        SkewTCopulaParams par = make_params(eta_gamma, delta, log_nu);
        double nu = par.nu;
        Eigen::MatrixXd z;
        double sum_log_fz;
        compute_z(delta, nu, z, sum_log_fz);

        // latent q_i: truncated-normal Gibbs from precision w(D G^{-1} D + I)
        Eigen::MatrixXd Ginv = par.gamma.cholesky_lower()
                                   .triangularView<Eigen::Lower>()
                                   .solve(Eigen::MatrixXd::Identity(m, m));
        Ginv = Ginv.transpose() * Ginv;
        Eigen::MatrixXd D = delta.asDiagonal();
        Eigen::MatrixXd Aq = D * Ginv * D + Eigen::MatrixXd::Identity(m, m);
        Eigen::MatrixXd DGinv = D * Ginv;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd b = w_lat(i) * (DGinv * z.row(i).transpose());
            for (int j = 0; j < m; ++j) {
                double prec_jj = w_lat(i) * Aq(j, j);
                double s = 0.0;
                for (int k = 0; k < m; ++k)
                    if (k != j) s += w_lat(i) * Aq(j, k) * q_lat(i, k);
                double mean = (b(j) - s) / prec_jj;
                q_lat(i, j) =
                    truncated_normal(mean, 1.0 / std::sqrt(prec_jj), 0.0, inf, rng);
            }
        }

        // latent w_i: conjugate Gamma
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd d =
                z.row(i).transpose() - delta.cwiseProduct(q_lat.row(i).transpose());
            Eigen::VectorXd wd = par.gamma.cholesky_lower()
                                     .triangularView<Eigen::Lower>()
                                     .solve(d);
            double rate = 0.5 * (wd.squaredNorm() +
                                 q_lat.row(i).squaredNorm() + nu);
            double shape = 0.5 * (2.0 * m + nu);
            w_lat(i) = rng.gamma(shape, rate);
        }

        // parameter blocks
        if (n_off > 0) {
            double cur = logpost(eta_gamma, delta, log_nu);
            if (!std::isfinite(cur))
                throw std::runtime_error("skewt_mcmc_fit: non-finite log posterior at iteration " +
                                         std::to_string(it));
            auto f = [&](const Eigen::VectorXd& eta) {
                return logpost(eta, delta, log_nu);
            };
            adaptive_rw_mh(f, eta_gamma, cur, sc_gamma, rng);
        }
        if (!prior.fix_delta_zero) {
            double cur = logpost(eta_gamma, delta, log_nu);
            auto f = [&](const Eigen::VectorXd& del) {
                return logpost(eta_gamma, del, log_nu);
            };
            adaptive_rw_mh(f, delta, cur, sc_delta, rng);
        }
        {
            double cur = logpost(eta_gamma, delta, log_nu);
            Eigen::VectorXd lnu_vec(1);
            lnu_vec(0) = log_nu;
            auto f = [&](const Eigen::VectorXd& v) {
                return logpost(eta_gamma, delta, v(0));
            };
            adaptive_rw_mh(f, lnu_vec, cur, sc_nu, rng);
            log_nu = lnu_vec(0);
        }
        if (it == chain.burn_in) {
            sc_gamma.frozen = sc_delta.frozen = sc_nu.frozen = true;
        }

        if (it >= chain.burn_in) {
            Eigen::MatrixXd R = partials_to_correlation(eta_gamma, m);
            int col = 0;
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j) chain.draws(row, col++) = R(i, j);
            for (int j = 0; j < m; ++j) chain.draws(row, col++) = delta(j);
            chain.draws(row, col++) = std::exp(log_nu);
            ++row;
        }
    }
    chain.acceptance_rates["gamma"] = sc_gamma.rate();
    chain.acceptance_rates["delta"] = sc_delta.rate();
    chain.acceptance_rates["nu"] = sc_nu.rate();
    return chain;
}

} // namespace icop
