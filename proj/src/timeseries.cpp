#include "icop/timeseries.hpp"
#include "icop/quadrature.hpp"
#include "icop/special.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace icop {

namespace {

Eigen::MatrixXd ar_companion(const Eigen::VectorXd& rho) {
    const int p = static_cast<int>(rho.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(p, p);
    F.row(0) = rho.transpose();
    for (int i = 1; i < p; ++i) F(i, i - 1) = 1.0;
    return F;
}

double spectral_radius(const Eigen::MatrixXd& F) {
    if (F.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(F, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void check_stationary(const Eigen::VectorXd& rho) {
    if (rho.size() == 0) return;
    if (spectral_radius(ar_companion(rho)) >= 1.0)
        throw std::domain_error("AR coefficients are not stationary");
}

double probit(double u) {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("u values must lie strictly in (0,1)");
    return norm_quantile(u);
}

} // namespace

Eigen::VectorXd ar_autocovariances(const Eigen::VectorXd& rho, int h_max) {
    check_stationary(rho);
    const int p = static_cast<int>(rho.size());
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(h_max + 1);
    if (p == 0) {
        gamma(0) = 1.0;
        return gamma;
    }
    // Yule-Walker in gamma_0..gamma_p with sigma^2 = 1
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p + 1, p + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p + 1);
    rhs(0) = 1.0;
    for (int k = 0; k <= p; ++k) {
        A(k, k) += 1.0;
        for (int j = 1; j <= p; ++j) A(k, std::abs(k - j)) -= rho(j - 1);
    }
    Eigen::VectorXd g = A.colPivHouseholderQr().solve(rhs);
    for (int h = 0; h <= std::min(h_max, p); ++h) gamma(h) = g(h);
    for (int h = p + 1; h <= h_max; ++h) {
        double s = 0.0;
        for (int j = 1; j <= p; ++j) s += rho(j - 1) * gamma(h - j);
        gamma(h) = s;
    }
    if (!(gamma(0) > 0.0))
        throw std::domain_error("Yule-Walker produced a nonpositive variance");
    return gamma;
}

CorrelationMatrix ar_copula_correlation(const Eigen::VectorXd& rho, int t) {
    if (t < 1) throw std::invalid_argument("ar_copula_correlation: t >= 1");
    Eigen::VectorXd gamma = ar_autocovariances(rho, t - 1);
    Eigen::MatrixXd R(t, t);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) R(i, j) = gamma(std::abs(i - j)) / gamma(0);
    return CorrelationMatrix(R);
}

double spearman_lag(const Eigen::VectorXd& rho, int h) {
    Eigen::VectorXd gamma = ar_autocovariances(rho, h);
    return 6.0 / PI * std::asin(gamma(h) / (2.0 * gamma(0)));
}

double ar_conditional_logdensity(const Eigen::VectorXd& rho,
                                 const std::vector<double>& u_history,
                                 double u_next) {
    const int p = static_cast<int>(rho.size());
    const int T = static_cast<int>(u_history.size());
    if (T < p)
        throw std::domain_error("ar_conditional_logdensity: history shorter than the lag order");
    Eigen::VectorXd gamma = ar_autocovariances(rho, 0);
    double sg = std::sqrt(gamma(0));
    double z_next = sg * probit(u_next);
    double mean = 0.0;
    for (int k = 1; k <= p; ++k) mean += rho(k - 1) * sg * probit(u_history[T - k]);
    return norm_logpdf(z_next - mean) - norm1_logpdf(z_next, 0.0, gamma(0));
}

ArCopulaParams ar_fit(const std::vector<double>& u_data, int p) {
    const int T = static_cast<int>(u_data.size());
    if (p < 1) throw std::domain_error("ar_fit: need p >= 1");
    if (T <= 5 * p) throw std::domain_error("ar_fit: need T > 5p");
    Eigen::VectorXd z(T);
    for (int t = 0; t < T; ++t) z(t) = probit(u_data[t]);

    Eigen::MatrixXd X(T - p, p);
    Eigen::VectorXd y(T - p);
    for (int t = p; t < T; ++t) {
        y(t - p) = z(t);
        for (int k = 1; k <= p; ++k) X(t - p, k - 1) = z(t - k);
    }
    ArCopulaParams out;
    out.rho = X.colPivHouseholderQr().solve(y);
    double r = spectral_radius(ar_companion(out.rho));
    if (r >= 0.9999) {
        double s = 0.995 / r; // eigenvalues scale linearly with s
        for (int k = 1; k <= p; ++k) out.rho(k - 1) *= std::pow(s, k);
        out.projected = true;
    }
    return out;
}

Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Q) {
    const int n = static_cast<int>(F.rows());
    if (spectral_radius(F) >= 1.0)
        throw std::runtime_error("lyapunov_solve: F is not stable");
    if (n <= 20) {
        // vec(G) = (I - F kron F)^{-1} vec(Q)
        Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n * n, n * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        K(i * n + k, j * n + l) -= F(i, j) * F(k, l);
        Eigen::VectorXd q(n * n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) q(j * n + k) = Q(k, j);
        Eigen::VectorXd v = K.colPivHouseholderQr().solve(q);
        Eigen::MatrixXd G(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) G(k, j) = v(j * n + k);
        return 0.5 * (G + G.transpose());
    }
    // doubling iteration
    Eigen::MatrixXd G = Q, A = F;
    for (int it = 0; it < 100; ++it) {
        Eigen::MatrixXd inc = A * G * A.transpose();
        G += inc;
        if (inc.norm() < 1e-14 * G.norm()) break;
        A = A * A;
    }
    return 0.5 * (G + G.transpose());
}

namespace {

Eigen::MatrixXd var_companion(const std::vector<Eigen::MatrixXd>& b, int d) {
    const int p = static_cast<int>(b.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(d * p, d * p);
    for (int j = 0; j < p; ++j) F.block(0, j * d, d, d) = b[j];
    for (int j = 1; j < p; ++j)
        F.block(j * d, (j - 1) * d, d, d) = Eigen::MatrixXd::Identity(d, d);
    return F;
}

// stationary covariance blocks Gamma_0..Gamma_hmax of the VAR
std::vector<Eigen::MatrixXd> var_autocov(const VarCopulaParams& params, int h_max) {
    const int d = params.dim(), p = params.lags();
    Eigen::MatrixXd F = var_companion(params.b, d);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d * p, d * p);
    Q.topLeftCorner(d, d) = params.sigma;
    Eigen::MatrixXd G = lyapunov_solve(F, Q);
    std::vector<Eigen::MatrixXd> gam;
    for (int h = 0; h <= h_max; ++h) {
        if (h < p)
            gam.push_back(G.block(0, h * d, d, d));
        else {
            Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
            for (int j = 1; j <= p; ++j) s += params.b[j - 1] * gam[h - j];
            gam.push_back(s);
        }
    }
    return gam;
}

} // namespace

VarCopulaParams var_fit(const Eigen::MatrixXd& u_data, int p) {
    const int T = static_cast<int>(u_data.rows());
    const int d = static_cast<int>(u_data.cols());
    if (p < 1) throw std::domain_error("var_fit: need p >= 1");
    if (T <= d * p + 10) throw std::domain_error("var_fit: need T > d*p + 10");

    Eigen::MatrixXd z(T, d);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < d; ++j) z(t, j) = probit(u_data(t, j));

    Eigen::MatrixXd X(T - p, d * p), Y(T - p, d);
    for (int t = p; t < T; ++t) {
        Y.row(t - p) = z.row(t);
        for (int k = 1; k <= p; ++k)
            X.block(t - p, (k - 1) * d, 1, d) = z.row(t - k);
    }
    Eigen::MatrixXd coef = X.colPivHouseholderQr().solve(Y); // (dp) x d
    VarCopulaParams out;
    for (int k = 0; k < p; ++k)
        out.b.push_back(coef.middleRows(k * d, d).transpose());
    Eigen::MatrixXd resid = Y - X * coef;
    out.sigma = resid.transpose() * resid / (T - p);

    double r = spectral_radius(var_companion(out.b, d));
    if (r >= 0.9999) {
        double s = 0.995 / r;
        for (int k = 0; k < p; ++k) out.b[k] *= std::pow(s, k + 1);
        out.projected = true;
    }

    // rescale so the implied stationary variances are one
    Eigen::MatrixXd gamma0 = var_autocov(out, 0)[0];
    Eigen::VectorXd dd = gamma0.diagonal().cwiseSqrt();
    Eigen::MatrixXd Dinv = dd.cwiseInverse().asDiagonal();
    Eigen::MatrixXd D = dd.asDiagonal();
    for (int k = 0; k < p; ++k) out.b[k] = Dinv * out.b[k] * D;
    out.sigma = Dinv * out.sigma * Dinv;
    return out;
}

std::vector<Eigen::MatrixXd> var_block_correlations(const VarCopulaParams& params,
                                                    int h_max) {
    auto gam = var_autocov(params, h_max);
    Eigen::VectorXd s = gam[0].diagonal().cwiseSqrt();
    Eigen::MatrixXd Sinv = s.cwiseInverse().asDiagonal();
    for (auto& g : gam) g = Sinv * g * Sinv;
    return gam;
}

Eigen::VectorXd var_predict_draw(const VarCopulaParams& params,
                                 const std::vector<Margin>& margins,
                                 const Eigen::MatrixXd& u_history, Rng& rng) {
    const int d = params.dim(), p = params.lags();
    const int T = static_cast<int>(u_history.rows());
    if (T < p) throw std::domain_error("var_predict_draw: history shorter than the lag order");
    if (static_cast<int>(margins.size()) != d)
        throw std::invalid_argument("var_predict_draw: one margin per series required");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (int k = 1; k <= p; ++k) {
        Eigen::VectorXd zk(d);
        for (int j = 0; j < d; ++j) zk(j) = probit(u_history(T - k, j));
        mean += params.b[k - 1] * zk;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(params.sigma);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("var_predict_draw: sigma not positive definite");
    Eigen::VectorXd eps(d);
    for (int j = 0; j < d; ++j) eps(j) = rng.normal();
    Eigen::VectorXd z_next = mean + Eigen::MatrixXd(llt.matrixL()) * eps;

    Eigen::VectorXd y(d);
    for (int j = 0; j < d; ++j) y(j) = margins[j].quantile(norm_cdf(z_next(j)));
    return y;
}

// ---- UCSV ----

UcsvDerived ucsv_validate(const UcsvParams& params) {
    if (!(std::fabs(params.rho_mu) < 1.0))
        throw std::domain_error("ucsv: |rho_mu| < 1 violated");
    if (!(std::fabs(params.rho_zeta) < 1.0))
        throw std::domain_error("ucsv: |rho_zeta| < 1 violated");
    if (!(params.sigma2_mu > 0.0))
        throw std::domain_error("ucsv: sigma2_mu > 0 violated");
    if (!(params.sigma2_zeta > 0.0))
        throw std::domain_error("ucsv: sigma2_zeta > 0 violated");
    UcsvDerived d;
    d.s2_mu = params.sigma2_mu / (1.0 - params.rho_mu * params.rho_mu);
    d.s2_zeta = params.sigma2_zeta / (1.0 - params.rho_zeta * params.rho_zeta);
    if (!(d.s2_mu < 1.0))
        throw std::domain_error("ucsv: sigma2_mu < 1 - rho_mu^2 violated");
    d.zeta_bar = std::log1p(-d.s2_mu) - 0.5 * d.s2_zeta;
    return d;
}

InterpTable ucsv_margin(const UcsvParams& params, int n_table, int n_quad) {
    UcsvDerived der = ucsv_validate(params);
    GaussHermite gh = gauss_hermite(n_quad);
    // zeta_k = zeta_bar + sqrt(2 s2_zeta) x_k, weights w_k / sqrt(pi)
    std::vector<double> var_k(n_quad), wt(n_quad);
    double c = std::sqrt(2.0 * der.s2_zeta);
    for (int k = 0; k < n_quad; ++k) {
        var_k[k] = der.s2_mu + std::exp(der.zeta_bar + c * gh.nodes[k]);
        wt[k] = gh.weights[k] / std::sqrt(PI);
    }
    auto cdf = [var_k, wt, n_quad](double z) {
        double s = 0.0;
        for (int k = 0; k < n_quad; ++k)
            s += wt[k] * norm_cdf(z / std::sqrt(var_k[k]));
        return s;
    };
    auto logpdf = [var_k, wt, n_quad](double z) {
        double s = 0.0;
        for (int k = 0; k < n_quad; ++k)
            s += wt[k] * std::exp(norm1_logpdf(z, 0.0, var_k[k]));
        if (!(s > 0.0)) return -745.0;
        return std::log(s);
    };
    return build_interp_table(cdf, logpdf, n_table);
}

std::pair<Eigen::VectorXd, StatePaths> ucsv_simulate_z(const UcsvParams& params,
                                                       int T, Rng& rng) {
    UcsvDerived der = ucsv_validate(params);
    StatePaths s;
    s.mu.resize(T);
    s.zeta.resize(T);
    Eigen::VectorXd z(T);
    double sm = std::sqrt(params.sigma2_mu), sz = std::sqrt(params.sigma2_zeta);
    double mu = std::sqrt(der.s2_mu) * rng.normal();
    double zeta = der.zeta_bar + std::sqrt(der.s2_zeta) * rng.normal();
    for (int t = 0; t < T; ++t) {
        if (t > 0) {
            mu = params.rho_mu * mu + sm * rng.normal();
            zeta = der.zeta_bar + params.rho_zeta * (zeta - der.zeta_bar) +
                   sz * rng.normal();
        }
        s.mu(t) = mu;
        s.zeta(t) = zeta;
        z(t) = mu + std::exp(0.5 * zeta) * rng.normal();
    }
    return {z, s};
}

namespace {

// band-1 precision of a stationary AR(1) path
BandedPrecision ar1_precision(double rho, double sigma2, int T) {
    BandedPrecision P = BandedPrecision::zero(T, 1);
    double is2 = 1.0 / sigma2;
    for (int t = 0; t < T; ++t) {
        double diag = is2;
        if (t >= 1 && t <= T - 2) diag = (1.0 + rho * rho) * is2;
        if (T == 1) diag = (1.0 - rho * rho) * is2;
        P.bands[0](t) = diag;
        if (t < T - 1) P.bands[1](t) = -rho * is2;
    }
    return P;
}

double ar1_logpdf(const Eigen::VectorXd& x, double mean, double rho,
                  double sigma2) {
    const int T = static_cast<int>(x.size());
    double quad = (1.0 - rho * rho) * (x(0) - mean) * (x(0) - mean);
    for (int t = 1; t < T; ++t) {
        double e = (x(t) - mean) - rho * (x(t - 1) - mean);
        quad += e * e;
    }
    return -0.5 * T * std::log(2.0 * PI * sigma2) +
           0.5 * std::log1p(-rho * rho) - 0.5 * quad / sigma2;
}

Eigen::VectorXd banded_matvec(const BandedPrecision& P, const Eigen::VectorXd& x) {
    Eigen::VectorXd y = P.bands[0].cwiseProduct(x);
    for (int k = 1; k <= P.bandwidth; ++k)
        for (int i = 0; i + k < P.dim; ++i) {
            y(i + k) += P.bands[k](i) * x(i);
            y(i) += P.bands[k](i) * x(i + k);
        }
    return y;
}

struct UcsvThetaDecode {
    UcsvParams par;
    UcsvDerived der;
    bool ok = false;
};

UcsvThetaDecode decode_theta(const Eigen::VectorXd& x, double s2z_cap) {
    UcsvThetaDecode d;
    d.par.rho_mu = std::tanh(x(0));
    d.par.sigma2_mu = std::exp(x(1));
    d.par.rho_zeta = std::tanh(x(2));
    d.par.sigma2_zeta = std::exp(x(3));
    if (d.par.sigma2_mu >= 1.0 - d.par.rho_mu * d.par.rho_mu) return d;
    if (d.par.sigma2_zeta > s2z_cap) return d;
    d.der = ucsv_validate(d.par);
    d.ok = true;
    return d;
}

} // namespace

Chain ucsv_mcmc_fit(const std::vector<double>& u_data, const UcsvPrior& prior,
                    int iters, Rng& rng, double burn_frac, bool store_states) {
    const int T = static_cast<int>(u_data.size());
    Chain chain;
    chain.names = {"rho_mu", "sigma2_mu", "rho_zeta", "sigma2_zeta"};
    chain.burn_in = static_cast<int>(burn_frac * iters);
    int retained = std::max(0, iters - chain.burn_in);
    chain.draws.resize(retained, 4);
    if (iters == 0) return chain;

    if (T < 30) throw std::domain_error("ucsv_mcmc_fit: need T >= 30");
    for (double u : u_data)
        if (!(u > 0.0 && u < 1.0))
            throw std::domain_error("ucsv_mcmc_fit: u must lie in (0,1)");

    const double NEG_INF = -std::numeric_limits<double>::infinity();

    // theta on the working scale: atanh(rho_mu), log s2m, atanh(rho_z), log s2z
    Eigen::VectorXd x(4);
    x << std::atanh(0.5), std::log(0.1), std::atanh(0.5), std::log(0.1);
    UcsvThetaDecode cur = decode_theta(x, prior.sigma2_zeta_max);
    InterpTable table = ucsv_margin(cur.par);

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(T);
    Eigen::VectorXd zeta = Eigen::VectorXd::Constant(T, cur.der.zeta_bar);
    Eigen::VectorXd z(T);

    // log p(u, mu, zeta | theta) against the given margin table
    auto theta_target = [&](const UcsvThetaDecode& th,
                            const InterpTable& tab) -> double {
        if (!th.ok) return NEG_INF;
        double lp = 0.0;
        for (int t = 0; t < T; ++t) {
            double zt = tab.quantile(u_data[t]);
            lp += norm1_logpdf(zt, mu(t), std::exp(zeta(t))) - tab.logpdf(zt);
        }
        lp += ar1_logpdf(mu, 0.0, th.par.rho_mu, th.par.sigma2_mu);
        lp += ar1_logpdf(zeta, th.der.zeta_bar, th.par.rho_zeta,
                         th.par.sigma2_zeta);
        // flat prior on the rhos, 1/sigma2 cancels the log-scale Jacobians
        lp += std::log1p(-th.par.rho_mu * th.par.rho_mu) +
              std::log1p(-th.par.rho_zeta * th.par.rho_zeta);
        return lp;
    };

    // log p(zeta | everything else), margin terms constant in zeta
    auto zeta_target = [&](const Eigen::VectorXd& zt) -> double {
        double lp = ar1_logpdf(zt, cur.der.zeta_bar, cur.par.rho_zeta,
                               cur.par.sigma2_zeta);
        for (int t = 0; t < T; ++t) {
            double r = z(t) - mu(t);
            lp += -0.5 * zt(t) - 0.5 * r * r * std::exp(-zt(t)) - LOG_SQRT_2PI;
        }
        return lp;
    };

    RwScale sc_theta{.log_step = std::log(0.1), .target = 0.234};
    long zeta_accepts = 0, zeta_props = 0;
    int row = 0;

    for (int it = 0; it < iters; ++it) {
        for (int t = 0; t < T; ++t) z(t) = table.quantile(u_data[t]);

        // Step 1a: exact Gaussian draw of mu, band-1 posterior precision
        BandedPrecision Pmu = ar1_precision(cur.par.rho_mu, cur.par.sigma2_mu, T);
        Eigen::VectorXd b(T);
        for (int t = 0; t < T; ++t) {
            double iv = std::exp(-zeta(t));
            Pmu.bands[0](t) += iv;
            b(t) = z(t) * iv;
        }
        mu = banded_gaussian_sample(Pmu, b, rng);

        // Step 1b: independence MH for zeta from a Laplace approximation
        {
            BandedPrecision Pz =
                ar1_precision(cur.par.rho_zeta, cur.par.sigma2_zeta, T);
            Eigen::VectorXd zbar = Eigen::VectorXd::Constant(T, cur.der.zeta_bar);
            Eigen::VectorXd mode = zeta;
            double cur_val = zeta_target(mode);
            for (int nit = 0; nit < 100; ++nit) {
                Eigen::VectorXd r2(T), grad(T);
                for (int t = 0; t < T; ++t) {
                    double r = z(t) - mu(t);
                    r2(t) = 0.5 * r * r * std::exp(-mode(t));
                    grad(t) = -0.5 + r2(t);
                }
                grad -= banded_matvec(Pz, mode - zbar);
                BandedPrecision H = Pz;
                H.bands[0] += r2;
                BandedCholesky L = banded_cholesky(H);
                Eigen::VectorXd step = L.solve_upper(L.solve_lower(grad));
                double damp = 1.0;
                Eigen::VectorXd trial;
                double trial_val = NEG_INF;
                for (int half = 0; half < 30; ++half) {
                    trial = mode + damp * step;
                    trial_val = zeta_target(trial);
                    if (trial_val >= cur_val - 1e-12) break;
                    damp *= 0.5;
                }
                mode = trial;
                if (trial_val - cur_val < 1e-10 &&
                    grad.lpNorm<Eigen::Infinity>() < 1e-6)
                    { cur_val = trial_val; break; }
                cur_val = trial_val;
            }
            BandedPrecision Hm = Pz;
            for (int t = 0; t < T; ++t) {
                double r = z(t) - mu(t);
                Hm.bands[0](t) += 0.5 * r * r * std::exp(-mode(t));
            }
            Eigen::VectorXd bm = banded_matvec(Hm, mode);
            Eigen::VectorXd prop = banded_gaussian_sample(Hm, bm, rng);
            double log_alpha = zeta_target(prop) - zeta_target(zeta) -
                               banded_gaussian_logpdf(Hm, bm, prop) +
                               banded_gaussian_logpdf(Hm, bm, zeta);
            ++zeta_props;
            if (std::log(rng.uniform()) < log_alpha) {
                zeta = prop;
                ++zeta_accepts;
            }
        }

        // Step 2: adaptive random walk on transformed theta
        {
            double cur_lp = theta_target(cur, table);
            if (!std::isfinite(cur_lp)) {
                std::ostringstream ss;
                ss << "ucsv_mcmc_fit: non-finite log posterior at iteration "
                   << it << " theta=(" << cur.par.rho_mu << "," << cur.par.sigma2_mu
                   << "," << cur.par.rho_zeta << "," << cur.par.sigma2_zeta << ")";
                throw std::runtime_error(ss.str());
            }
            auto logpost = [&](const Eigen::VectorXd& xp) -> double {
                UcsvThetaDecode th = decode_theta(xp, prior.sigma2_zeta_max);
                if (!th.ok) return NEG_INF;
                InterpTable tab = ucsv_margin(th.par);
                return theta_target(th, tab);
            };
            if (adaptive_rw_mh(logpost, x, cur_lp, sc_theta, rng)) {
                cur = decode_theta(x, prior.sigma2_zeta_max);
                table = ucsv_margin(cur.par);
            }
        }
        if (it == chain.burn_in) sc_theta.frozen = true;

        if (it >= chain.burn_in) {
            chain.draws(row, 0) = cur.par.rho_mu;
            chain.draws(row, 1) = cur.par.sigma2_mu;
            chain.draws(row, 2) = cur.par.rho_zeta;
            chain.draws(row, 3) = cur.par.sigma2_zeta;
            if (store_states) {
                if (chain.latent_blocks["mu"].rows() == 0) {
                    chain.latent_blocks["mu"].resize(retained, T);
                    chain.latent_blocks["zeta"].resize(retained, T);
                }
                chain.latent_blocks["mu"].row(row) = mu.transpose();
                chain.latent_blocks["zeta"].row(row) = zeta.transpose();
            }
            ++row;
        }
    }
    chain.acceptance_rates["theta"] = sc_theta.rate();
    chain.acceptance_rates["zeta"] =
        zeta_props ? double(zeta_accepts) / zeta_props : 0.0;
    return chain;
}

DensityGrid ucsv_bivariate_density_grid(const UcsvParams& params, int grid_n) {
    if (grid_n < 2) throw std::invalid_argument("ucsv_bivariate_density_grid: grid_n >= 2");
    UcsvDerived der = ucsv_validate(params);
    InterpTable table = ucsv_margin(params);

    const int nq = 30;
    GaussHermite gh = gauss_hermite(nq);
    double sz = std::sqrt(der.s2_zeta);
    double rz = params.rho_zeta;
    double l21 = sz * rz, l22 = sz * std::sqrt(1.0 - rz * rz);
    double c_mu = der.s2_mu * params.rho_mu;

    // f(z1, z2) with both latent pairs integrated out; the mus integrate
    // analytically, leaving a 2-d Gauss-Hermite over (zeta_1, zeta_2)
    auto joint = [&](double z1, double z2) {
        double s = 0.0;
        for (int k = 0; k < nq; ++k) {
            double xk = std::sqrt(2.0) * gh.nodes[k];
            double zeta1 = der.zeta_bar + sz * xk;
            double v1 = der.s2_mu + std::exp(zeta1);
            for (int l = 0; l < nq; ++l) {
                double xl = std::sqrt(2.0) * gh.nodes[l];
                double zeta2 = der.zeta_bar + l21 * xk + l22 * xl;
                double v2 = der.s2_mu + std::exp(zeta2);
                double det = v1 * v2 - c_mu * c_mu;
                double q = (v2 * z1 * z1 - 2.0 * c_mu * z1 * z2 + v1 * z2 * z2) /
                           det;
                s += gh.weights[k] * gh.weights[l] *
                     std::exp(-0.5 * q) / (2.0 * PI * std::sqrt(det));
            }
        }
        return s / PI;
    };

    DensityGrid grid;
    grid.u.resize(grid_n);
    grid.values.resize(grid_n, grid_n);
    std::vector<double> zg(grid_n), lf(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        grid.u(i) = (i + 0.5) / grid_n;
        zg[i] = table.quantile(grid.u(i));
        lf[i] = table.logpdf(zg[i]);
    }
    for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j) {
            double num = joint(zg[i], zg[j]);
            if (!(num > 0.0))
                throw std::runtime_error("ucsv_bivariate_density_grid: nonpositive numerator");
            grid.values(i, j) = std::exp(std::log(num) - lf[i] - lf[j]);
        }
    return grid;
}

namespace {

// systematic resampling indices from normalized weights
std::vector<int> systematic_resample(const std::vector<double>& w, Rng& rng) {
    const int n = static_cast<int>(w.size());
    std::vector<int> idx(n);
    double u0 = rng.uniform() / n;
    double csum = w[0];
    int j = 0;
    for (int i = 0; i < n; ++i) {
        double target = u0 + double(i) / n;
        while (csum < target && j < n - 1) csum += w[++j];
        idx[i] = j;
    }
    return idx;
}

} // namespace

std::vector<double> ts_predictive_density(const TsModel& model,
                                          const std::vector<double>& u_history,
                                          const Margin& margin,
                                          const std::vector<double>& y_grid,
                                          Rng& rng) {
    if (u_history.empty())
        throw std::domain_error("ts_predictive_density: empty history");
    std::vector<double> out(y_grid.size());

    if (model.kind == TsModel::Kind::ar) {
        for (size_t i = 0; i < y_grid.size(); ++i) {
            double u = margin.cdf(y_grid[i]);
            u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
            double lc = model.rho.size() == 0
                            ? 0.0
                            : ar_conditional_logdensity(model.rho, u_history, u);
            out[i] = std::exp(lc + margin.logpdf(y_grid[i]));
        }
        return out;
    }

    // UCSV: bootstrap particle filter over (mu_t, zeta_t)
    UcsvDerived der = ucsv_validate(model.ucsv);
    InterpTable table = ucsv_margin(model.ucsv);
    const int T = static_cast<int>(u_history.size());
    const int N = model.n_particles;
    double sm = std::sqrt(model.ucsv.sigma2_mu);
    double sz = std::sqrt(model.ucsv.sigma2_zeta);

    std::vector<double> pmu(N), pzeta(N), w(N);
    for (int i = 0; i < N; ++i) {
        pmu[i] = std::sqrt(der.s2_mu) * rng.normal();
        pzeta[i] = der.zeta_bar + std::sqrt(der.s2_zeta) * rng.normal();
    }
    for (int t = 0; t < T; ++t) {
        if (t > 0) {
            for (int i = 0; i < N; ++i) {
                pmu[i] = model.ucsv.rho_mu * pmu[i] + sm * rng.normal();
                pzeta[i] = der.zeta_bar +
                           model.ucsv.rho_zeta * (pzeta[i] - der.zeta_bar) +
                           sz * rng.normal();
            }
        }
        double zt = table.quantile(u_history[t]);
        double wsum = 0.0;
        for (int i = 0; i < N; ++i) {
            w[i] = std::exp(norm1_logpdf(zt, pmu[i], std::exp(pzeta[i])));
            wsum += w[i];
        }
        if (!(wsum > 0.0))
            throw std::runtime_error("ts_predictive_density: particle weights degenerate");
        for (int i = 0; i < N; ++i) w[i] /= wsum;
        auto idx = systematic_resample(w, rng);
        std::vector<double> nmu(N), nzeta(N);
        for (int i = 0; i < N; ++i) {
            nmu[i] = pmu[idx[i]];
            nzeta[i] = pzeta[idx[i]];
        }
        pmu.swap(nmu);
        pzeta.swap(nzeta);
    }
    // one-step state propagation, then the predictive mixture in z
    for (int i = 0; i < N; ++i) {
        pmu[i] = model.ucsv.rho_mu * pmu[i] + sm * rng.normal();
        pzeta[i] = der.zeta_bar +
                   model.ucsv.rho_zeta * (pzeta[i] - der.zeta_bar) +
                   sz * rng.normal();
    }
    for (size_t g = 0; g < y_grid.size(); ++g) {
        double u = margin.cdf(y_grid[g]);
        u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
        double zv = table.quantile(u);
        double fz = 0.0;
        for (int i = 0; i < N; ++i)
            fz += std::exp(norm1_logpdf(zv, pmu[i], std::exp(pzeta[i])));
        fz /= N;
        out[g] = fz * std::exp(margin.logpdf(y_grid[g]) - table.logpdf(zv));
    }
    return out;
}

} // namespace icop
