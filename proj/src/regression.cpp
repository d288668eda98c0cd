#include "icop/regression.hpp"
#include "icop/special.hpp"

#include <cmath>
#include <stdexcept>

namespace icop {

namespace {

double half_cauchy_logpdf(double x, double scale) {
    return std::log(2.0 / (PI * scale)) - std::log1p((x / scale) * (x / scale));
}

double probit_of(const Margin& margin, double y) {
    double u = margin.cdf(y);
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("regression: y outside the margin support");
    return norm_quantile(u);
}

} // namespace

double reg_scale(const Eigen::VectorXd& x, const HorseshoeState& theta) {
    if (x.size() != theta.lambda.size())
        throw std::invalid_argument("reg_scale: dimension mismatch");
    double q = (theta.lambda.cwiseProduct(x)).squaredNorm();
    return 1.0 / std::sqrt(1.0 + q);
}

CorrelationMatrix reg_correlation(const Eigen::MatrixXd& B,
                                  const HorseshoeState& theta) {
    const int n = static_cast<int>(B.rows());
    if (n > 2000)
        throw std::length_error("reg_correlation: n > 2000");
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) s(i) = reg_scale(B.row(i), theta);
    Eigen::MatrixXd BL = B * theta.lambda.asDiagonal(); // B P^{-1/2}
    Eigen::MatrixXd R = BL * BL.transpose();
    R.diagonal().array() += 1.0;
    R = s.asDiagonal() * R * s.asDiagonal();
    R.diagonal().setOnes(); // exact by construction, clear roundoff
    return CorrelationMatrix(R);
}

double reg_conditional_loglik(const RegressionData& data,
                              const Eigen::VectorXd& beta,
                              const HorseshoeState& theta) {
    const int n = static_cast<int>(data.B.rows());
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = probit_of(data.margin, data.y(i));
        double s = reg_scale(data.B.row(i), theta);
        ll += norm1_logpdf(z, s * data.B.row(i).dot(beta), s * s) +
              data.margin.logpdf(data.y(i)) - norm_logpdf(z);
    }
    return ll;
}

Chain reg_mcmc_fit(const RegressionData& data, int iters, Rng& rng,
                   double burn_frac) {
    const int n = static_cast<int>(data.B.rows());
    const int p = static_cast<int>(data.B.cols());

    Chain chain;
    for (int j = 0; j < p; ++j) chain.names.push_back("beta_" + std::to_string(j + 1));
    for (int j = 0; j < p; ++j) chain.names.push_back("lambda_" + std::to_string(j + 1));
    chain.names.push_back("tau");
    chain.burn_in = static_cast<int>(burn_frac * iters);
    int retained = std::max(0, iters - chain.burn_in);
    chain.draws.resize(retained, 2 * p + 1);
    if (iters == 0) return chain;

    if (n < 10) throw std::domain_error("reg_mcmc_fit: need n >= 10");
    if (data.y.size() != n)
        throw std::invalid_argument("reg_mcmc_fit: y size mismatch");

    // scale columns to unit sd so the shrinkage is comparable across
    // covariates; a pure reparameterization, undone when draws are recorded
    Eigen::VectorXd col_sd(p);
    for (int j = 0; j < p; ++j) {
        double m = data.B.col(j).mean();
        double v = (data.B.col(j).array() - m).square().sum() / n;
        col_sd(j) = v > 0.0 ? std::sqrt(v) : 1.0;
    }
    Eigen::MatrixXd X = data.B * col_sd.cwiseInverse().asDiagonal();

    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = probit_of(data.margin, data.y(i));
    Eigen::MatrixXd XtX = X.transpose() * X;
    Eigen::MatrixXd X2 = X.array().square(); // for the s_i updates

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd log_lambda = Eigen::VectorXd::Zero(p);
    double log_tau = 0.0;

    // m_i = sum_j lambda_j^2 x_ij^2, so s_i = (1 + m_i)^{-1/2}
    Eigen::VectorXd lam2 = (2.0 * log_lambda).array().exp();
    Eigen::VectorXd m = X2 * lam2;

    // z-part of the conditional log-likelihood given the s_i implied by m
    auto z_loglik = [&](const Eigen::VectorXd& mvec) {
        Eigen::VectorXd xb = X * beta;
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            double s2 = 1.0 / (1.0 + mvec(i));
            ll += norm1_logpdf(z(i), std::sqrt(s2) * xb(i), s2);
        }
        return ll;
    };

    std::vector<RwScale> scales(p + 1);
    for (auto& sc : scales) {
        sc.log_step = std::log(0.5);
        sc.target = 0.44;
    }

    int row = 0;
    for (int it = 0; it < iters; ++it) {
        // Step 1: conjugate beta draw, precision X'X + P, data S^{-1} z
        Eigen::VectorXd ztilde(n);
        for (int i = 0; i < n; ++i) ztilde(i) = z(i) * std::sqrt(1.0 + m(i));
        Eigen::MatrixXd prec = XtX;
        prec.diagonal() += lam2.cwiseInverse();
        Eigen::LLT<Eigen::MatrixXd> llt(prec);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("reg_mcmc_fit: beta precision not positive definite");
        Eigen::VectorXd mean = llt.solve(X.transpose() * ztilde);
        Eigen::VectorXd eps(p);
        for (int j = 0; j < p; ++j) eps(j) = rng.normal();
        beta = mean + Eigen::MatrixXd(llt.matrixL())
                          .triangularView<Eigen::Lower>()
                          .transpose()
                          .solve(eps);

        // Step 2: per-element MH on log lambda_j, then log tau
        double cur_zll = z_loglik(m);
        double tau = std::exp(log_tau);
        for (int j = 0; j < p; ++j) {
            double lam = std::exp(log_lambda(j));
            double cur_lp = cur_zll + norm1_logpdf(beta(j), 0.0, lam * lam) +
                            half_cauchy_logpdf(lam, tau) + log_lambda(j);
            auto lp_fn = [&](const Eigen::VectorXd& v) {
                double lj = std::exp(v(0));
                Eigen::VectorXd m_new =
                    m + X2.col(j) * (lj * lj - lam2(j));
                return z_loglik(m_new) + norm1_logpdf(beta(j), 0.0, lj * lj) +
                       half_cauchy_logpdf(lj, tau) + v(0);
            };
            Eigen::VectorXd v(1);
            v(0) = log_lambda(j);
            if (adaptive_rw_mh(lp_fn, v, cur_lp, scales[j], rng)) {
                double lj2 = std::exp(2.0 * v(0));
                m += X2.col(j) * (lj2 - lam2(j));
                lam2(j) = lj2;
                log_lambda(j) = v(0);
                cur_zll = z_loglik(m);
            }
        }
        {
            auto lp_fn = [&](const Eigen::VectorXd& v) {
                double t = std::exp(v(0));
                double lp = half_cauchy_logpdf(t, 1.0) + v(0);
                for (int j = 0; j < p; ++j)
                    lp += half_cauchy_logpdf(std::exp(log_lambda(j)), t);
                return lp;
            };
            Eigen::VectorXd v(1);
            v(0) = log_tau;
            double cur_lp = lp_fn(v);
            if (adaptive_rw_mh(lp_fn, v, cur_lp, scales[p], rng)) log_tau = v(0);
        }
        if (it == chain.burn_in)
            for (auto& sc : scales) sc.frozen = true;

        if (it >= chain.burn_in) {
            for (int j = 0; j < p; ++j)
                chain.draws(row, j) = beta(j) / col_sd(j);
            for (int j = 0; j < p; ++j)
                chain.draws(row, p + j) = std::exp(log_lambda(j)) / col_sd(j);
            chain.draws(row, 2 * p) = std::exp(log_tau);
            ++row;
        }
    }
    for (int j = 0; j < p; ++j)
        chain.acceptance_rates["lambda_" + std::to_string(j + 1)] =
            scales[j].rate();
    chain.acceptance_rates["tau"] = scales[p].rate();
    return chain;
}

PredictiveCurves reg_predict_density(const Eigen::VectorXd& x_new,
                                     const Chain& chain, const Margin& margin,
                                     const std::vector<double>& y_grid) {
    const int J = chain.n_draws();
    if (J == 0) throw std::domain_error("reg_predict_density: empty chain");
    const int p = static_cast<int>(x_new.size());
    if (static_cast<int>(chain.names.size()) != 2 * p + 1)
        throw std::invalid_argument("reg_predict_density: chain does not match x_new");

    Eigen::VectorXd s_draw(J), mean_draw(J);
    Eigen::VectorXd beta_hat = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < J; ++j) {
        Eigen::VectorXd beta = chain.draws.row(j).head(p);
        Eigen::VectorXd lambda = chain.draws.row(j).segment(p, p);
        double q = lambda.cwiseProduct(x_new).squaredNorm();
        s_draw(j) = 1.0 / std::sqrt(1.0 + q);
        mean_draw(j) = s_draw(j) * x_new.dot(beta);
        beta_hat += beta;
    }
    beta_hat /= J;
    double s_hat = s_draw.mean();

    PredictiveCurves out;
    out.y = y_grid;
    out.bayes.resize(y_grid.size());
    out.point.resize(y_grid.size());
    for (size_t g = 0; g < y_grid.size(); ++g) {
        double u = margin.cdf(y_grid[g]);
        u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
        double z = norm_quantile(u);
        double base = margin.logpdf(y_grid[g]) - norm_logpdf(z);
        double acc = 0.0;
        for (int j = 0; j < J; ++j)
            acc += std::exp(norm1_logpdf(z, mean_draw(j), s_draw(j) * s_draw(j)));
        out.bayes[g] = acc / J * std::exp(base);
        out.point[g] = std::exp(
            norm1_logpdf(z, s_hat * x_new.dot(beta_hat), s_hat * s_hat) + base);
    }
    return out;
}

std::vector<double> default_y_grid(const Margin& margin, int n) {
    double lo = margin.quantile(0.001), hi = margin.quantile(0.999);
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i)
        grid[i] = lo + (hi - lo) * i / (n - 1.0);
    return grid;
}

} // namespace icop
