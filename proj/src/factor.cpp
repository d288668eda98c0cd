#include "icop/factor.hpp"
#include "icop/special.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace icop {

namespace {
constexpr double D_FLOOR = 1e-6; // keeps Heywood cases off the boundary
}

void FactorParams::validate() const {
    const int m = dim(), p = n_factors();
    if (p < 1 || p >= m)
        throw std::domain_error("FactorParams: need 1 <= p < m");
    if (d.size() != m)
        throw std::invalid_argument("FactorParams: d size mismatch");
    for (int j = 0; j < m; ++j)
        if (!(d(j) > 0.0))
            throw std::domain_error("FactorParams: d must be positive");
    for (int i = 0; i < std::min(m, p); ++i) {
        if (!(lambda(i, i) > 0.0))
            throw std::domain_error("FactorParams: leading diagonal of lambda must be positive");
        for (int k = i + 1; k < p; ++k)
            if (lambda(i, k) != 0.0)
                throw std::domain_error("FactorParams: upper triangle of lambda must be zero");
    }
}

std::string FactorParams::to_json() const {
    std::vector<double> lam;
    for (int i = 0; i < lambda.rows(); ++i)
        for (int k = 0; k < lambda.cols(); ++k) lam.push_back(lambda(i, k));
    nlohmann::json j = {{"m", dim()},
                        {"p", n_factors()},
                        {"lambda", lam},
                        {"d", std::vector<double>(d.data(), d.data() + d.size())}};
    return j.dump();
}

FactorParams FactorParams::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    int m = j.at("m").get<int>();
    int p = j.at("p").get<int>();
    auto lam = j.at("lambda").get<std::vector<double>>();
    auto dv = j.at("d").get<std::vector<double>>();
    if (static_cast<int>(lam.size()) != m * p || static_cast<int>(dv.size()) != m)
        throw std::invalid_argument("FactorParams::from_json: size mismatch");
    FactorParams out;
    out.lambda.resize(m, p);
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < p; ++k) out.lambda(i, k) = lam[i * p + k];
    out.d = Eigen::Map<Eigen::VectorXd>(dv.data(), m);
    out.validate();
    return out;
}

CorrelationMatrix factor_to_correlation(const FactorParams& params) {
    params.validate();
    Eigen::MatrixXd cov = params.lambda * params.lambda.transpose();
    cov.diagonal() += params.d;
    return CorrelationMatrix::from_covariance(cov);
}

Eigen::MatrixXd simulate_factor_z(const FactorParams& params, int n, Rng& rng) {
    params.validate();
    const int m = params.dim(), p = params.n_factors();
    Eigen::VectorXd s = (params.lambda * params.lambda.transpose()).diagonal() +
                        params.d;
    Eigen::VectorXd inv_sqrt_s = s.array().rsqrt();
    Eigen::VectorXd sqrt_d = params.d.array().sqrt();
    Eigen::MatrixXd z(n, m);
    Eigen::VectorXd eta(p);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < p; ++k) eta(k) = rng.normal();
        Eigen::VectorXd zt = params.lambda * eta;
        for (int j = 0; j < m; ++j) zt(j) += sqrt_d(j) * rng.normal();
        z.row(i) = zt.cwiseProduct(inv_sqrt_s).transpose();
    }
    return z;
}

namespace {

// rotate Lambda so its top p x p block is lower triangular with positive
// diagonal (LQ of the top block); Lambda Lambda' is invariant
Eigen::MatrixXd identify_loadings(const Eigen::MatrixXd& lambda) {
    const int p = static_cast<int>(lambda.cols());
    Eigen::MatrixXd top = lambda.topRows(p);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(top.transpose());
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
    Eigen::MatrixXd out = lambda * Q;
    for (int k = 0; k < p; ++k) {
        if (out(k, k) < 0.0) out.col(k) = -out.col(k);
        for (int i = 0; i < k; ++i) out(i, k) = 0.0; // exact zeros vs roundoff
    }
    return out;
}

double factor_loglik(const Eigen::MatrixXd& C, const Eigen::MatrixXd& lambda,
                     const Eigen::VectorXd& d, int n) {
    const int m = static_cast<int>(C.rows());
    Eigen::MatrixXd sigma = lambda * lambda.transpose();
    sigma.diagonal() += d;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("factor_fit_em: implied covariance not positive definite");
    double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    double tr = llt.solve(C).trace();
    return -0.5 * n * (m * std::log(2.0 * PI) + logdet + tr);
}

} // namespace

FactorFit factor_fit_em(const Eigen::MatrixXd& z_data, int p, int max_iter,
                        double tol) {
    const int n = static_cast<int>(z_data.rows());
    const int m = static_cast<int>(z_data.cols());
    if (p < 1) throw std::domain_error("factor_fit_em: need p >= 1");
    if (p >= m) throw std::domain_error("factor_fit_em: need p < m");
    if (n <= m) throw std::invalid_argument("factor_fit_em: need n > m");

    Eigen::MatrixXd centered = z_data.rowwise() - z_data.colwise().mean();
    Eigen::MatrixXd C = centered.transpose() * centered / n;

    // principal-component start
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    Eigen::MatrixXd lambda(m, p);
    for (int k = 0; k < p; ++k) {
        double ev = std::max(es.eigenvalues()(m - 1 - k), 0.1);
        lambda.col(k) = es.eigenvectors().col(m - 1 - k) * std::sqrt(0.8 * ev);
    }
    Eigen::VectorXd d =
        (C.diagonal() - (lambda * lambda.transpose()).diagonal())
            .cwiseMax(D_FLOOR);

    FactorFit fit;
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        double ll = factor_loglik(C, lambda, d, n);
        fit.loglik.push_back(ll);
        fit.iterations = it + 1;
        if (ll - prev < tol * (std::fabs(ll) + 1.0) && it > 0) {
            fit.converged = true;
            break;
        }
        prev = ll;

        Eigen::MatrixXd sigma = lambda * lambda.transpose();
        sigma.diagonal() += d;
        Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        Eigen::MatrixXd beta = llt.solve(lambda).transpose(); // p x m
        Eigen::MatrixXd Cbt = C * beta.transpose();           // m x p
        Eigen::MatrixXd Ezz = Eigen::MatrixXd::Identity(p, p) - beta * lambda +
                              beta * Cbt;
        lambda = Cbt * Ezz.inverse();
        d = (C - lambda * beta * C).diagonal().cwiseMax(D_FLOOR);
    }

    lambda = identify_loadings(lambda);
    for (int k = 0; k < p; ++k)
        lambda(k, k) = std::max(lambda(k, k), 1e-10);
    fit.params = FactorParams{lambda, d};
    fit.params.validate();
    return fit;
}

CopulaSimulator make_factor_simulator(const FactorParams& params) {
    params.validate();
    auto p = std::make_shared<FactorParams>(params);
    CopulaSimulator sim;
    sim.dim = params.dim();
    sim.draw_z = [p](Rng& rng) {
        return Eigen::VectorXd(simulate_factor_z(*p, 1, rng).row(0));
    };
    sim.marginal_cdf = [](int, double z) { return norm_cdf(z); };
    return sim;
}

} // namespace icop
