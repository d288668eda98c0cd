#include "icop/copula_core.hpp"
#include "icop/mcmc.hpp"
#include "icop/special.hpp"

#include <cmath>
#include <stdexcept>

namespace icop {

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd values)
    : values_(std::move(values)) {
    const int m = static_cast<int>(values_.rows());
    if (values_.cols() != m || m < 1)
        throw std::invalid_argument("CorrelationMatrix: must be square");
    for (int i = 0; i < m; ++i) {
        if (std::fabs(values_(i, i) - 1.0) > 1e-10)
            throw std::invalid_argument("CorrelationMatrix: diagonal must be 1");
        for (int j = 0; j < i; ++j)
            if (std::fabs(values_(i, j) - values_(j, i)) > 1e-12)
                throw std::invalid_argument("CorrelationMatrix: not symmetric");
    }
    // jitter ladder before declaring non-PD; Eq.-(30)-style matrices can be
    // near singular
    for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
        Eigen::MatrixXd trial = values_;
        trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success) {
            chol_ = llt.matrixL();
            return;
        }
    }
    throw std::runtime_error("CorrelationMatrix: not positive definite");
}

CorrelationMatrix CorrelationMatrix::identity(int m) {
    return CorrelationMatrix(Eigen::MatrixXd::Identity(m, m));
}

CorrelationMatrix CorrelationMatrix::from_covariance(const Eigen::MatrixXd& cov) {
    Eigen::VectorXd d = cov.diagonal().array().sqrt().inverse();
    Eigen::MatrixXd r = d.asDiagonal() * cov * d.asDiagonal();
    r.diagonal().setOnes();
    r = 0.5 * (r + r.transpose());
    return CorrelationMatrix(r);
}

double CorrelationMatrix::log_det() const {
    return 2.0 * chol_.diagonal().array().log().sum();
}

double CorrelationMatrix::excess_quadform(const Eigen::VectorXd& z) const {
    Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(z);
    return w.squaredNorm() - z.squaredNorm();
}

namespace {

void check_unit_vector(const Eigen::VectorXd& u, int m) {
    if (u.size() != m)
        throw std::invalid_argument("copula density: dimension mismatch");
    for (int j = 0; j < m; ++j)
        if (!(u(j) > 0.0 && u(j) < 1.0))
            throw std::domain_error("copula density: u components must lie in (0,1)");
}

} // namespace

double gaussian_copula_logdensity(const CorrelationMatrix& omega,
                                  const Eigen::VectorXd& u) {
    const int m = omega.dim();
    check_unit_vector(u, m);
    Eigen::VectorXd z(m);
    for (int j = 0; j < m; ++j) z(j) = norm_quantile(u(j));
    return -0.5 * omega.log_det() - 0.5 * omega.excess_quadform(z);
}

double t_copula_logdensity(const TCopulaParams& params, const Eigen::VectorXd& u) {
    if (!(params.nu > 0.0))
        throw std::domain_error("t_copula_logdensity: nu must be positive");
    const int m = params.omega.dim();
    check_unit_vector(u, m);
    const double nu = params.nu;
    Eigen::VectorXd z(m);
    double marg = 0.0;
    for (int j = 0; j < m; ++j) {
        z(j) = t_quantile(u(j), nu);
        marg += t_logpdf(z(j), nu);
    }
    Eigen::VectorXd w =
        params.omega.cholesky_lower().triangularView<Eigen::Lower>().solve(z);
    double joint = std::lgamma(0.5 * (nu + m)) - std::lgamma(0.5 * nu) -
                   0.5 * m * std::log(nu * PI) - 0.5 * params.omega.log_det() -
                   0.5 * (nu + m) * std::log1p(w.squaredNorm() / nu);
    return joint - marg;
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("mvn_logpdf: covariance not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(x - mean);
    double logdet = 2.0 * L.diagonal().array().log().sum();
    return -0.5 * w.squaredNorm() - 0.5 * logdet -
           0.5 * x.size() * std::log(2.0 * PI);
}

double mvt_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& scale, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("mvt_logpdf: nu must be positive");
    const int m = static_cast<int>(x.size());
    Eigen::LLT<Eigen::MatrixXd> llt(scale);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("mvt_logpdf: scale not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(x - mean);
    double logdet = 2.0 * L.diagonal().array().log().sum();
    return std::lgamma(0.5 * (nu + m)) - std::lgamma(0.5 * nu) -
           0.5 * m * std::log(nu * PI) - 0.5 * logdet -
           0.5 * (nu + m) * std::log1p(w.squaredNorm() / nu);
}

CopulaSimulator make_gaussian_simulator(const CorrelationMatrix& omega) {
    CopulaSimulator sim;
    sim.dim = omega.dim();
    Eigen::MatrixXd L = omega.cholesky_lower();
    sim.draw_z = [L](Rng& rng) {
        Eigen::VectorXd eps(L.rows());
        for (int i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
        return Eigen::VectorXd(L * eps);
    };
    sim.marginal_cdf = [](int, double z) { return norm_cdf(z); };
    return sim;
}

CopulaSimulator make_t_simulator(const TCopulaParams& params) {
    if (!(params.nu > 0.0))
        throw std::domain_error("make_t_simulator: nu must be positive");
    CopulaSimulator sim;
    sim.dim = params.omega.dim();
    Eigen::MatrixXd L = params.omega.cholesky_lower();
    double nu = params.nu;
    sim.draw_z = [L, nu](Rng& rng) {
        Eigen::VectorXd eps(L.rows());
        for (int i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
        double w = rng.gamma(0.5 * nu, 0.5 * nu);
        return Eigen::VectorXd((L * eps) / std::sqrt(w));
    };
    sim.marginal_cdf = [nu](int, double z) { return t_cdf(z, nu); };
    return sim;
}

Eigen::MatrixXd simulate_copula_u(const CopulaSimulator& sim, int n, Rng& rng) {
    Eigen::MatrixXd u(n, sim.dim);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z = sim.draw_z(rng);
        for (int j = 0; j < sim.dim; ++j)
            u(i, j) = std::clamp(sim.marginal_cdf(j, z(j)), 1e-12, 1.0 - 1e-12);
    }
    return u;
}

Eigen::MatrixXd simulate_copula_model(const CopulaSimulator& sim,
                                      const std::vector<Margin>& margins,
                                      int n, Rng& rng) {
    if (static_cast<int>(margins.size()) != sim.dim)
        throw std::invalid_argument("simulate_copula_model: margin count mismatch");
    Eigen::MatrixXd y = simulate_copula_u(sim, n, rng);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < sim.dim; ++j)
            y(i, j) = margins[j].quantile(y(i, j));
    return y;
}

DiscreteBounds discrete_bounds(const std::vector<DiscreteCdf>& cdfs,
                               const std::vector<double>& y) {
    if (cdfs.size() != y.size())
        throw std::invalid_argument("discrete_bounds: dimension mismatch");
    DiscreteBounds out;
    for (size_t j = 0; j < y.size(); ++j) {
        const auto& t = cdfs[j];
        size_t idx = t.values.size();
        for (size_t k = 0; k < t.values.size(); ++k)
            if (t.values[k] == y[j]) { idx = k; break; }
        if (idx == t.values.size())
            throw std::domain_error("discrete_bounds: y outside discrete support");
        out.a.push_back(idx == 0 ? 0.0 : t.cdf[idx - 1]);
        out.b.push_back(t.cdf[idx]);
    }
    return out;
}

double discrete_mass_by_differencing(
    const std::function<double(const std::vector<double>&)>& copula_cdf,
    const DiscreteBounds& bounds) {
    const size_t m = bounds.a.size();
    if (m > 20)
        throw std::length_error("discrete_mass_by_differencing: m > 20");
    for (size_t j = 0; j < m; ++j)
        if (bounds.a[j] >= bounds.b[j]) return 0.0;

    // corner sum with sign (-1)^(number of a-components)
    double mass = 0.0;
    std::vector<double> corner(m);
    for (size_t code = 0; code < (size_t{1} << m); ++code) {
        int n_lower = 0;
        for (size_t j = 0; j < m; ++j) {
            bool low = (code >> j) & 1u;
            corner[j] = low ? bounds.a[j] : bounds.b[j];
            n_lower += low;
        }
        double sign = (n_lower % 2 == 0) ? 1.0 : -1.0;
        mass += sign * copula_cdf(corner);
    }
    if (mass < -1e-8 || mass > 1.0 + 1e-8)
        throw std::runtime_error("discrete_mass_by_differencing: mass outside [0,1]");
    return std::clamp(mass, 0.0, 1.0);
}

Eigen::VectorXd gaussian_da_z_step(const CorrelationMatrix& omega,
                                   const DiscreteBounds& bounds,
                                   const Eigen::VectorXd& z, Rng& rng) {
    const int m = omega.dim();
    if (static_cast<int>(bounds.a.size()) != m || z.size() != m)
        throw std::invalid_argument("gaussian_da_z_step: dimension mismatch");

    auto lo_of = [&](int j) {
        return bounds.a[j] <= 0.0 ? -std::numeric_limits<double>::infinity()
                                  : norm_quantile(bounds.a[j]);
    };
    auto hi_of = [&](int j) {
        return bounds.b[j] >= 1.0 ? std::numeric_limits<double>::infinity()
                                  : norm_quantile(bounds.b[j]);
    };
    for (int j = 0; j < m; ++j)
        if (!(z(j) >= lo_of(j) && z(j) < hi_of(j)))
            throw std::invalid_argument("gaussian_da_z_step: z violates bounds");

    Eigen::MatrixXd prec =
        omega.cholesky_lower().triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd::Identity(m, m));
    prec = prec.transpose() * prec; // Omega^{-1}

    Eigen::VectorXd out = z;
    for (int j = 0; j < m; ++j) {
        double cond_var = 1.0 / prec(j, j);
        double s = 0.0;
        for (int k = 0; k < m; ++k)
            if (k != j) s += prec(j, k) * out(k);
        double cond_mean = -cond_var * s;
        out(j) = truncated_normal(cond_mean, std::sqrt(cond_var), lo_of(j),
                                  hi_of(j), rng);
    }
    return out;
}

} // namespace icop
