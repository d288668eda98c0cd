#include "icop/mcmc.hpp"
#include "icop/special.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <json.hpp>

namespace icop {

Eigen::VectorXd Chain::column(const std::string& name) const {
    for (size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) return draws.col(static_cast<int>(j));
    throw std::invalid_argument("Chain::column: no parameter named " + name);
}

namespace {

double vec_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    double h = p * (v.size() - 1);
    size_t i = static_cast<size_t>(h);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - i) * (v[i + 1] - v[i]);
}

} // namespace

std::map<std::string, ParamSummary> chain_summary(const Chain& chain) {
    if (chain.n_draws() == 0)
        throw std::domain_error("chain_summary: empty chain");
    std::map<std::string, ParamSummary> out;
    for (size_t j = 0; j < chain.names.size(); ++j) {
        const auto col = chain.draws.col(static_cast<int>(j));
        std::vector<double> v(col.data(), col.data() + col.size());
        ParamSummary s;
        s.mean = col.mean();
        s.q05 = vec_quantile(v, 0.05);
        s.q50 = vec_quantile(v, 0.50);
        s.q95 = vec_quantile(v, 0.95);
        auto it = chain.acceptance_rates.find(chain.names[j]);
        if (it != chain.acceptance_rates.end()) s.accept_rate = it->second;
        out[chain.names[j]] = s;
    }
    return out;
}

void write_chain_csv(const Chain& chain, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_chain_csv: cannot open " + path);
    f.precision(17);
    for (size_t j = 0; j < chain.names.size(); ++j)
        f << (j ? "," : "") << chain.names[j];
    f << "\n";
    for (int i = 0; i < chain.n_draws(); ++i) {
        for (int j = 0; j < chain.draws.cols(); ++j)
            f << (j ? "," : "") << chain.draws(i, j);
        f << "\n";
    }
}

std::string summary_json(const Chain& chain) {
    auto summ = chain_summary(chain);
    nlohmann::json j;
    for (const auto& [name, s] : summ) {
        nlohmann::json e;
        e["mean"] = s.mean;
        e["q05"] = s.q05;
        e["q50"] = s.q50;
        e["q95"] = s.q95;
        if (s.accept_rate >= 0.0) e["accept_rate"] = s.accept_rate;
        j[name] = e;
    }
    nlohmann::json blocks;
    for (const auto& [name, rate] : chain.acceptance_rates)
        blocks[name] = rate;
    nlohmann::json out;
    out["params"] = j;
    out["acceptance_rates"] = blocks;
    out["burn_in"] = chain.burn_in;
    out["seed"] = chain.seed;
    return out.dump(2);
}

BandedPrecision BandedPrecision::zero(int dim, int bandwidth) {
    BandedPrecision p;
    p.dim = dim;
    p.bandwidth = bandwidth;
    p.bands.resize(bandwidth + 1);
    for (int k = 0; k <= bandwidth; ++k)
        p.bands[k] = Eigen::VectorXd::Zero(dim - k);
    return p;
}

Eigen::MatrixXd BandedPrecision::dense() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k <= bandwidth; ++k)
        for (int i = 0; i < dim - k; ++i) {
            A(i + k, i) = bands[k](i);
            A(i, i + k) = bands[k](i);
        }
    return A;
}

BandedCholesky banded_cholesky(const BandedPrecision& prec) {
    const int n = prec.dim, b = prec.bandwidth;
    BandedCholesky L;
    L.dim = n;
    L.bandwidth = b;
    L.bands.resize(b + 1);
    for (int k = 0; k <= b; ++k) L.bands[k] = Eigen::VectorXd::Zero(n - k);

    for (int j = 0; j < n; ++j) {
        double s = prec.bands[0](j);
        for (int k = 1; k <= std::min(b, j); ++k)
            s -= L.bands[k](j - k) * L.bands[k](j - k);
        if (!(s > 0.0))
            throw std::runtime_error("banded_cholesky: matrix not positive definite");
        double ljj = std::sqrt(s);
        L.bands[0](j) = ljj;
        for (int i = j + 1; i <= std::min(n - 1, j + b); ++i) {
            double v = (i - j <= b) ? prec.bands[i - j](j) : 0.0;
            for (int k = 1; k <= b; ++k) {
                int c = j - k;
                if (c < 0 || i - c > b) continue;
                v -= L.bands[i - c](c) * L.bands[k](c);
            }
            L.bands[i - j](j) = v / ljj;
        }
    }
    return L;
}

Eigen::VectorXd BandedCholesky::solve_lower(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) {
        double s = rhs(i);
        for (int k = 1; k <= std::min(bandwidth, i); ++k)
            s -= bands[k](i - k) * x(i - k);
        x(i) = s / bands[0](i);
    }
    return x;
}

Eigen::VectorXd BandedCholesky::solve_upper(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x(dim);
    for (int i = dim - 1; i >= 0; --i) {
        double s = rhs(i);
        for (int k = 1; k <= std::min(bandwidth, dim - 1 - i); ++k)
            s -= bands[k](i) * x(i + k);
        x(i) = s / bands[0](i);
    }
    return x;
}

Eigen::VectorXd banded_gaussian_sample(const BandedPrecision& prec,
                                       const Eigen::VectorXd& linear_term,
                                       Rng& rng) {
    BandedCholesky L = banded_cholesky(prec);
    // mean = prec^{-1} b via two triangular solves
    Eigen::VectorXd mean = L.solve_upper(L.solve_lower(linear_term));
    Eigen::VectorXd eps(prec.dim);
    for (int i = 0; i < prec.dim; ++i) eps(i) = rng.normal();
    return mean + L.solve_upper(eps);
}

double banded_gaussian_logpdf(const BandedPrecision& prec,
                              const Eigen::VectorXd& linear_term,
                              const Eigen::VectorXd& x) {
    BandedCholesky L = banded_cholesky(prec);
    Eigen::VectorXd mean = L.solve_upper(L.solve_lower(linear_term));
    double logdet = 0.0;
    for (int i = 0; i < prec.dim; ++i) logdet += std::log(L.bands[0](i));
    Eigen::VectorXd d = x - mean;
    // quadratic form d' P d = || L^T d ||^2
    double quad = 0.0;
    for (int i = 0; i < prec.dim; ++i) {
        double s = L.bands[0](i) * d(i);
        for (int k = 1; k <= std::min(prec.bandwidth, prec.dim - 1 - i); ++k)
            s += L.bands[k](i) * d(i + k);
        quad += s * s;
    }
    return logdet - 0.5 * quad - 0.5 * prec.dim * std::log(2.0 * PI);
}

double truncated_normal(double mean, double sd, double lo, double hi, Rng& rng) {
    if (!(lo < hi)) throw std::domain_error("truncated_normal: lo must be < hi");
    double a = (lo - mean) / sd, b = (hi - mean) / sd;

    // Robert (1995) one-sided exponential rejection for far tails
    auto robert_tail = [&rng](double a) {
        double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            double z = a - std::log(rng.uniform()) / alpha;
            double rho = std::exp(-0.5 * (z - alpha) * (z - alpha));
            if (rng.uniform() <= rho) return z;
        }
    };

    double z;
    if (a > 4.0 && !std::isfinite(b)) {
        z = robert_tail(a);
    } else if (b < -4.0 && !std::isfinite(a)) {
        z = -robert_tail(-b);
    } else if (a > 4.0 || b < -4.0) {
        // bounded interval deep in a tail: rejection from the one-sided draw
        bool flip = b < -4.0;
        double aa = flip ? -b : a, bb = flip ? -a : b;
        for (int it = 0;; ++it) {
            z = robert_tail(aa);
            if (z < bb) break;
            if (it > 100000)
                throw std::runtime_error("truncated_normal: rejection stalled");
        }
        if (flip) z = -z;
    } else {
        double pa = norm_cdf(a), pb = norm_cdf(b);
        double u = pa + (pb - pa) * rng.uniform();
        u = std::clamp(u, 1e-15, 1.0 - 1e-15);
        z = norm_quantile(u);
        z = std::clamp(z, a, b);
    }
    return mean + sd * z;
}

bool adaptive_rw_mh(const std::function<double(const Eigen::VectorXd&)>& logpost,
                    Eigen::VectorXd& state, double& current_logpost,
                    RwScale& scale, Rng& rng) {
    if (!std::isfinite(current_logpost))
        throw std::runtime_error("adaptive_rw_mh: non-finite log posterior at current state");
    Eigen::VectorXd prop = state;
    double step = scale.step();
    for (int i = 0; i < state.size(); ++i) prop(i) += step * rng.normal();
    double lp = logpost(prop);
    bool accepted = false;
    if (std::isfinite(lp)) {
        double logu = std::log(rng.uniform());
        if (logu < lp - current_logpost) {
            state = prop;
            current_logpost = lp;
            accepted = true;
        }
    }
    scale.proposals += 1;
    if (accepted) scale.accepts += 1;
    if (!scale.frozen) {
        // Robbins-Monro toward the target acceptance rate
        double gamma = 1.0 / std::pow(static_cast<double>(scale.proposals), 0.6);
        scale.log_step += gamma * ((accepted ? 1.0 : 0.0) - scale.target);
        scale.log_step = std::clamp(scale.log_step, -15.0, 10.0);
    }
    return accepted;
}

} // namespace icop
