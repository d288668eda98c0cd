#include "icop/margins.hpp"
#include "icop/quadrature.hpp"
#include "icop/special.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace icop {

double skewt1_logpdf(double z, double delta, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("skewt1_logpdf: nu must be positive");
    double s2 = 1.0 + delta * delta; // gamma + delta^2 with gamma = 1
    double zs = z / std::sqrt(s2);
    double S = z * z / s2;
    double mean_v = delta * z / s2;
    double var_v = (S + nu) / (1.0 + nu) / s2;
    double pr = t_cdf(mean_v / std::sqrt(var_v), nu + 1.0);
    if (pr <= 0.0) pr = 1e-300;
    return std::log(2.0) - 0.5 * std::log(s2) + t_logpdf(zs, nu) + std::log(pr);
}

double skewt1_cdf(double z, double delta, double nu) {
    // F(0) is exact: an orthant probability of the elliptical (X, Q) pair
    double r = delta / std::sqrt(1.0 + delta * delta);
    double F0 = 0.5 - std::asin(r) / PI;
    if (z == 0.0) return F0;
    double tail = integrate([&](double x) { return std::exp(skewt1_logpdf(x, delta, nu)); },
                            std::min(0.0, z), std::max(0.0, z), 1e-11);
    double p = (z > 0.0) ? F0 + tail : F0 - tail;
    return std::clamp(p, 0.0, 1.0);
}

double asym_laplace_logpdf(double y, const AsymLaplaceParams& par) {
    double u = (y - par.mu) / par.sigma;
    double rho = u >= 0.0 ? par.p * u : (par.p - 1.0) * u;
    return std::log(par.p * (1.0 - par.p) / par.sigma) - rho;
}

double asym_laplace_cdf(double y, const AsymLaplaceParams& par) {
    double u = (y - par.mu) / par.sigma;
    if (u <= 0.0) return par.p * std::exp((1.0 - par.p) * u);
    return 1.0 - (1.0 - par.p) * std::exp(-par.p * u);
}

double asym_laplace_quantile(double p, const AsymLaplaceParams& par) {
    if (p <= par.p)
        return par.mu + par.sigma * std::log(p / par.p) / (1.0 - par.p);
    return par.mu - par.sigma * std::log((1.0 - p) / (1.0 - par.p)) / par.p;
}

Margin Margin::normal(double mean, double sd) {
    if (!(sd > 0.0)) throw std::domain_error("Margin::normal: sd must be positive");
    Margin m;
    m.family_ = MarginFamily::normal;
    m.params_ = {mean, sd};
    return m;
}

Margin Margin::student_t(double nu) {
    if (!(nu > 0.0)) throw std::domain_error("Margin::student_t: nu must be positive");
    Margin m;
    m.family_ = MarginFamily::student_t;
    m.params_ = {nu};
    return m;
}

Margin Margin::skew_t(double delta, double nu) {
    if (!(nu > 0.0)) throw std::domain_error("Margin::skew_t: nu must be positive");
    Margin m;
    m.family_ = MarginFamily::skew_t_univariate;
    m.params_ = {delta, nu};
    return m;
}

Margin Margin::asym_laplace(double mu, double sigma, double p) {
    if (!(sigma > 0.0)) throw std::domain_error("Margin::asym_laplace: sigma must be positive");
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("Margin::asym_laplace: p must lie in (0,1)");
    Margin m;
    m.family_ = MarginFamily::asym_laplace;
    m.params_ = {mu, sigma, p};
    return m;
}

Margin Margin::from_table(InterpTable table) {
    Margin m;
    m.family_ = MarginFamily::interp_table;
    m.table_ = std::make_shared<InterpTable>(std::move(table));
    return m;
}

double Margin::logpdf(double y) const {
    if (!std::isfinite(y))
        throw std::domain_error("Margin::logpdf: y outside support");
    switch (family_) {
    case MarginFamily::normal:
        return norm1_logpdf(y, params_[0], params_[1] * params_[1]);
    case MarginFamily::student_t:
        return t_logpdf(y, params_[0]);
    case MarginFamily::skew_t_univariate:
        return skewt1_logpdf(y, params_[0], params_[1]);
    case MarginFamily::asym_laplace:
        return asym_laplace_logpdf(y, {params_[0], params_[1], params_[2]});
    case MarginFamily::kde: {
        double s = 0.0;
        for (size_t i = 0; i < kde_points_.size(); ++i)
            s += norm_pdf((y - kde_points_[i]) / kde_bandwidths_[i]) / kde_bandwidths_[i];
        s /= static_cast<double>(kde_points_.size());
        return std::log(std::max(s, 1e-300));
    }
    case MarginFamily::interp_table:
        return table_->logpdf(y);
    }
    throw std::logic_error("Margin::logpdf: unknown family");
}

double Margin::cdf(double y) const {
    if (std::isnan(y)) throw std::domain_error("Margin::cdf: nan input");
    if (y <= support_lo_) return 0.0;
    if (y >= support_hi_) return 1.0;
    switch (family_) {
    case MarginFamily::normal:
        return norm_cdf((y - params_[0]) / params_[1]);
    case MarginFamily::student_t:
        return t_cdf(y, params_[0]);
    case MarginFamily::skew_t_univariate:
        return skewt1_cdf(y, params_[0], params_[1]);
    case MarginFamily::asym_laplace:
        return asym_laplace_cdf(y, {params_[0], params_[1], params_[2]});
    case MarginFamily::kde: {
        double s = 0.0;
        for (size_t i = 0; i < kde_points_.size(); ++i)
            s += norm_cdf((y - kde_points_[i]) / kde_bandwidths_[i]);
        return s / static_cast<double>(kde_points_.size());
    }
    case MarginFamily::interp_table:
        return table_->cdf(y);
    }
    throw std::logic_error("Margin::cdf: unknown family");
}

double Margin::quantile_root(double p, double tol) const {
    double lo = -1.0, hi = 1.0;
    if (family_ == MarginFamily::kde && !kde_points_.empty()) {
        lo = *std::min_element(kde_points_.begin(), kde_points_.end()) -
             10.0 * kde_bandwidths_.front();
        hi = *std::max_element(kde_points_.begin(), kde_points_.end()) +
             10.0 * kde_bandwidths_.back();
    }
    for (int i = 0; i < 200 && cdf(lo) > p; ++i) lo = 2.0 * lo - 1.0;
    for (int i = 0; i < 200 && cdf(hi) < p; ++i) hi = 2.0 * hi + 1.0;
    if (cdf(lo) > p || cdf(hi) < p)
        throw std::runtime_error("Margin::quantile: failed to bracket");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double f = cdf(x) - p;
        if (std::fabs(f) < tol) return x;
        if (f > 0.0) hi = x; else lo = x;
        double d = pdf(x);
        double xn = d > 0.0 ? x - f / d : x;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::fabs(xn - x) < 1e-14 * (1.0 + std::fabs(x)) && std::fabs(f) < 1e-9)
            return xn;
        x = xn;
    }
    if (std::fabs(cdf(x) - p) > 1e3 * tol)
        throw std::runtime_error("Margin::quantile: root finding did not converge (p=" +
                                 std::to_string(p) + ")");
    return x;
}

double Margin::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("Margin::quantile: p must lie in (0,1)");
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    switch (family_) {
    case MarginFamily::normal:
        return params_[0] + params_[1] * norm_quantile(p);
    case MarginFamily::student_t:
        return t_quantile(p, params_[0]);
    case MarginFamily::skew_t_univariate:
        return quantile_root(p, 1e-11);
    case MarginFamily::asym_laplace:
        return asym_laplace_quantile(p, {params_[0], params_[1], params_[2]});
    case MarginFamily::kde:
        return quantile_root(p, 1e-7);
    case MarginFamily::interp_table:
        return table_->quantile(p);
    }
    throw std::logic_error("Margin::quantile: unknown family");
}

Margin fit_kde(const std::vector<double>& data, bool adaptive) {
    size_t n = data.size();
    if (n < 20) throw std::runtime_error("fit_kde: need at least 20 observations");
    for (double v : data)
        if (!std::isfinite(v)) throw std::runtime_error("fit_kde: non-finite data");

    double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : data) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (n - 1));
    if (!(sd > 0.0)) throw std::runtime_error("fit_kde: zero-variance data");

    std::vector<double> sorted(data);
    std::sort(sorted.begin(), sorted.end());
    double iqr = sorted[static_cast<size_t>(0.75 * (n - 1))] -
                 sorted[static_cast<size_t>(0.25 * (n - 1))];
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    double h0 = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

    Margin m;
    m.family_ = MarginFamily::kde;
    m.kde_points_ = sorted;
    m.kde_bandwidths_.assign(n, h0);
    if (!adaptive) return m;

    // Abramson local bandwidths from a fixed-bandwidth pilot
    std::vector<double> pilot(n);
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < n; ++j)
            s += norm_pdf((sorted[i] - sorted[j]) / h0);
        pilot[i] = std::max(s / (n * h0), 1e-300);
    }
    double log_g = 0.0;
    for (double f : pilot) log_g += std::log(f);
    log_g /= static_cast<double>(n);
    double g = std::exp(log_g);
    for (size_t i = 0; i < n; ++i)
        m.kde_bandwidths_[i] = h0 * std::sqrt(g / pilot[i]);
    return m;
}

Margin fit_asym_laplace(const std::vector<double>& data) {
    size_t n = data.size();
    if (n < 10) throw std::runtime_error("fit_asym_laplace: need at least 10 observations");
    std::vector<double> sorted(data);
    std::sort(sorted.begin(), sorted.end());

    auto sample_quantile = [&](double p) {
        double h = p * (n - 1);
        size_t i = static_cast<size_t>(h);
        if (i + 1 >= n) return sorted.back();
        return sorted[i] + (h - i) * (sorted[i + 1] - sorted[i]);
    };

    // Profile likelihood over p: for fixed p the MLE of mu is the sample
    // p-quantile and sigma the mean check loss.
    auto profile_loglik = [&](double p) {
        double mu = sample_quantile(p);
        double loss = 0.0;
        for (double y : data) {
            double u = y - mu;
            loss += u >= 0.0 ? p * u : (p - 1.0) * u;
        }
        double sigma = std::max(loss / n, 1e-12);
        return n * (std::log(p * (1.0 - p) / sigma) - 1.0);
    };

    double lo = 0.01, hi = 0.99;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    double fa = profile_loglik(a), fb = profile_loglik(b);
    for (int it = 0; it < 120 && hi - lo > 1e-8; ++it) {
        if (fa > fb) {
            hi = b; b = a; fb = fa;
            a = hi - gr * (hi - lo); fa = profile_loglik(a);
        } else {
            lo = a; a = b; fa = fb;
            b = lo + gr * (hi - lo); fb = profile_loglik(b);
        }
    }
    double p = 0.5 * (lo + hi);
    double mu = sample_quantile(p);
    double loss = 0.0;
    for (double y : data) {
        double u = y - mu;
        loss += u >= 0.0 ? p * u : (p - 1.0) * u;
    }
    double sigma = std::max(loss / n, 1e-12);
    if (!std::isfinite(profile_loglik(p)))
        throw std::runtime_error("fit_asym_laplace: optimizer failed");
    return Margin::asym_laplace(mu, sigma, p);
}

std::string Margin::to_json() const {
    nlohmann::json j;
    switch (family_) {
    case MarginFamily::normal: j["family"] = "normal"; break;
    case MarginFamily::student_t: j["family"] = "student-t"; break;
    case MarginFamily::skew_t_univariate: j["family"] = "skew-t-univariate"; break;
    case MarginFamily::asym_laplace: j["family"] = "asymmetric-laplace"; break;
    case MarginFamily::kde: j["family"] = "kde"; break;
    case MarginFamily::interp_table: j["family"] = "interp-table"; break;
    }
    j["params"] = params_;
    j["support"] = {support_lo_, support_hi_};
    if (family_ == MarginFamily::kde) {
        j["points"] = kde_points_;
        j["bandwidths"] = kde_bandwidths_;
    }
    if (family_ == MarginFamily::interp_table) {
        j["grid_q"] = table_->grid_q;
        j["grid_p"] = table_->grid_p;
        j["grid_logf"] = table_->grid_logf;
        j["p1"] = table_->p1;
        j["pN"] = table_->pN;
    }
    return j.dump();
}

Margin Margin::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::string fam = j.at("family");
    std::vector<double> params = j.value("params", std::vector<double>{});
    if (fam == "normal") return Margin::normal(params.at(0), params.at(1));
    if (fam == "student-t") return Margin::student_t(params.at(0));
    if (fam == "skew-t-univariate") return Margin::skew_t(params.at(0), params.at(1));
    if (fam == "asymmetric-laplace")
        return Margin::asym_laplace(params.at(0), params.at(1), params.at(2));
    if (fam == "kde") {
        Margin m;
        m.family_ = MarginFamily::kde;
        m.kde_points_ = j.at("points").get<std::vector<double>>();
        m.kde_bandwidths_ = j.at("bandwidths").get<std::vector<double>>();
        return m;
    }
    if (fam == "interp-table") {
        InterpTable t;
        t.grid_q = j.at("grid_q").get<std::vector<double>>();
        t.grid_p = j.at("grid_p").get<std::vector<double>>();
        t.grid_logf = j.at("grid_logf").get<std::vector<double>>();
        t.finalize();
        return Margin::from_table(std::move(t));
    }
    throw std::runtime_error("Margin::from_json: unknown family " + fam);
}

} // namespace icop
