#include "icop/interp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace icop {

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw std::invalid_argument("MonotoneCubic: need >= 2 matching nodes");
    for (size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("MonotoneCubic: x not strictly increasing");

    std::vector<double> d(n - 1);
    for (size_t i = 0; i + 1 < n; ++i)
        d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

    m_.resize(n);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (size_t i = 1; i + 1 < n; ++i)
        m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);

    // Fritsch-Carlson limiter
    for (size_t i = 0; i + 1 < n; ++i) {
        if (d[i] == 0.0) {
            m_[i] = 0.0;
            m_[i + 1] = 0.0;
            continue;
        }
        double a = m_[i] / d[i], b = m_[i + 1] / d[i];
        double s = a * a + b * b;
        if (s > 9.0) {
            double t = 3.0 / std::sqrt(s);
            m_[i] = t * a * d[i];
            m_[i + 1] = t * b * d[i];
        }
    }
}

double MonotoneCubic::operator()(double xq) const {
    if (xq <= x_.front()) return y_.front() + m_.front() * (xq - x_.front());
    if (xq >= x_.back()) return y_.back() + m_.back() * (xq - x_.back());
    size_t i = std::upper_bound(x_.begin(), x_.end(), xq) - x_.begin() - 1;
    double h = x_[i + 1] - x_[i];
    double t = (xq - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
}

double MonotoneCubic::derivative(double xq) const {
    if (xq <= x_.front()) return m_.front();
    if (xq >= x_.back()) return m_.back();
    size_t i = std::upper_bound(x_.begin(), x_.end(), xq) - x_.begin() - 1;
    double h = x_[i + 1] - x_[i];
    double t = (xq - x_[i]) / h;
    double dh00 = (6 * t * t - 6 * t) / h, dh10 = 3 * t * t - 4 * t + 1;
    double dh01 = (-6 * t * t + 6 * t) / h, dh11 = 3 * t * t - 2 * t;
    return dh00 * y_[i] + dh10 * m_[i] + dh01 * y_[i + 1] + dh11 * m_[i + 1];
}

void InterpTable::finalize() {
    size_t n = grid_q.size();
    if (n < 2 || grid_p.size() != n || grid_logf.size() != n)
        throw std::invalid_argument("InterpTable: inconsistent grids");

    // p must be strictly increasing for the quantile spline; dedupe flats
    std::vector<double> pq_p, pq_q;
    pq_p.reserve(n);
    pq_q.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        if (!pq_p.empty() && grid_p[i] <= pq_p.back()) continue;
        pq_p.push_back(grid_p[i]);
        pq_q.push_back(grid_q[i]);
    }
    if (pq_p.size() < 2)
        throw std::runtime_error("InterpTable: degenerate probability grid");

    quantile_spline = MonotoneCubic(pq_p, pq_q);
    cdf_spline = MonotoneCubic(pq_q, pq_p);
    logf_spline = MonotoneCubic(grid_q, grid_logf);

    p1 = grid_p.front();
    pN = grid_p.back();
    double f_lo = std::exp(grid_logf.front());
    double f_hi = std::exp(grid_logf.back());
    lower_rate = std::max(f_lo / std::max(p1, 1e-300), 1e-10);
    upper_rate = std::max(f_hi / std::max(1.0 - pN, 1e-300), 1e-10);
}

double InterpTable::quantile(double p) const {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    if (p < p1)
        return grid_q.front() + std::log(p / p1) / lower_rate;
    if (p > pN)
        return grid_q.back() - std::log((1.0 - p) / (1.0 - pN)) / upper_rate;
    // Invert the cdf spline so that cdf(quantile(p)) == p; the quantile
    // spline alone is a different interpolant and only agrees at the nodes.
    double lo = grid_q.front(), hi = grid_q.back();
    double q = std::clamp(quantile_spline(p), lo, hi);
    for (int it = 0; it < 50; ++it) {
        double f = cdf_spline(q) - p;
        if (std::fabs(f) < 1e-13) break;
        if (f > 0.0) hi = q; else lo = q;
        double d = cdf_spline.derivative(q);
        double qn = (d > 0.0) ? q - f / d : q;
        if (!(qn > lo && qn < hi)) qn = 0.5 * (lo + hi);
        if (std::fabs(qn - q) < 1e-15 * (1.0 + std::fabs(q))) { q = qn; break; }
        q = qn;
    }
    return q;
}

double InterpTable::cdf(double q) const {
    if (q < grid_q.front())
        return p1 * std::exp(lower_rate * (q - grid_q.front()));
    if (q > grid_q.back())
        return 1.0 - (1.0 - pN) * std::exp(-upper_rate * (q - grid_q.back()));
    return std::clamp(cdf_spline(q), 0.0, 1.0);
}

double InterpTable::logpdf(double q) const {
    if (q < grid_q.front())
        return grid_logf.front() + lower_rate * (q - grid_q.front());
    if (q > grid_q.back())
        return grid_logf.back() - upper_rate * (q - grid_q.back());
    return logf_spline(q);
}

namespace {

// Newton with a maintained bracket; bisection fallback when the step leaves it.
double root_find_quantile(const std::function<double(double)>& cdf_fn,
                          const std::function<double(double)>& logpdf_fn,
                          double p) {
    double lo = -1.0, hi = 1.0;
    for (int i = 0; i < 200 && cdf_fn(lo) > p; ++i) lo *= 2.0;
    for (int i = 0; i < 200 && cdf_fn(hi) < p; ++i) hi *= 2.0;
    if (cdf_fn(lo) > p || cdf_fn(hi) < p)
        throw std::runtime_error("build_interp_table: failed to bracket quantile");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double f = cdf_fn(x) - p;
        if (f > 0.0) hi = x; else lo = x;
        double pdf = std::exp(logpdf_fn(x));
        double xn = (pdf > 0.0) ? x - f / pdf : x;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::fabs(xn - x) < 1e-13 * (1.0 + std::fabs(x))) return xn;
        x = xn;
        if (hi - lo < 1e-14 * (1.0 + std::fabs(x))) break;
    }
    return x;
}

} // namespace

InterpTable build_interp_table(const std::function<double(double)>& cdf_fn,
                               const std::function<double(double)>& logpdf_fn,
                               int n_points) {
    if (n_points < 2)
        throw std::domain_error("build_interp_table: need at least 2 nodes");
    const double p_lo = 1e-4, p_hi = 0.9999;
    double q1 = root_find_quantile(cdf_fn, logpdf_fn, p_lo);
    double qN = root_find_quantile(cdf_fn, logpdf_fn, p_hi);
    if (!(qN > q1))
        throw std::runtime_error("build_interp_table: anchor quantiles not ordered");

    InterpTable table;
    table.grid_q.resize(n_points);
    table.grid_p.resize(n_points);
    table.grid_logf.resize(n_points);
    double delta = (qN - q1) / (n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        double q = q1 + i * delta;
        table.grid_q[i] = q;
        table.grid_p[i] = cdf_fn(q);
        table.grid_logf[i] = logpdf_fn(q);
    }
    table.grid_p.front() = p_lo;
    table.grid_p.back() = p_hi;
    table.finalize();
    return table;
}

} // namespace icop
