#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

// Kolmogorov-Smirnov statistic against Uniform[0,1].
inline double ks_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    double d = 0.0;
    const double n = static_cast<double>(u.size());
    for (size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, std::fabs((i + 1) / n - u[i]));
        d = std::max(d, std::fabs(u[i] - i / n));
    }
    return d;
}

// alpha = 0.01 asymptotic critical value
inline double ks_crit01(size_t n) { return 1.628 / std::sqrt(double(n)); }

inline std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (size_t i = 0; i < idx.size(); ++i) r[idx[i]] = i + 1.0;
    return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = (n + 1) / 2.0;
    double num = 0.0, dx = 0.0, dy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - mx);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - mx) * (ry[i] - mx);
    }
    return num / std::sqrt(dx * dy);
}

inline double mean_of(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / x.size();
}

inline double var_of(const std::vector<double>& x) {
    double m = mean_of(x), s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / (x.size() - 1);
}
