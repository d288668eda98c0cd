#pragma once

#include <functional>
#include <vector>

namespace icop {

// Monotone cubic Hermite interpolant (Fritsch-Carlson slopes). If the data
// are monotone, so is the interpolant.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double xq) const;
    double derivative(double xq) const;

    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& y() const { return y_; }

private:
    std::vector<double> x_, y_, m_; // nodes, values, node slopes
};

// Quantile / log-density tables built on a uniform q-grid anchored at
// probabilities p1 = 1e-4 and pN = 0.9999. Outside the anchors the quantile
// extrapolates with an exponential tail matched to the density at the anchor.
struct InterpTable {
    std::vector<double> grid_q;    // ascending
    std::vector<double> grid_p;    // ascending probabilities
    std::vector<double> grid_logf; // log density at grid_q
    double p1 = 1e-4;
    double pN = 0.9999;

    MonotoneCubic quantile_spline; // p -> q
    MonotoneCubic cdf_spline;      // q -> p
    MonotoneCubic logf_spline;     // q -> log f

    double lower_rate = 1.0; // exponential tail rates at the anchors
    double upper_rate = 1.0;

    double quantile(double p) const;
    double cdf(double q) const;
    double logpdf(double q) const;

    void finalize(); // build splines and tail rates from the grids
};

// Algorithm-4 style construction: root-find the anchor quantiles, lay a
// uniform q-grid, evaluate cdf/logpdf at each node, interpolate.
InterpTable build_interp_table(const std::function<double(double)>& cdf_fn,
                               const std::function<double(double)>& logpdf_fn,
                               int n_points = 100);

} // namespace icop
