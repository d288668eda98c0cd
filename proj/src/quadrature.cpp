#include "icop/quadrature.hpp"
#include "icop/special.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace icop {

GaussHermite gauss_hermite(int n) {
    if (n < 1) throw std::domain_error("gauss_hermite: n must be >= 1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        double b = std::sqrt(i / 2.0);
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussHermite gh;
    gh.nodes.resize(n);
    gh.weights.resize(n);
    const double mu0 = std::sqrt(PI); // integral of exp(-x^2)
    for (int i = 0; i < n; ++i) {
        gh.nodes[i] = es.eigenvalues()(i);
        double v = es.eigenvectors()(0, i);
        gh.weights[i] = mu0 * v * v;
    }
    return gh;
}

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double fa,
             double b, double fb, double m, double fm, double whole,
             double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(a, fa, m, fm, flm);
    double right = simpson(m, fm, b, fb, frm);
    double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol, int max_depth) {
    if (a == b) return 0.0;
    double m = 0.5 * (a + b);
    double fa = f(a), fb = f(b), fm = f(m);
    double whole = simpson(a, fa, b, fb, fm);
    return adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double integrate_real_line(const std::function<double(double)>& f, double tol) {
    auto g = [&f](double t) {
        double c = std::cos(t);
        if (c < 1e-300) return 0.0;
        double x = std::tan(t);
        double v = f(x);
        return v / (c * c);
    };
    return integrate(g, -0.5 * PI + 1e-12, 0.5 * PI - 1e-12, tol);
}

double integrate_left_tail(const std::function<double(double)>& f, double b,
                           double tol) {
    auto g = [&f](double t) {
        double c = std::cos(t);
        if (c < 1e-300) return 0.0;
        double x = std::tan(t);
        double v = f(x);
        return v / (c * c);
    };
    return integrate(g, -0.5 * PI + 1e-12, std::atan(b), tol);
}

} // namespace icop
