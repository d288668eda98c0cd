#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace icop {

struct GaussHermite {
    std::vector<double> nodes;   // abscissae of exp(-x^2) weight
    std::vector<double> weights;
};

// Golub-Welsch nodes/weights for the physicists' Hermite weight exp(-x^2).
GaussHermite gauss_hermite(int n);

// Adaptive Simpson on a finite interval.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10, int max_depth = 50);

// Integral over (-inf, inf) via the tangent substitution.
double integrate_real_line(const std::function<double(double)>& f,
                           double tol = 1e-10);

// Integral over (-inf, b].
double integrate_left_tail(const std::function<double(double)>& f, double b,
                           double tol = 1e-10);

} // namespace icop
