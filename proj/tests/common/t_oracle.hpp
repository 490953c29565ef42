#pragma once

// Quadrature oracle for two-sided Student-t tail probabilities, independent of
// the library's incomplete-beta path: adaptive Simpson over the central
// interval with std::lgamma for the normalizing constant.

#include <cmath>
#include <functional>

namespace btda_test {

inline double t_density(double u, double nu) {
    const double ln_coeff = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                            0.5 * std::log(nu * M_PI);
    return std::exp(ln_coeff - 0.5 * (nu + 1.0) * std::log1p(u * u / nu));
}

inline double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double eps, double whole, int depth) {
    const double mid = 0.5 * (a + b);
    const double left = simpson(f, a, mid);
    const double right = simpson(f, mid, b);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, mid, 0.5 * eps, left, depth - 1) +
           adaptive_simpson(f, mid, b, 0.5 * eps, right, depth - 1);
}

inline double oracle_t_p_two_sided(double t, double nu) {
    const double upper = std::abs(t);
    if (upper == 0.0) return 1.0;
    const std::function<double(double)> f = [nu](double u) { return t_density(u, nu); };
    const double central =
        adaptive_simpson(f, 0.0, upper, 1e-12, simpson(f, 0.0, upper), 40);
    return 1.0 - 2.0 * central;
}

}  // namespace btda_test
