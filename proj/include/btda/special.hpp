#pragma once

#include <cstdint>

namespace btda {

/// ln Gamma(x) for x > 0, Lanczos (g = 7, 9 terms) with reflection below 0.5.
double ln_gamma(double x);

/// Regularized incomplete beta I_x(a, b), continued fraction with the
/// symmetry switch at x > (a + 1) / (a + b + 2).
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided Student-t tail probability P(|T_dof| >= |t_stat|).
double student_t_p_two_sided(double t_stat, std::int64_t dof);

}  // namespace btda
