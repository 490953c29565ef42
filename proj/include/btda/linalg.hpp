#pragma once

#include <functional>

#include "btda/types.hpp"

namespace btda {

/// Direct solve of A x = b for symmetric positive definite A via a pivoted
/// LDL^T factorization. Throws NotPositiveDefinite when a pivot falls at or
/// below 1e-12 (caller should raise damping).
Vector solve_spd(const Matrix& a, const Vector& b);

/// Matrix-free symmetric PSD operator, damping already folded in by the caller.
using LinearOperator = std::function<Vector(const Vector&)>;

struct CgResult {
    Vector x;
    bool converged = false;
    Index iterations = 0;
    double relative_residual = 0.0;  // ||op(x) - b|| / ||b||
};

/// Plain conjugate gradient on op(x) = b. Stops at ||r|| <= tol * ||b|| or
/// max_iter, returning the best iterate with the convergence flag either way.
/// Throws NonFiniteEncountered if an iterate picks up NaN/Inf.
CgResult conjugate_gradient(const LinearOperator& op, const Vector& b, double tol,
                            Index max_iter);

}  // namespace btda
