#include "btda/linalg.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

#include "btda/errors.hpp"

namespace btda {

Vector solve_spd(const Matrix& a, const Vector& b) {
    if (a.rows() != a.cols()) throw std::invalid_argument("solve_spd: matrix not square");
    if (a.rows() != b.size()) throw std::invalid_argument("solve_spd: dimension mismatch");
    if (!is_symmetric(a)) throw std::invalid_argument("solve_spd: matrix not symmetric");

    Eigen::LDLT<Matrix> ldlt(a);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12) {
        throw NotPositiveDefinite(
            "solve_spd: pivot <= 1e-12; raise damping or check conditioning");
    }
    return ldlt.solve(b);
}

CgResult conjugate_gradient(const LinearOperator& op, const Vector& b, double tol,
                            Index max_iter) {
    if (tol <= 0.0) throw std::invalid_argument("conjugate_gradient: tol must be > 0");

    CgResult result;
    result.x = Vector::Zero(b.size());

    const double b_norm = b.norm();
    if (b_norm == 0.0) {
        result.converged = true;
        return result;
    }

    Vector r = b;  // residual of the zero iterate
    Vector p = r;
    double rr = r.squaredNorm();

    Vector best_x = result.x;
    double best_rnorm = std::sqrt(rr);

    for (Index it = 0; it < max_iter; ++it) {
        const Vector ap = op(p);
        const double pap = p.dot(ap);
        if (!std::isfinite(pap)) {
            throw NonFiniteEncountered("conjugate_gradient: non-finite curvature");
        }
        if (pap <= 0.0) break;  // damped operator should be PD; bail to best iterate

        const double alpha = rr / pap;
        result.x += alpha * p;
        r -= alpha * ap;
        const double rr_new = r.squaredNorm();
        if (!std::isfinite(rr_new) || !result.x.allFinite()) {
            throw NonFiniteEncountered("conjugate_gradient: non-finite iterate");
        }

        result.iterations = it + 1;
        const double rnorm = std::sqrt(rr_new);
        if (rnorm < best_rnorm) {
            best_rnorm = rnorm;
            best_x = result.x;
        }
        if (rnorm <= tol * b_norm) {
            result.converged = true;
            result.relative_residual = rnorm / b_norm;
            return result;
        }

        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }

    result.x = best_x;
    result.converged = false;
    result.relative_residual = best_rnorm / b_norm;
    return result;
}

}  // namespace btda
