#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace btda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// A plain (feature, label) pair. Test points are Samples, never dataset members.
struct Sample {
    Vector features;
    int label = 0;
};

/// Elementwise symmetry check: |A(i,j) - A(j,i)| <= tol * max(1, |A(i,j)|).
bool is_symmetric(const Matrix& a, double tol = 1e-10);

IndexList all_indices(Index n);

}  // namespace btda
