#include "btda/types.hpp"

#include <cmath>
#include <numeric>

namespace btda {

bool is_symmetric(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = i + 1; j < a.cols(); ++j) {
            const double bound = tol * std::max(1.0, std::abs(a(i, j)));
            if (std::abs(a(i, j) - a(j, i)) > bound) return false;
        }
    }
    return true;
}

IndexList all_indices(Index n) {
    IndexList out(static_cast<std::size_t>(n));
    std::iota(out.begin(), out.end(), Index{0});
    return out;
}

}  // namespace btda
