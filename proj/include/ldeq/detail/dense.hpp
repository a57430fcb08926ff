#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace ldeq::detail {

// In-place Gaussian elimination with partial pivoting. Returns false if singular.
inline bool dense_solve(std::vector<std::vector<double>>& A, std::vector<double>& b) {
    std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
        if (std::fabs(A[piv][col]) < 1e-300) return false;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double m = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c) A[r][c] -= m * A[col][c];
            b[r] -= m * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= A[i][c] * b[c];
        b[i] = s / A[i][i];
        if (!std::isfinite(b[i])) return false;
    }
    return true;
}

} // namespace ldeq::detail
