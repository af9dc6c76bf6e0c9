#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mix2fld {

// Small dense square matrix, row-major.
struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;

    Matrix() = default;
    explicit Matrix(std::size_t size) : n(size), a(size * size, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }

    static Matrix identity(std::size_t size) {
        Matrix m(size);
        for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
        return m;
    }
};

struct SingularMatrixError : std::runtime_error {
    explicit SingularMatrixError(double pivot)
        : std::runtime_error("singular matrix: pivot magnitude " + std::to_string(pivot)) {}
};

inline Matrix multiply(const Matrix& x, const Matrix& y) {
    Matrix out(x.n);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t k = 0; k < x.n; ++k) {
            double xik = x(i, k);
            for (std::size_t j = 0; j < x.n; ++j) out(i, j) += xik * y(k, j);
        }
    return out;
}

// Gauss-Jordan inverse with partial pivoting. Pivots below `pivot_tol`
// raise SingularMatrixError.
inline Matrix invert(Matrix m, double pivot_tol = 1e-10) {
    const std::size_t n = m.n;
    Matrix inv = Matrix::identity(n);

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot_row = col;
        double best = std::fabs(m(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            double v = std::fabs(m(r, col));
            if (v > best) {
                best = v;
                pivot_row = r;
            }
        }
        if (best < pivot_tol) throw SingularMatrixError(best);

        if (pivot_row != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(m(pivot_row, j), m(col, j));
                std::swap(inv(pivot_row, j), inv(col, j));
            }
        }

        double inv_pivot = 1.0 / m(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            m(col, j) *= inv_pivot;
            inv(col, j) *= inv_pivot;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = m(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

}  // namespace mix2fld
