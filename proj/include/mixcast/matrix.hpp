#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace mixcast {

// Small dense row-major matrix. The matrices in this project (transition
// kernels, network layers) are tiny, so no linear algebra package is pulled in.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    std::span<const double> row(std::size_t r) const { return {a.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
    assert(x.cols == y.rows);
    Matrix out(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
        }
    return out;
}

// y = M^T x  and  y = M x helpers for vectors.
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
    assert(x.size() == m.cols && out.size() == m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += m(i, j) * x[j];
        out[i] = acc;
    }
}

inline void vecmat(std::span<const double> x, const Matrix& m, std::span<double> out) {
    assert(x.size() == m.rows && out.size() == m.cols);
    for (std::size_t j = 0; j < m.cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double v = x[i];
        if (v == 0.0) continue;
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += v * m(i, j);
    }
}

}  // namespace mixcast
