#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace modec {

// Dense row-major matrix of doubles. Just enough linear algebra for a
// small fully-connected network engine.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool empty() const { return rows == 0 || cols == 0; }
};

// out = a * b^T convention is not used anywhere; plain a(r×k) * b(k×c).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ar[k];
            if (aik == 0.0) continue;
            const double* br = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * br[j];
        }
    }
    return out;
}

}  // namespace modec
