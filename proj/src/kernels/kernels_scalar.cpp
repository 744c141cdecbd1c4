#include <cmath>

#include "procsight/kernels.hpp"

namespace procsight::kernels {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void gemv_acc(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot(A + r * cols, x, cols);
}

void gemv_t_acc(const double* A, std::size_t rows, std::size_t cols, const double* y, double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double yr = y[r];
        const double* row = A + r * cols;
        for (std::size_t c = 0; c < cols; ++c) x[c] += row[c] * yr;
    }
}

void ger(double* A, std::size_t rows, std::size_t cols, const double* y, const double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double yr = y[r];
        double* row = A + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += yr * x[c];
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n, const AdamCoeffs& c) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
        v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
        const double m_hat = m[i] / c.bias1;
        const double v_hat = v[i] / c.bias2;
        p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

constexpr KernelTable kScalar{Isa::scalar, "scalar", dot, gemv_acc, gemv_t_acc, ger, axpy, adam_update};

} // namespace

const KernelTable& scalar_table() { return kScalar; }

} // namespace procsight::kernels
