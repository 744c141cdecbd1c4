// NEON variants for AArch64, where Advanced SIMD is architecturally mandatory.

#include "procsight/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace procsight::kernels {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double s = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void gemv_acc(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot(A + r * cols, x, cols);
}

void gemv_t_acc(const double* A, std::size_t rows, std::size_t cols, const double* y, double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float64x2_t yr = vdupq_n_f64(y[r]);
        const double* row = A + r * cols;
        std::size_t c = 0;
        for (; c + 2 <= cols; c += 2) vst1q_f64(x + c, vfmaq_f64(vld1q_f64(x + c), vld1q_f64(row + c), yr));
        for (; c < cols; ++c) x[c] += row[c] * y[r];
    }
}

void ger(double* A, std::size_t rows, std::size_t cols, const double* y, const double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const float64x2_t yr = vdupq_n_f64(y[r]);
        double* row = A + r * cols;
        std::size_t c = 0;
        for (; c + 2 <= cols; c += 2) vst1q_f64(row + c, vfmaq_f64(vld1q_f64(row + c), yr, vld1q_f64(x + c)));
        for (; c < cols; ++c) row[c] += y[r] * x[c];
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t a = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(a, vld1q_f64(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n, const AdamCoeffs& c) {
    const float64x2_t b1 = vdupq_n_f64(c.beta1), b2 = vdupq_n_f64(c.beta2);
    const float64x2_t omb1 = vdupq_n_f64(1.0 - c.beta1), omb2 = vdupq_n_f64(1.0 - c.beta2);
    const float64x2_t bc1 = vdupq_n_f64(c.bias1), bc2 = vdupq_n_f64(c.bias2);
    const float64x2_t lr = vdupq_n_f64(c.lr), eps = vdupq_n_f64(c.eps);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t gi = vld1q_f64(g + i);
        const float64x2_t mi = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(omb1, gi));
        const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(omb2, vmulq_f64(gi, gi)));
        vst1q_f64(m + i, mi);
        vst1q_f64(v + i, vi);
        const float64x2_t step =
            vdivq_f64(vmulq_f64(lr, vdivq_f64(mi, bc1)), vaddq_f64(vsqrtq_f64(vdivq_f64(vi, bc2)), eps));
        vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
    }
    if (i < n) scalar_table().adam_update(p + i, m + i, v + i, g + i, n - i, c);
}

constexpr KernelTable kNeon{Isa::neon, "neon", dot, gemv_acc, gemv_t_acc, ger, axpy, adam_update};

} // namespace

const KernelTable* detail::neon_table() { return &kNeon; }

} // namespace procsight::kernels

#else

namespace procsight::kernels {
const KernelTable* detail::neon_table() { return nullptr; }
} // namespace procsight::kernels

#endif
