// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// is only entered after a runtime CPU check.

#include "procsight/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace procsight::kernels {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void gemv_acc(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] += dot(A + r * cols, x, cols);
}

void gemv_t_acc(const double* A, std::size_t rows, std::size_t cols, const double* y, double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const __m256d yr = _mm256_set1_pd(y[r]);
        const double* row = A + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4)
            _mm256_storeu_pd(x + c, _mm256_fmadd_pd(_mm256_loadu_pd(row + c), yr, _mm256_loadu_pd(x + c)));
        for (; c < cols; ++c) x[c] += row[c] * y[r];
    }
}

void ger(double* A, std::size_t rows, std::size_t cols, const double* y, const double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const __m256d yr = _mm256_set1_pd(y[r]);
        double* row = A + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4)
            _mm256_storeu_pd(row + c, _mm256_fmadd_pd(yr, _mm256_loadu_pd(x + c), _mm256_loadu_pd(row + c)));
        for (; c < cols; ++c) row[c] += y[r] * x[c];
    }
}

// Unfused multiply-add keeps axpy and adam_update bitwise equal to scalar.
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(a, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n, const AdamCoeffs& c) {
    const __m256d b1 = _mm256_set1_pd(c.beta1), b2 = _mm256_set1_pd(c.beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1), omb2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias1), bc2 = _mm256_set1_pd(c.bias2);
    const __m256d lr = _mm256_set1_pd(c.lr), eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, gi));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(omb2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_div_pd(mi, bc1);
        const __m256d v_hat = _mm256_div_pd(vi, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    if (i < n) scalar_table().adam_update(p + i, m + i, v + i, g + i, n - i, c);
}

constexpr KernelTable kAvx2{Isa::avx2, "avx2", dot, gemv_acc, gemv_t_acc, ger, axpy, adam_update};

} // namespace

const KernelTable* detail::avx2_table() { return &kAvx2; }

} // namespace procsight::kernels

#else

namespace procsight::kernels {
const KernelTable* detail::avx2_table() { return nullptr; }
} // namespace procsight::kernels

#endif
