#pragma once

// Dense double-precision kernels behind the recurrent cells.
//
// Every kernel has a scalar reference implementation; SIMD variants are
// compiled per ISA and chosen once at runtime. Variants that only use
// add/sub/mul/div/sqrt per element (axpy, adam_update) are bitwise identical
// to the scalar path; reductions (dot, gemv) reassociate and ger fuses its
// multiply-add, so those agree to rounding.

#include <cstddef>
#include <string_view>
#include <vector>

namespace procsight::kernels {

enum class Isa { scalar, avx2, neon };

struct AdamCoeffs {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias1; // 1 - beta1^t
    double bias2; // 1 - beta2^t
};

struct KernelTable {
    Isa isa;
    const char* name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// y[r] += sum_c A[r*cols + c] * x[c]
    void (*gemv_acc)(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
    /// x[c] += sum_r A[r*cols + c] * y[r]
    void (*gemv_t_acc)(const double* A, std::size_t rows, std::size_t cols, const double* y, double* x);
    /// A[r*cols + c] += y[r] * x[c]
    void (*ger)(double* A, std::size_t rows, std::size_t cols, const double* y, const double* x);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*adam_update)(double* param, double* m, double* v, const double* grad, std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar_table();

/// Table for an ISA, or nullptr when it is not compiled in or the CPU lacks it.
const KernelTable* table_for(Isa isa);

/// ISAs usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// The process-wide table. Defaults to the widest supported ISA, overridable
/// with PROCSIGHT_KERNELS=scalar|avx2|neon or select().
const KernelTable& active();

/// Forces an ISA; returns false (leaving the selection unchanged) when unavailable.
bool select(Isa isa);

const char* to_string(Isa isa) noexcept;
bool parse_isa(std::string_view text, Isa& out) noexcept;

namespace detail {
// Per-ISA tables; defined in their own translation units.
const KernelTable* avx2_table();
const KernelTable* neon_table();
} // namespace detail

} // namespace procsight::kernels
