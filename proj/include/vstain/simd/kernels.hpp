#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference and, where
// the CPU supports it, an AVX2+FMA variant; the active table is chosen once
// at startup. Set VSTAIN_SIMD=scalar to force the reference path.

#include <cstddef>
#include <string_view>

namespace vstain::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
    Isa isa;

    // Row-major C = alpha * op(A) * op(B) + beta * C with op(A): MxK, op(B): KxN.
    // When beta == 0, C is not read.
    void (*gemm_f32)(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                     const float* a, int lda, const float* b, int ldb, float beta,
                     float* c, int ldc);

    // y += alpha * x
    void (*axpy_f32)(std::size_t n, float alpha, const float* x, float* y);
    void (*axpy_f64)(std::size_t n, double alpha, const double* x, double* y);

    float (*dot_f32)(std::size_t n, const float* x, const float* y);

    // sum (x - y)^2
    double (*sq_diff_sum_f64)(std::size_t n, const double* x, const double* y);
};

// The table selected for this process.
const KernelTable& active();

bool isa_supported(Isa isa) noexcept;

// A specific table; throws invalid_state when the CPU lacks the ISA.
const KernelTable& table(Isa isa);

namespace detail {
extern const KernelTable scalar_table;
#if defined(VSTAIN_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
} // namespace detail

} // namespace vstain::simd
