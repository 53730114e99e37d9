#include "vstain/simd/kernels.hpp"

namespace vstain::simd {
namespace {

void gemm_f32(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
              const float* a, int lda, const float* b, int ldb, float beta,
              float* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) {
                const float av = trans_a ? a[p * lda + i] : a[i * lda + p];
                const float bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
                acc += av * bv;
            }
            float& dst = c[i * ldc + j];
            dst = beta == 0.0f ? alpha * acc : alpha * acc + beta * dst;
        }
    }
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

float dot_f32(std::size_t n, const float* x, const float* y) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sq_diff_sum_f64(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

} // namespace

namespace detail {
const KernelTable scalar_table{Isa::scalar, gemm_f32, axpy_f32, axpy_f64, dot_f32, sq_diff_sum_f64};
} // namespace detail

} // namespace vstain::simd
