#include "vstain/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <vector>

namespace vstain::simd {
namespace {

constexpr int kMr = 6;
constexpr int kNr = 16;
constexpr int kKc = 256;

inline float load_a(bool trans, const float* a, int lda, int i, int p) {
    return trans ? a[p * lda + i] : a[i * lda + p];
}

inline float load_b(bool trans, const float* b, int ldb, int p, int j) {
    return trans ? b[j * ldb + p] : b[p * ldb + j];
}

void pack_a(bool trans, const float* a, int lda, int m, int pc, int kc, float* dst) {
    for (int ir = 0; ir < m; ir += kMr) {
        const int rows = std::min(kMr, m - ir);
        for (int p = 0; p < kc; ++p) {
            for (int r = 0; r < kMr; ++r)
                dst[p * kMr + r] = r < rows ? load_a(trans, a, lda, ir + r, pc + p) : 0.0f;
        }
        dst += kMr * kc;
    }
}

void pack_b(bool trans, const float* b, int ldb, int n, int pc, int kc, float* dst) {
    for (int jr = 0; jr < n; jr += kNr) {
        const int cols = std::min(kNr, n - jr);
        if (!trans && cols == kNr) {
            for (int p = 0; p < kc; ++p) {
                const float* src = b + (pc + p) * ldb + jr;
                _mm256_storeu_ps(dst + p * kNr, _mm256_loadu_ps(src));
                _mm256_storeu_ps(dst + p * kNr + 8, _mm256_loadu_ps(src + 8));
            }
        } else {
            for (int p = 0; p < kc; ++p) {
                for (int j = 0; j < kNr; ++j)
                    dst[p * kNr + j] = j < cols ? load_b(trans, b, ldb, pc + p, jr + j) : 0.0f;
            }
        }
        dst += kNr * kc;
    }
}

// acc[6][16] = Ap(6 x kc) * Bp(kc x 16)
inline void micro_kernel(int kc, const float* ap, const float* bp, float* out) {
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
    __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
    __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();
    for (int p = 0; p < kc; ++p) {
        const __m256 b0 = _mm256_loadu_ps(bp);
        const __m256 b1 = _mm256_loadu_ps(bp + 8);
        __m256 a = _mm256_broadcast_ss(ap + 0);
        c00 = _mm256_fmadd_ps(a, b0, c00);
        c01 = _mm256_fmadd_ps(a, b1, c01);
        a = _mm256_broadcast_ss(ap + 1);
        c10 = _mm256_fmadd_ps(a, b0, c10);
        c11 = _mm256_fmadd_ps(a, b1, c11);
        a = _mm256_broadcast_ss(ap + 2);
        c20 = _mm256_fmadd_ps(a, b0, c20);
        c21 = _mm256_fmadd_ps(a, b1, c21);
        a = _mm256_broadcast_ss(ap + 3);
        c30 = _mm256_fmadd_ps(a, b0, c30);
        c31 = _mm256_fmadd_ps(a, b1, c31);
        a = _mm256_broadcast_ss(ap + 4);
        c40 = _mm256_fmadd_ps(a, b0, c40);
        c41 = _mm256_fmadd_ps(a, b1, c41);
        a = _mm256_broadcast_ss(ap + 5);
        c50 = _mm256_fmadd_ps(a, b0, c50);
        c51 = _mm256_fmadd_ps(a, b1, c51);
        ap += kMr;
        bp += kNr;
    }
    _mm256_storeu_ps(out + 0 * kNr, c00);
    _mm256_storeu_ps(out + 0 * kNr + 8, c01);
    _mm256_storeu_ps(out + 1 * kNr, c10);
    _mm256_storeu_ps(out + 1 * kNr + 8, c11);
    _mm256_storeu_ps(out + 2 * kNr, c20);
    _mm256_storeu_ps(out + 2 * kNr + 8, c21);
    _mm256_storeu_ps(out + 3 * kNr, c30);
    _mm256_storeu_ps(out + 3 * kNr + 8, c31);
    _mm256_storeu_ps(out + 4 * kNr, c40);
    _mm256_storeu_ps(out + 4 * kNr + 8, c41);
    _mm256_storeu_ps(out + 5 * kNr, c50);
    _mm256_storeu_ps(out + 5 * kNr + 8, c51);
}

void gemm_f32(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
              const float* a, int lda, const float* b, int ldb, float beta,
              float* c, int ldc) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) c[i * ldc + j] = beta == 0.0f ? 0.0f : beta * c[i * ldc + j];
        return;
    }

    thread_local std::vector<float> a_buf, b_buf;
    const int m_panels = (m + kMr - 1) / kMr;
    const int n_panels = (n + kNr - 1) / kNr;
    a_buf.resize(static_cast<std::size_t>(m_panels) * kMr * kKc);
    b_buf.resize(static_cast<std::size_t>(n_panels) * kNr * kKc);

    alignas(32) float tile[kMr * kNr];
    const __m256 valpha = _mm256_set1_ps(alpha);

    for (int pc = 0; pc < k; pc += kKc) {
        const int kc = std::min(kKc, k - pc);
        const bool first = pc == 0;
        const float eff_beta = first ? beta : 1.0f;
        const __m256 vbeta = _mm256_set1_ps(eff_beta);
        pack_a(trans_a, a, lda, m, pc, kc, a_buf.data());
        pack_b(trans_b, b, ldb, n, pc, kc, b_buf.data());

        for (int jp = 0; jp < n_panels; ++jp) {
            const int j0 = jp * kNr;
            const int cols = std::min(kNr, n - j0);
            const float* bp = b_buf.data() + static_cast<std::size_t>(jp) * kNr * kc;
            for (int ip = 0; ip < m_panels; ++ip) {
                const int i0 = ip * kMr;
                const int rows = std::min(kMr, m - i0);
                const float* ap = a_buf.data() + static_cast<std::size_t>(ip) * kMr * kc;
                micro_kernel(kc, ap, bp, tile);
                if (rows == kMr && cols == kNr) {
                    for (int r = 0; r < kMr; ++r) {
                        float* dst = c + (i0 + r) * ldc + j0;
                        __m256 t0 = _mm256_mul_ps(valpha, _mm256_load_ps(tile + r * kNr));
                        __m256 t1 = _mm256_mul_ps(valpha, _mm256_load_ps(tile + r * kNr + 8));
                        if (eff_beta != 0.0f) {
                            t0 = _mm256_fmadd_ps(vbeta, _mm256_loadu_ps(dst), t0);
                            t1 = _mm256_fmadd_ps(vbeta, _mm256_loadu_ps(dst + 8), t1);
                        }
                        _mm256_storeu_ps(dst, t0);
                        _mm256_storeu_ps(dst + 8, t1);
                    }
                } else {
                    for (int r = 0; r < rows; ++r) {
                        float* dst = c + (i0 + r) * ldc + j0;
                        for (int j = 0; j < cols; ++j) {
                            const float v = alpha * tile[r * kNr + j];
                            dst[j] = eff_beta == 0.0f ? v : v + eff_beta * dst[j];
                        }
                    }
                }
            }
        }
    }
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, lo);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

float dot_f32(std::size_t n, const float* x, const float* y) {
    __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    float acc = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sq_diff_sum_f64(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

} // namespace

namespace detail {
const KernelTable avx2_table{Isa::avx2, gemm_f32, axpy_f32, axpy_f64, dot_f32, sq_diff_sum_f64};
} // namespace detail

} // namespace vstain::simd
