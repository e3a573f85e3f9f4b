// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include "leafnet/kernels.hpp"

#include <immintrin.h>

namespace leafnet::kernels::detail {
namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 128;
constexpr int kRows = 6;

// Local helper: std:: templates instantiated here would carry AVX2 encodings
// into weak symbols the linker may pick for other translation units.
inline std::size_t min_size(std::size_t a, std::size_t b) { return a < b ? a : b; }

inline __m256i tail_mask(std::size_t lanes) {
    alignas(32) static const int table[16] = {-1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - min_size(lanes, 8)));
}

// MR rows by 16 columns; `Masked` handles a ragged right edge.
template <int MR, bool Masked>
inline void micro_kernel(std::size_t kc, const float* a, std::size_t lda, const float* b,
                         std::size_t ldb, float* c, std::size_t ldc, bool accumulate, __m256i m0,
                         __m256i m1) {
    __m256 acc0[MR];
    __m256 acc1[MR];
#pragma GCC unroll 6
    for (int r = 0; r < MR; ++r) {
        if (accumulate) {
            acc0[r] = Masked ? _mm256_maskload_ps(c + r * ldc, m0) : _mm256_loadu_ps(c + r * ldc);
            acc1[r] = Masked ? _mm256_maskload_ps(c + r * ldc + 8, m1) : _mm256_loadu_ps(c + r * ldc + 8);
        } else {
            acc0[r] = _mm256_setzero_ps();
            acc1[r] = _mm256_setzero_ps();
        }
    }
    for (std::size_t p = 0; p < kc; ++p) {
        const float* brow = b + p * ldb;
        const __m256 b0 = Masked ? _mm256_maskload_ps(brow, m0) : _mm256_loadu_ps(brow);
        const __m256 b1 = Masked ? _mm256_maskload_ps(brow + 8, m1) : _mm256_loadu_ps(brow + 8);
#pragma GCC unroll 6
        for (int r = 0; r < MR; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
            acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
        }
    }
#pragma GCC unroll 6
    for (int r = 0; r < MR; ++r) {
        if (Masked) {
            _mm256_maskstore_ps(c + r * ldc, m0, acc0[r]);
            _mm256_maskstore_ps(c + r * ldc + 8, m1, acc1[r]);
        } else {
            _mm256_storeu_ps(c + r * ldc, acc0[r]);
            _mm256_storeu_ps(c + r * ldc + 8, acc1[r]);
        }
    }
}

template <bool Masked>
void row_block(int rows, std::size_t kc, const float* a, std::size_t lda, const float* b,
               std::size_t ldb, float* c, std::size_t ldc, bool accumulate, __m256i m0, __m256i m1) {
    switch (rows) {
        case 6: micro_kernel<6, Masked>(kc, a, lda, b, ldb, c, ldc, accumulate, m0, m1); break;
        case 5: micro_kernel<5, Masked>(kc, a, lda, b, ldb, c, ldc, accumulate, m0, m1); break;
        case 4: micro_kernel<4, Masked>(kc, a, lda, b, ldb, c, ldc, accumulate, m0, m1); break;
        case 3: micro_kernel<3, Masked>(kc, a, lda, b, ldb, c, ldc, accumulate, m0, m1); break;
        case 2: micro_kernel<2, Masked>(kc, a, lda, b, ldb, c, ldc, accumulate, m0, m1); break;
        default: micro_kernel<1, Masked>(kc, a, lda, b, ldb, c, ldc, accumulate, m0, m1); break;
    }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (!accumulate) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0f;
            }
        }
        return;
    }
    const __m256i full = _mm256_set1_epi32(-1);
    for (std::size_t pc = 0; pc < k; pc += kBlockK) {
        const std::size_t kc = min_size(kBlockK, k - pc);
        const bool acc = accumulate || pc > 0;
        for (std::size_t jc = 0; jc < n; jc += kBlockN) {
            const std::size_t nc = min_size(kBlockN, n - jc);
            for (std::size_t i = 0; i < m; i += kRows) {
                const int rows = static_cast<int>(min_size(kRows, m - i));
                const float* ablk = a + i * lda + pc;
                for (std::size_t j = jc; j < jc + nc; j += 16) {
                    const std::size_t cols = min_size(16, jc + nc - j);
                    const float* bblk = b + pc * ldb + j;
                    float* cblk = c + i * ldc + j;
                    if (cols == 16) {
                        row_block<false>(rows, kc, ablk, lda, bblk, ldb, cblk, ldc, acc, full, full);
                    } else {
                        const __m256i m0 = tail_mask(cols);
                        const __m256i m1 = tail_mask(cols > 8 ? cols - 8 : 0);
                        row_block<true>(rows, kc, ablk, lda, bblk, ldb, cblk, ldc, acc, m0, m1);
                    }
                }
            }
        }
    }
}

inline float horizontal_sum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_movehdup_ps(lo));
    return _mm_cvtss_f32(lo);
}

// One row of `a` against four rows of `b` at a time.
void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    const std::size_t k8 = k - k % 8;
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        float* crow = c + i * ldc;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + j * ldb;
            const float* b1 = b0 + ldb;
            const float* b2 = b1 + ldb;
            const float* b3 = b2 + ldb;
            __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
            __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
            for (std::size_t p = 0; p < k8; p += 8) {
                const __m256 av = _mm256_loadu_ps(arow + p);
                s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), s0);
                s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), s1);
                s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), s2);
                s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), s3);
            }
            float r0 = horizontal_sum(s0), r1 = horizontal_sum(s1);
            float r2 = horizontal_sum(s2), r3 = horizontal_sum(s3);
            for (std::size_t p = k8; p < k; ++p) {
                r0 += arow[p] * b0[p];
                r1 += arow[p] * b1[p];
                r2 += arow[p] * b2[p];
                r3 += arow[p] * b3[p];
            }
            if (accumulate) {
                crow[j] += r0;
                crow[j + 1] += r1;
                crow[j + 2] += r2;
                crow[j + 3] += r3;
            } else {
                crow[j] = r0;
                crow[j + 1] = r1;
                crow[j + 2] = r2;
                crow[j + 3] = r3;
            }
        }
        for (; j < n; ++j) {
            const float* brow = b + j * ldb;
            __m256 s = _mm256_setzero_ps();
            for (std::size_t p = 0; p < k8; p += 8) {
                s = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), s);
            }
            float r = horizontal_sum(s);
            for (std::size_t p = k8; p < k; ++p) r += arow[p] * brow[p];
            crow[j] = accumulate ? crow[j] + r : r;
        }
    }
}

void relu_avx2(const float* x, float* y, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        // Mask form maps NaN to 0, same as the scalar comparison.
        _mm256_storeu_ps(y + i, _mm256_and_ps(v, _mm256_cmp_ps(v, zero, _CMP_GT_OQ)));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(const float* x, const float* g, float* out, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(out + i, _mm256_and_ps(_mm256_loadu_ps(g + i), mask));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

// Uses separate mul/add (no FMA) so results match the scalar reference bit for bit.
void adam_avx2(float* w, const float* g, float* m, float* v, std::size_t n,
               const AdamCoefficients& c) {
    const __m256 b1 = _mm256_set1_ps(c.beta1);
    const __m256 b2 = _mm256_set1_ps(c.beta2);
    const __m256 omb1 = _mm256_set1_ps(1.0f - c.beta1);
    const __m256 omb2 = _mm256_set1_ps(1.0f - c.beta2);
    const __m256 bc1 = _mm256_set1_ps(c.bias_correction1);
    const __m256 bc2 = _mm256_set1_ps(c.bias_correction2);
    const __m256 lr = _mm256_set1_ps(c.lr);
    const __m256 eps = _mm256_set1_ps(c.eps);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gi = _mm256_loadu_ps(g + i);
        const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, gi));
        const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                        _mm256_mul_ps(omb2, _mm256_mul_ps(gi, gi)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 mhat = _mm256_div_ps(mi, bc1);
        const __m256 vhat = _mm256_div_ps(vi, bc2);
        const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, mhat), _mm256_add_ps(_mm256_sqrt_ps(vhat), eps));
        _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), step));
    }
    if (i < n) scalar_table.adam(w + i, g + i, m + i, v + i, n - i, c);
}

}  // namespace

const KernelTable avx2_table{Isa::avx2, gemm_avx2, gemm_nt_avx2, relu_avx2, relu_backward_avx2, adam_avx2};

}  // namespace leafnet::kernels::detail
