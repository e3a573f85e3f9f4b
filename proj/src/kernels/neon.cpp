// AArch64 only; NEON is architecturally guaranteed there.

#include "leafnet/kernels.hpp"

#include <arm_neon.h>

namespace leafnet::kernels::detail {
namespace {

constexpr std::size_t kBlockK = 256;

inline std::size_t min_size(std::size_t a, std::size_t b) { return a < b ? a : b; }

// Four rows by eight columns; ragged edges fall back to scalar.
void gemm_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0.0f;
        }
    }
    const std::size_t n8 = n - n % 8;
    const std::size_t m4 = m - m % 4;
    for (std::size_t pc = 0; pc < k; pc += kBlockK) {
        const std::size_t kc = min_size(kBlockK, k - pc);
        for (std::size_t i = 0; i < m4; i += 4) {
            for (std::size_t j = 0; j < n8; j += 8) {
                float32x4_t acc[4][2];
                for (int r = 0; r < 4; ++r) {
                    acc[r][0] = vld1q_f32(c + (i + r) * ldc + j);
                    acc[r][1] = vld1q_f32(c + (i + r) * ldc + j + 4);
                }
                for (std::size_t p = pc; p < pc + kc; ++p) {
                    const float32x4_t b0 = vld1q_f32(b + p * ldb + j);
                    const float32x4_t b1 = vld1q_f32(b + p * ldb + j + 4);
                    for (int r = 0; r < 4; ++r) {
                        const float av = a[(i + r) * lda + p];
                        acc[r][0] = vfmaq_n_f32(acc[r][0], b0, av);
                        acc[r][1] = vfmaq_n_f32(acc[r][1], b1, av);
                    }
                }
                for (int r = 0; r < 4; ++r) {
                    vst1q_f32(c + (i + r) * ldc + j, acc[r][0]);
                    vst1q_f32(c + (i + r) * ldc + j + 4, acc[r][1]);
                }
            }
        }
        // Remaining columns of the blocked rows, then remaining rows.
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j0 = i < m4 ? n8 : 0;
            for (std::size_t p = pc; p < pc + kc; ++p) {
                const float av = a[i * lda + p];
                for (std::size_t j = j0; j < n; ++j) c[i * ldc + j] += av * b[p * ldb + j];
            }
        }
    }
}

void gemm_nt_neon(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    const std::size_t k4 = k - k % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b + j * ldb;
            float32x4_t s = vdupq_n_f32(0.0f);
            for (std::size_t p = 0; p < k4; p += 4) s = vfmaq_f32(s, vld1q_f32(arow + p), vld1q_f32(brow + p));
            float r = vaddvq_f32(s);
            for (std::size_t p = k4; p < k; ++p) r += arow[p] * brow[p];
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + r : r;
        }
    }
}

void relu_neon(const float* x, float* y, std::size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(x + i);
        const uint32x4_t gt = vcgtq_f32(v, zero);
        vst1q_f32(y + i, vreinterpretq_f32_u32(vandq_u32(vreinterpretq_u32_f32(v), gt)));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_neon(const float* x, const float* g, float* out, std::size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const uint32x4_t gt = vcgtq_f32(vld1q_f32(x + i), zero);
        vst1q_f32(out + i, vreinterpretq_f32_u32(vandq_u32(vreinterpretq_u32_f32(vld1q_f32(g + i)), gt)));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

void adam_neon(float* w, const float* g, float* m, float* v, std::size_t n,
               const AdamCoefficients& c) {
    const float32x4_t b1 = vdupq_n_f32(c.beta1);
    const float32x4_t b2 = vdupq_n_f32(c.beta2);
    const float32x4_t omb1 = vdupq_n_f32(1.0f - c.beta1);
    const float32x4_t omb2 = vdupq_n_f32(1.0f - c.beta2);
    const float32x4_t bc1 = vdupq_n_f32(c.bias_correction1);
    const float32x4_t bc2 = vdupq_n_f32(c.bias_correction2);
    const float32x4_t lr = vdupq_n_f32(c.lr);
    const float32x4_t eps = vdupq_n_f32(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t gi = vld1q_f32(g + i);
        const float32x4_t mi = vaddq_f32(vmulq_f32(b1, vld1q_f32(m + i)), vmulq_f32(omb1, gi));
        const float32x4_t vi = vaddq_f32(vmulq_f32(b2, vld1q_f32(v + i)), vmulq_f32(omb2, vmulq_f32(gi, gi)));
        vst1q_f32(m + i, mi);
        vst1q_f32(v + i, vi);
        const float32x4_t mhat = vdivq_f32(mi, bc1);
        const float32x4_t vhat = vdivq_f32(vi, bc2);
        const float32x4_t step = vdivq_f32(vmulq_f32(lr, mhat), vaddq_f32(vsqrtq_f32(vhat), eps));
        vst1q_f32(w + i, vsubq_f32(vld1q_f32(w + i), step));
    }
    if (i < n) scalar_table.adam(w + i, g + i, m + i, v + i, n - i, c);
}

}  // namespace

const KernelTable neon_table{Isa::neon, gemm_neon, gemm_nt_neon, relu_neon, relu_backward_neon, adam_neon};

}  // namespace leafnet::kernels::detail
