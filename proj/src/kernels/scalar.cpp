#include "leafnet/kernels.hpp"

#include <cmath>

namespace leafnet::kernels::detail {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                 const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    gemm_reference<float>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    gemm_nt_reference<float>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void relu_scalar(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(const float* x, const float* g, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

void adam_scalar(float* w, const float* g, float* m, float* v, std::size_t n,
                 const AdamCoefficients& c) {
    const float one_minus_b1 = 1.0f - c.beta1;
    const float one_minus_b2 = 1.0f - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const float gi = g[i];
        const float mi = c.beta1 * m[i] + one_minus_b1 * gi;
        const float vi = c.beta2 * v[i] + one_minus_b2 * (gi * gi);
        m[i] = mi;
        v[i] = vi;
        const float mhat = mi / c.bias_correction1;
        const float vhat = vi / c.bias_correction2;
        w[i] = w[i] - c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

}  // namespace

const KernelTable scalar_table{Isa::scalar, gemm_scalar, gemm_nt_scalar, relu_scalar, relu_backward_scalar,
                               adam_scalar};

}  // namespace leafnet::kernels::detail
