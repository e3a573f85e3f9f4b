#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference and, where the
// target supports it, a SIMD variant; the variant is chosen once at startup.

#include <cstddef>
#include <string_view>
#include <vector>

namespace leafnet::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

struct AdamCoefficients {
    float lr;
    float beta1;
    float beta2;
    float eps;
    float bias_correction1;  // 1 - beta1^t
    float bias_correction2;  // 1 - beta2^t
};

/// Function table for one instruction set. All matrices are row-major with an
/// explicit leading dimension.
struct KernelTable {
    Isa isa;
    /// c[m,n] = a[m,k] * b[k,n], or c += a*b when `accumulate`.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                 const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
    /// c[m,n] = a[m,k] * transpose(b[n,k]), or c += ... when `accumulate`.
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
    void (*relu)(const float* x, float* y, std::size_t n);
    /// out = g where x > 0, else 0.
    void (*relu_backward)(const float* x, const float* g, float* out, std::size_t n);
    /// In-place Adam update over n parameters.
    void (*adam)(float* w, const float* g, float* m, float* v, std::size_t n,
                 const AdamCoefficients& coef);
};

/// Table for the best ISA this CPU supports, unless LEAFNET_ISA names another
/// (supported) one. Resolved once per process.
const KernelTable& active();

/// Table for a specific ISA. Throws std::runtime_error if it is not available
/// on this machine or not compiled in.
const KernelTable& table(Isa isa);

std::vector<Isa> available_isas();

/// Reference GEMM used by the scalar table and by the 64-bit code paths.
template <typename T>
void gemm_reference(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                    const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        if (!accumulate) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        }
        const T* arow = a + i * lda;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_nt_reference(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                       const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * lda;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * ldb;
            T sum = T(0);
            for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + sum : sum;
        }
    }
}

namespace detail {
extern const KernelTable scalar_table;
#if defined(LEAFNET_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(LEAFNET_HAVE_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace leafnet::kernels
