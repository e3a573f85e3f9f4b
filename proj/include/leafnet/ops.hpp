#pragma once

#include <cstddef>
#include <type_traits>

#include "leafnet/kernels.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

enum class Padding { same, valid };

const char* padding_name(Padding p) noexcept;

/// Spatial bookkeeping shared by im2col, col2im and the convolution layer.
/// Stride is always 1. `same` pads (k-1) zeros split as floor/ceil
/// before/after, so even kernels put the extra row at the bottom/right.
struct ConvGeometry {
    std::size_t in_h = 0, in_w = 0, channels = 0;
    std::size_t kernel = 0;
    Padding padding = Padding::valid;
    std::size_t pad_top = 0, pad_left = 0;
    std::size_t out_h = 0, out_w = 0;

    static ConvGeometry make(const Shape& input_hwc, std::size_t kernel, Padding padding);

    std::size_t patch_size() const noexcept { return kernel * kernel * channels; }
    std::size_t positions() const noexcept { return out_h * out_w; }
};

/// Typed GEMM entry points: float goes through the runtime-selected kernels,
/// double through the scalar reference.
template <typename T>
inline void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                 std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    if constexpr (std::is_same_v<T, float>) {
        kernels::active().gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    } else {
        kernels::gemm_reference<T>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    }
}

template <typename T>
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                    const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    if constexpr (std::is_same_v<T, float>) {
        kernels::active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    } else {
        kernels::gemm_nt_reference<T>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    }
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

/// Raw transpose of a rows x cols row-major block into cols x rows.
template <typename T>
void transpose_into(const T* src, std::size_t rows, std::size_t cols, T* dst);

/// Patch matrix [out_h*out_w, k*k*C]; each row is one receptive field in
/// (ky, kx, c) order, zeros where the window hangs over the padding.
template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input, std::size_t kernel, Padding padding);

/// Adjoint of im2col: sums each patch entry back onto its source pixel and
/// drops entries that fell on padding.
template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& input_shape, std::size_t kernel,
                      Padding padding);

template <typename T>
void im2col_into(const T* input, const ConvGeometry& g, T* cols);

/// Accumulates into `image` (caller zeroes it first when needed).
template <typename T>
void col2im_accumulate(const T* cols, const ConvGeometry& g, T* image);

extern template BasicTensor<float> matmul(const BasicTensor<float>&, const BasicTensor<float>&);
extern template BasicTensor<double> matmul(const BasicTensor<double>&, const BasicTensor<double>&);
extern template BasicTensor<float> transpose(const BasicTensor<float>&);
extern template BasicTensor<double> transpose(const BasicTensor<double>&);
extern template void transpose_into(const float*, std::size_t, std::size_t, float*);
extern template void transpose_into(const double*, std::size_t, std::size_t, double*);
extern template BasicTensor<float> im2col(const BasicTensor<float>&, std::size_t, Padding);
extern template BasicTensor<double> im2col(const BasicTensor<double>&, std::size_t, Padding);
extern template BasicTensor<float> col2im(const BasicTensor<float>&, const Shape&, std::size_t, Padding);
extern template BasicTensor<double> col2im(const BasicTensor<double>&, const Shape&, std::size_t, Padding);
extern template void im2col_into(const float*, const ConvGeometry&, float*);
extern template void im2col_into(const double*, const ConvGeometry&, double*);
extern template void col2im_accumulate(const float*, const ConvGeometry&, float*);
extern template void col2im_accumulate(const double*, const ConvGeometry&, double*);

}  // namespace leafnet
