#include "leafnet/ops.hpp"

#include <algorithm>
#include <string>

namespace leafnet {

const char* padding_name(Padding p) noexcept { return p == Padding::same ? "same" : "valid"; }

ConvGeometry ConvGeometry::make(const Shape& input_hwc, std::size_t kernel, Padding padding) {
    if (input_hwc.rank() != 3) {
        throw ShapeError("convolution input must be [H, W, C], got " + input_hwc.str());
    }
    if (kernel == 0) throw ShapeError("kernel size must be positive");
    ConvGeometry g;
    g.in_h = input_hwc[0];
    g.in_w = input_hwc[1];
    g.channels = input_hwc[2];
    g.kernel = kernel;
    g.padding = padding;
    if (padding == Padding::same) {
        g.pad_top = (kernel - 1) / 2;
        g.pad_left = (kernel - 1) / 2;
        g.out_h = g.in_h;
        g.out_w = g.in_w;
    } else {
        if (g.in_h < kernel || g.in_w < kernel) {
            throw ShapeError("kernel " + std::to_string(kernel) + "x" + std::to_string(kernel) +
                             " larger than valid-mode input " + input_hwc.str());
        }
        g.out_h = g.in_h - kernel + 1;
        g.out_w = g.in_w - kernel + 1;
    }
    return g;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul shape mismatch: " + a.shape().str() + " x " + b.shape().str());
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    BasicTensor<T> c(Shape{m, n});
    gemm<T>(m, n, k, a.ptr(), k, b.ptr(), n, c.ptr(), n, false);
    return c;
}

template <typename T>
void transpose_into(const T* src, std::size_t rows, std::size_t cols, T* dst) {
    constexpr std::size_t tile = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
        const std::size_t r1 = std::min(rows, r0 + tile);
        for (std::size_t c0 = 0; c0 < cols; c0 += tile) {
            const std::size_t c1 = std::min(cols, c0 + tile);
            for (std::size_t r = r0; r < r1; ++r) {
                for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
            }
        }
    }
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + a.shape().str());
    BasicTensor<T> out(Shape{a.dim(1), a.dim(0)});
    transpose_into(a.ptr(), a.dim(0), a.dim(1), out.ptr());
    return out;
}

template <typename T>
void im2col_into(const T* input, const ConvGeometry& g, T* cols) {
    const std::size_t k = g.kernel, c = g.channels;
    const std::size_t row_len = g.patch_size();
    const std::size_t span = k * c;  // one kernel row of a patch
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            T* row = cols + (oy * g.out_w + ox) * row_len;
            for (std::size_t ky = 0; ky < k; ++ky) {
                T* dst = row + ky * span;
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) {
                    std::fill_n(dst, span, T(0));
                    continue;
                }
                const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>(ox) - static_cast<std::ptrdiff_t>(g.pad_left);
                const T* src_row = input + static_cast<std::size_t>(iy) * g.in_w * c;
                if (ix0 >= 0 && ix0 + static_cast<std::ptrdiff_t>(k) <= static_cast<std::ptrdiff_t>(g.in_w)) {
                    std::copy_n(src_row + static_cast<std::size_t>(ix0) * c, span, dst);
                    continue;
                }
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t ix = ix0 + static_cast<std::ptrdiff_t>(kx);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        std::fill_n(dst + kx * c, c, T(0));
                    } else {
                        std::copy_n(src_row + static_cast<std::size_t>(ix) * c, c, dst + kx * c);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_accumulate(const T* cols, const ConvGeometry& g, T* image) {
    const std::size_t k = g.kernel, c = g.channels;
    const std::size_t row_len = g.patch_size();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const T* row = cols + (oy * g.out_w + ox) * row_len;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const T* src = row + (ky * k + kx) * c;
                    T* dst = image + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                }
            }
        }
    }
}

template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& input, std::size_t kernel, Padding padding) {
    const ConvGeometry g = ConvGeometry::make(input.shape(), kernel, padding);
    BasicTensor<T> cols(Shape{g.positions(), g.patch_size()});
    im2col_into(input.ptr(), g, cols.ptr());
    return cols;
}

template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& input_shape, std::size_t kernel,
                      Padding padding) {
    const ConvGeometry g = ConvGeometry::make(input_shape, kernel, padding);
    if (cols.rank() != 2 || cols.dim(0) != g.positions() || cols.dim(1) != g.patch_size()) {
        throw ShapeError("col2im: columns " + cols.shape().str() + " inconsistent with input " +
                         input_shape.str() + ", kernel " + std::to_string(kernel) + ", padding " +
                         padding_name(padding));
    }
    BasicTensor<T> image(input_shape);
    col2im_accumulate(cols.ptr(), g, image.ptr());
    return image;
}

template BasicTensor<float> matmul(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> matmul(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> transpose(const BasicTensor<float>&);
template BasicTensor<double> transpose(const BasicTensor<double>&);
template void transpose_into(const float*, std::size_t, std::size_t, float*);
template void transpose_into(const double*, std::size_t, std::size_t, double*);
template BasicTensor<float> im2col(const BasicTensor<float>&, std::size_t, Padding);
template BasicTensor<double> im2col(const BasicTensor<double>&, std::size_t, Padding);
template BasicTensor<float> col2im(const BasicTensor<float>&, const Shape&, std::size_t, Padding);
template BasicTensor<double> col2im(const BasicTensor<double>&, const Shape&, std::size_t, Padding);
template void im2col_into(const float*, const ConvGeometry&, float*);
template void im2col_into(const double*, const ConvGeometry&, double*);
template void col2im_accumulate(const float*, const ConvGeometry&, float*);
template void col2im_accumulate(const double*, const ConvGeometry&, double*);

}  // namespace leafnet
