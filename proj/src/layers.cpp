#include "leafnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

namespace leafnet {

template <typename T>
Shape BasicConv2D<T>::output_shape(const Shape& input) const {
    if (input.rank() != 3 || input[2] != in_channels) {
        throw ShapeError("conv expects [H, W, " + std::to_string(in_channels) + "], got " + input.str());
    }
    const ConvGeometry g = ConvGeometry::make(input, kernel, padding);
    return Shape{g.out_h, g.out_w, out_channels};
}

Shape MaxPool2D::output_shape(const Shape& input) const {
    if (input.rank() != 3) throw ShapeError("maxpool expects [H, W, C], got " + input.str());
    if (input[0] < window || input[1] < window) {
        throw ShapeError("maxpool needs spatial extent >= 2, got " + input.str());
    }
    return Shape{input[0] / stride, input[1] / stride, input[2]};
}

Dropout::Dropout(float r) : rate(r) {
    if (!(r >= 0.0f && r < 1.0f)) {
        throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(r));
    }
}

template <typename T>
BasicTensor<T> conv_forward(const BasicConv2D<T>& layer, const BasicTensor<T>& x) {
    const Shape out_shape = layer.output_shape(x.shape());
    const ConvGeometry g = ConvGeometry::make(x.shape(), layer.kernel, layer.padding);
    const std::size_t rows = g.positions(), k = g.patch_size(), n = layer.out_channels;

    BasicTensor<T> out(out_shape);
    T* y = out.ptr();
    if (layer.kernel == 1 && layer.padding == Padding::valid) {
        gemm<T>(rows, n, k, x.ptr(), k, layer.weights.ptr(), n, y, n, false);
    } else {
        std::vector<T> cols(rows * k);
        im2col_into(x.ptr(), g, cols.data());
        gemm<T>(rows, n, k, cols.data(), k, layer.weights.ptr(), n, y, n, false);
    }
    const T* b = layer.bias.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
        T* yr = y + r * n;
        for (std::size_t o = 0; o < n; ++o) yr[o] += b[o];
    }
    return out;
}

template <typename T>
void conv_backward_accumulate(const BasicConv2D<T>& layer, const BasicTensor<T>& x,
                              const BasicTensor<T>& grad_out, BasicTensor<T>* grad_x,
                              BasicTensor<T>& grad_w, BasicTensor<T>& grad_b) {
    const Shape out_shape = layer.output_shape(x.shape());
    if (grad_out.shape() != out_shape) {
        throw ShapeError("conv backward: grad_out " + grad_out.shape().str() + " but forward output is " +
                         out_shape.str());
    }
    if (grad_w.shape() != layer.weights.shape() || grad_b.shape() != layer.bias.shape()) {
        throw ShapeError("conv backward: gradient buffers do not match layer parameters");
    }
    const ConvGeometry g = ConvGeometry::make(x.shape(), layer.kernel, layer.padding);
    const std::size_t rows = g.positions(), k = g.patch_size(), n = layer.out_channels;
    const T* go = grad_out.ptr();

    T* gb = grad_b.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
        const T* gr = go + r * n;
        for (std::size_t o = 0; o < n; ++o) gb[o] += gr[o];
    }

    // grad_w[k, n] += cols^T [k, rows] * grad_out [rows, n]
    std::vector<T> cols(rows * k);
    im2col_into(x.ptr(), g, cols.data());
    std::vector<T> cols_t(rows * k);
    transpose_into(cols.data(), rows, k, cols_t.data());
    gemm<T>(k, n, rows, cols_t.data(), rows, go, n, grad_w.ptr(), n, true);

    if (grad_x) {
        // grad_cols [rows, k] = grad_out [rows, n] * W^T [n, k]
        std::vector<T> w_t(k * n);
        transpose_into(layer.weights.ptr(), k, n, w_t.data());
        gemm<T>(rows, k, n, go, n, w_t.data(), k, cols.data(), k, false);
        *grad_x = BasicTensor<T>(x.shape());
        col2im_accumulate(cols.data(), g, grad_x->ptr());
    }
}

template <typename T>
ConvGradients<T> conv_backward(const BasicConv2D<T>& layer, const BasicTensor<T>& x,
                               const BasicTensor<T>& grad_out) {
    ConvGradients<T> grads{BasicTensor<T>(), BasicTensor<T>(layer.weights.shape()),
                           BasicTensor<T>(layer.bias.shape())};
    conv_backward_accumulate(layer, x, grad_out, &grads.grad_x, grads.grad_w, grads.grad_b);
    return grads;
}

template <typename T>
PoolResult<T> maxpool_forward(const BasicTensor<T>& x) {
    const Shape out_shape = MaxPool2D{}.output_shape(x.shape());
    const std::size_t w = x.dim(1), c = x.dim(2);
    const std::size_t oh = out_shape[0], ow = out_shape[1];
    PoolResult<T> result{BasicTensor<T>(out_shape), PoolMask{x.shape(), out_shape, {}}};
    result.mask.argmax.resize(out_shape.numel());
    const T* in = x.ptr();
    T* out = result.output.ptr();
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                std::size_t best = ((2 * oy) * w + 2 * ox) * c + ch;
                T best_val = in[best];
                // Row-major window order; strict comparison keeps the first maximum.
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if (in[idx] > best_val) {
                            best_val = in[idx];
                            best = idx;
                        }
                    }
                }
                const std::size_t o = (oy * ow + ox) * c + ch;
                out[o] = best_val;
                result.mask.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return result;
}

template <typename T>
BasicTensor<T> maxpool_backward(const PoolMask& mask, const BasicTensor<T>& grad_out) {
    if (grad_out.shape() != mask.output_shape || mask.argmax.size() != grad_out.size()) {
        throw ShapeError("maxpool backward: grad_out " + grad_out.shape().str() + " but mask expects " +
                         mask.output_shape.str());
    }
    BasicTensor<T> grad_x(mask.input_shape);
    T* gx = grad_x.ptr();
    const T* g = grad_out.ptr();
    for (std::size_t i = 0; i < grad_out.size(); ++i) gx[mask.argmax[i]] += g[i];
    return grad_x;
}

namespace {

template <typename T>
std::size_t dense_rows(const BasicDense<T>& layer, const Shape& x) {
    if (x.rank() == 1 && x[0] == layer.in_features) return 1;
    if (x.rank() == 2 && x[1] == layer.in_features) return x[0];
    throw ShapeError("dense expects [" + std::to_string(layer.in_features) + "] or [N, " +
                     std::to_string(layer.in_features) + "], got " + x.str());
}

Shape with_last(const Shape& x, std::size_t last) {
    return x.rank() == 1 ? Shape{last} : Shape{x[0], last};
}

}  // namespace

template <typename T>
BasicTensor<T> dense_forward(const BasicDense<T>& layer, const BasicTensor<T>& x) {
    const std::size_t rows = dense_rows(layer, x.shape());
    const std::size_t n = layer.out_features;
    BasicTensor<T> out(with_last(x.shape(), n));
    gemm<T>(rows, n, layer.in_features, x.ptr(), layer.in_features, layer.weights.ptr(), n, out.ptr(), n, false);
    const T* b = layer.bias.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
        T* yr = out.ptr() + r * n;
        for (std::size_t o = 0; o < n; ++o) yr[o] += b[o];
    }
    return out;
}

template <typename T>
void dense_backward_accumulate(const BasicDense<T>& layer, const BasicTensor<T>& x,
                               const BasicTensor<T>& grad_out, BasicTensor<T>* grad_x,
                               BasicTensor<T>& grad_w, BasicTensor<T>& grad_b) {
    const std::size_t rows = dense_rows(layer, x.shape());
    const std::size_t in = layer.in_features, n = layer.out_features;
    if (grad_out.shape() != with_last(x.shape(), n)) {
        throw ShapeError("dense backward: grad_out " + grad_out.shape().str() + " does not match output " +
                         with_last(x.shape(), n).str());
    }
    if (grad_w.shape() != layer.weights.shape() || grad_b.shape() != layer.bias.shape()) {
        throw ShapeError("dense backward: gradient buffers do not match layer parameters");
    }
    const T* g = grad_out.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < n; ++o) grad_b[o] += g[r * n + o];
    }
    // grad_w [in, n] += x^T [in, rows] * g [rows, n]
    if (rows == 1) {
        gemm<T>(in, n, 1, x.ptr(), 1, g, n, grad_w.ptr(), n, true);
    } else {
        std::vector<T> x_t(rows * in);
        transpose_into(x.ptr(), rows, in, x_t.data());
        gemm<T>(in, n, rows, x_t.data(), rows, g, n, grad_w.ptr(), n, true);
    }
    if (grad_x) {
        *grad_x = BasicTensor<T>(x.shape());
        gemm_nt<T>(rows, in, n, g, n, layer.weights.ptr(), n, grad_x->ptr(), in, false);
    }
}

template <typename T>
DenseGradients<T> dense_backward(const BasicDense<T>& layer, const BasicTensor<T>& x,
                                 const BasicTensor<T>& grad_out) {
    DenseGradients<T> grads{BasicTensor<T>(), BasicTensor<T>(layer.weights.shape()),
                            BasicTensor<T>(layer.bias.shape())};
    dense_backward_accumulate(layer, x, grad_out, &grads.grad_x, grads.grad_w, grads.grad_b);
    return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    BasicTensor<T> y(x.shape());
    if constexpr (std::is_same_v<T, float>) {
        kernels::active().relu(x.ptr(), y.ptr(), x.size());
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    }
    return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
    if (x.shape() != grad_out.shape()) {
        throw ShapeError("relu backward: " + x.shape().str() + " vs " + grad_out.shape().str());
    }
    BasicTensor<T> gx(x.shape());
    if constexpr (std::is_same_v<T, float>) {
        kernels::active().relu_backward(x.ptr(), grad_out.ptr(), gx.ptr(), x.size());
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T(0) ? grad_out[i] : T(0);
    }
    return gx;
}

template <typename T>
DropoutResult<T> dropout_apply(const Dropout& layer, Mode mode, const BasicTensor<T>& x, SeededRng& rng) {
    if (!(layer.rate >= 0.0f && layer.rate < 1.0f)) {
        throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(layer.rate));
    }
    DropoutResult<T> result{x, BasicTensor<T>(x.shape(), T(1))};
    if (mode == Mode::eval || layer.rate == 0.0f) return result;
    const T scale = T(1) / (T(1) - static_cast<T>(layer.rate));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool drop = rng.bernoulli(layer.rate);
        result.mask[i] = drop ? T(0) : scale;
        result.output[i] = drop ? T(0) : x[i] * scale;
    }
    return result;
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& mask, const BasicTensor<T>& grad_out) {
    if (mask.shape() != grad_out.shape()) {
        throw ShapeError("dropout backward: mask " + mask.shape().str() + " vs grad " + grad_out.shape().str());
    }
    BasicTensor<T> gx(grad_out.shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = grad_out[i] * mask[i];
    return gx;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax expects [N, C], got " + logits.shape().str());
    const std::size_t rows = logits.dim(0), cls = logits.dim(1);
    BasicTensor<T> probs(logits.shape());
    std::vector<double> e(cls);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* l = logits.ptr() + r * cls;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cls; ++c) mx = std::max(mx, static_cast<double>(l[c]));
        double sum = 0.0;
        for (std::size_t c = 0; c < cls; ++c) {
            e[c] = std::exp(static_cast<double>(l[c]) - mx);
            sum += e[c];
        }
        for (std::size_t c = 0; c < cls; ++c) probs[r * cls + c] = static_cast<T>(e[c] / sum);
    }
    return probs;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const std::size_t> labels) {
    if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy expects [N, C], got " + logits.shape().str());
    const std::size_t rows = logits.dim(0), cls = logits.dim(1);
    if (labels.size() != rows) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
    }
    for (std::size_t label : labels) {
        if (label >= cls) {
            throw ArgumentError("label " + std::to_string(label) + " out of range [0, " + std::to_string(cls) + ")");
        }
    }
    LossResult<T> result{0.0, BasicTensor<T>(logits.shape())};
    std::vector<double> e(cls);
    const double inv_n = 1.0 / static_cast<double>(rows);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* l = logits.ptr() + r * cls;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cls; ++c) mx = std::max(mx, static_cast<double>(l[c]));
        double sum = 0.0;
        for (std::size_t c = 0; c < cls; ++c) {
            e[c] = std::exp(static_cast<double>(l[c]) - mx);
            sum += e[c];
        }
        const double log_sum = std::log(sum);
        total += log_sum - (static_cast<double>(l[labels[r]]) - mx);
        for (std::size_t c = 0; c < cls; ++c) {
            const double p = e[c] / sum - (c == labels[r] ? 1.0 : 0.0);
            result.grad_logits[r * cls + c] = static_cast<T>(p * inv_n);
        }
    }
    result.loss = total * inv_n;
    return result;
}

void he_initialize(Conv2D& layer, SeededRng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(layer.kernel * layer.kernel * layer.in_channels));
    for (auto& w : layer.weights.data()) w = static_cast<float>(rng.normal() * stddev);
    layer.bias.fill(0.0f);
}

void he_initialize(Dense& layer, SeededRng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(layer.in_features));
    for (auto& w : layer.weights.data()) w = static_cast<float>(rng.normal() * stddev);
    layer.bias.fill(0.0f);
}

#define LEAFNET_INSTANTIATE_LAYERS(T)                                                                      \
    template struct BasicConv2D<T>;                                                                        \
    template BasicTensor<T> conv_forward(const BasicConv2D<T>&, const BasicTensor<T>&);                    \
    template ConvGradients<T> conv_backward(const BasicConv2D<T>&, const BasicTensor<T>&,                  \
                                            const BasicTensor<T>&);                                        \
    template void conv_backward_accumulate(const BasicConv2D<T>&, const BasicTensor<T>&,                   \
                                           const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>&,        \
                                           BasicTensor<T>&);                                               \
    template PoolResult<T> maxpool_forward(const BasicTensor<T>&);                                         \
    template BasicTensor<T> maxpool_backward(const PoolMask&, const BasicTensor<T>&);                      \
    template BasicTensor<T> dense_forward(const BasicDense<T>&, const BasicTensor<T>&);                    \
    template DenseGradients<T> dense_backward(const BasicDense<T>&, const BasicTensor<T>&,                 \
                                              const BasicTensor<T>&);                                      \
    template void dense_backward_accumulate(const BasicDense<T>&, const BasicTensor<T>&,                   \
                                            const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>&,       \
                                            BasicTensor<T>&);                                              \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template DropoutResult<T> dropout_apply(const Dropout&, Mode, const BasicTensor<T>&, SeededRng&);      \
    template BasicTensor<T> dropout_backward(const BasicTensor<T>&, const BasicTensor<T>&);                \
    template BasicTensor<T> softmax(const BasicTensor<T>&);                                                \
    template LossResult<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const std::size_t>);

LEAFNET_INSTANTIATE_LAYERS(float)
LEAFNET_INSTANTIATE_LAYERS(double)

#undef LEAFNET_INSTANTIATE_LAYERS

}  // namespace leafnet
