#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "leafnet/ops.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

enum class Mode { train, eval };

/// Square-kernel, stride-1 convolution over channels-last [H, W, C] input.
template <typename T>
struct BasicConv2D {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    Padding padding = Padding::valid;
    BasicTensor<T> weights;  // [k, k, in, out]
    BasicTensor<T> bias;     // [out]

    BasicConv2D() = default;
    BasicConv2D(std::size_t in, std::size_t out, std::size_t k, Padding pad)
        : in_channels(in), out_channels(out), kernel(k), padding(pad),
          weights(Shape{k, k, in, out}), bias(Shape{out}) {}

    Shape output_shape(const Shape& input) const;
    std::size_t param_count() const noexcept { return out_channels * (kernel * kernel * in_channels + 1); }
};

template <typename T>
struct BasicDense {
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    BasicTensor<T> weights;  // [in, out]
    BasicTensor<T> bias;     // [out]

    BasicDense() = default;
    BasicDense(std::size_t in, std::size_t out)
        : in_features(in), out_features(out), weights(Shape{in, out}), bias(Shape{out}) {}

    std::size_t param_count() const noexcept { return in_features * out_features + out_features; }
};

/// 2x2 window, stride 2, floor semantics on odd extents.
struct MaxPool2D {
    static constexpr std::size_t window = 2;
    static constexpr std::size_t stride = 2;
    Shape output_shape(const Shape& input) const;
    std::size_t param_count() const noexcept { return 0; }
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) at train time.
struct Dropout {
    float rate = 0.0f;
    explicit Dropout(float r = 0.0f);
    std::size_t param_count() const noexcept { return 0; }
};

using Conv2D = BasicConv2D<float>;
using Dense = BasicDense<float>;

template <typename T>
struct ConvGradients {
    BasicTensor<T> grad_x;
    BasicTensor<T> grad_w;
    BasicTensor<T> grad_b;
};

template <typename T>
using DenseGradients = ConvGradients<T>;

/// Flat argmax index into the input for every pooled element.
struct PoolMask {
    Shape input_shape;
    Shape output_shape;
    std::vector<std::uint32_t> argmax;
};

template <typename T>
struct PoolResult {
    BasicTensor<T> output;
    PoolMask mask;
};

template <typename T>
struct DropoutResult {
    BasicTensor<T> output;
    BasicTensor<T> mask;  // 0 or 1/(1-rate) per element; all ones in eval mode
};

template <typename T>
struct LossResult {
    double loss = 0.0;
    BasicTensor<T> grad_logits;
};

// Convolution.
template <typename T>
BasicTensor<T> conv_forward(const BasicConv2D<T>& layer, const BasicTensor<T>& x);
template <typename T>
ConvGradients<T> conv_backward(const BasicConv2D<T>& layer, const BasicTensor<T>& x,
                               const BasicTensor<T>& grad_out);
/// Adds weight/bias gradients into `grad_w`/`grad_b`; writes the input
/// gradient to `grad_x` when it is non-null.
template <typename T>
void conv_backward_accumulate(const BasicConv2D<T>& layer, const BasicTensor<T>& x,
                              const BasicTensor<T>& grad_out, BasicTensor<T>* grad_x,
                              BasicTensor<T>& grad_w, BasicTensor<T>& grad_b);

// Max pooling.
template <typename T>
PoolResult<T> maxpool_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> maxpool_backward(const PoolMask& mask, const BasicTensor<T>& grad_out);

// Dense. `x` is [in] for one sample or [N, in] for a batch.
template <typename T>
BasicTensor<T> dense_forward(const BasicDense<T>& layer, const BasicTensor<T>& x);
template <typename T>
DenseGradients<T> dense_backward(const BasicDense<T>& layer, const BasicTensor<T>& x,
                                 const BasicTensor<T>& grad_out);
template <typename T>
void dense_backward_accumulate(const BasicDense<T>& layer, const BasicTensor<T>& x,
                               const BasicTensor<T>& grad_out, BasicTensor<T>* grad_x,
                               BasicTensor<T>& grad_w, BasicTensor<T>& grad_b);

// ReLU; the subgradient at exactly 0 is 0.
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

template <typename T>
DropoutResult<T> dropout_apply(const Dropout& layer, Mode mode, const BasicTensor<T>& x, SeededRng& rng);
template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& mask, const BasicTensor<T>& grad_out);

/// Row-wise max-subtracted softmax over [N, C].
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// Mean negative log-likelihood over the batch; grad = (softmax - onehot) / N.
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits, std::span<const std::size_t> labels);

/// He-normal weights (std = sqrt(2 / fan_in)) and zero bias.
void he_initialize(Conv2D& layer, SeededRng& rng);
void he_initialize(Dense& layer, SeededRng& rng);

}  // namespace leafnet
