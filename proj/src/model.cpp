#include "leafnet/model.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace leafnet {

const char* layer_kind_name(LayerKind kind) noexcept {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, Padding padding) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.units = out_channels;
    s.kernel = kernel;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool() {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    return s;
}

LayerSpec LayerSpec::dropout(float rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.rate = Dropout(rate).rate;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::dense(std::size_t out_features) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = out_features;
    return s;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
}

Shape LayerSpec::output_shape(const Shape& input) const {
    switch (kind) {
        case LayerKind::conv: {
            if (units == 0 || kernel == 0) throw ShapeError("conv needs positive channels and kernel");
            if (input.rank() != 3) throw ShapeError("conv expects [H, W, C], got " + input.str());
            const ConvGeometry g = ConvGeometry::make(input, kernel, padding);
            return Shape{g.out_h, g.out_w, units};
        }
        case LayerKind::maxpool:
            return MaxPool2D{}.output_shape(input);
        case LayerKind::flatten:
            return Shape{input.numel()};
        case LayerKind::dense:
            if (units == 0) throw ShapeError("dense needs positive output features");
            if (input.rank() != 1) throw ShapeError("dense expects a flat input, got " + input.str());
            return Shape{units};
        case LayerKind::relu:
        case LayerKind::dropout:
        case LayerKind::softmax:
            return input;
    }
    throw ShapeError("unknown layer kind");
}

std::size_t Layer::param_count() const noexcept {
    switch (spec.kind) {
        case LayerKind::conv: return conv.param_count();
        case LayerKind::dense: return dense.param_count();
        default: return 0;
    }
}

namespace {

const char* default_base_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv2d";
        case LayerKind::relu: return "re_lu";
        case LayerKind::maxpool: return "max_pooling2d";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "layer";
}

}  // namespace

Network::Network(Shape input_shape, std::vector<LayerSpec> specs) : input_shape_(std::move(input_shape)) {
    if (input_shape_.rank() != 3) throw ShapeError("network input must be [H, W, C], got " + input_shape_.str());
    if (specs.size() < 2 || specs.back().kind != LayerKind::softmax ||
        specs[specs.size() - 2].kind != LayerKind::dense) {
        throw ShapeError("network must end with dense -> softmax");
    }
    std::map<std::string, std::size_t> counters;
    Shape shape = input_shape_;
    layers_.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        LayerSpec& spec = specs[i];
        if (spec.kind == LayerKind::softmax && i + 1 != specs.size()) {
            throw ShapeError("softmax may only appear as the final layer");
        }
        if (spec.name.empty()) {
            const std::string base = default_base_name(spec.kind);
            const std::size_t n = counters[base]++;
            spec.name = n == 0 ? base : base + "_" + std::to_string(n);
        }
        Layer layer;
        layer.input_shape = shape;
        try {
            layer.output_shape = spec.output_shape(shape);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + spec.name + "): " + e.what());
        }
        if (spec.kind == LayerKind::conv) {
            layer.conv = Conv2D(shape[2], spec.units, spec.kernel, spec.padding);
        } else if (spec.kind == LayerKind::dense) {
            layer.dense = Dense(shape[0], spec.units);
        }
        layer.spec = std::move(spec);
        shape = layer.output_shape;
        layers_.push_back(std::move(layer));
    }
    class_count_ = layers_[layers_.size() - 2].spec.units;
}

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
}

std::size_t Network::param_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
        if (l.spec.kind == LayerKind::conv) {
            out.push_back(&l.conv.weights);
            out.push_back(&l.conv.bias);
        } else if (l.spec.kind == LayerKind::dense) {
            out.push_back(&l.dense.weights);
            out.push_back(&l.dense.bias);
        }
    }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (Tensor* t : const_cast<Network*>(this)->parameters()) out.push_back(t);
    return out;
}

void Network::initialize(SeededRng& rng) {
    for (auto& l : layers_) {
        if (l.spec.kind == LayerKind::conv) he_initialize(l.conv, rng);
        if (l.spec.kind == LayerKind::dense) he_initialize(l.dense, rng);
    }
}

Network Network::without_dropout() const {
    std::vector<LayerSpec> kept;
    for (const auto& l : layers_) {
        if (l.spec.kind != LayerKind::dropout) kept.push_back(l.spec);
    }
    Network out(input_shape_, std::move(kept));
    auto dst = out.parameters();
    const auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = *src[i];
    return out;
}

Network build_block_network(const Shape& input_shape, std::span<const BlockSpec> blocks,
                            std::size_t hidden_units, std::size_t class_count, float dropout_conv,
                            float dropout_dense) {
    std::vector<LayerSpec> specs;
    for (const BlockSpec& b : blocks) {
        specs.push_back(LayerSpec::conv(b.width, b.kernel, Padding::same));
        specs.push_back(LayerSpec::relu());
        specs.push_back(LayerSpec::conv(b.width, b.kernel, Padding::valid));
        specs.push_back(LayerSpec::relu());
        specs.push_back(LayerSpec::maxpool());
    }
    specs.push_back(LayerSpec::dropout(dropout_conv));
    specs.push_back(LayerSpec::flatten());
    specs.push_back(LayerSpec::dense(hidden_units));
    specs.push_back(LayerSpec::relu());
    specs.push_back(LayerSpec::dropout(dropout_dense));
    specs.push_back(LayerSpec::dense(class_count));
    specs.push_back(LayerSpec::softmax());
    return Network(input_shape, std::move(specs));
}

Network build_paper_network(SeededRng* rng, float dropout_conv, float dropout_dense) {
    // Kernel sizes follow from the parameter counts: out * (k*k*in + 1).
    static constexpr BlockSpec blocks[] = {{32, 3}, {64, 3}, {128, 3}, {256, 3}, {512, 5}};
    Network net = build_block_network(Shape{256, 256, 3}, blocks, 1536, kClassCount, dropout_conv, dropout_dense);
    // The published summary capitalizes the output layer's name.
    std::vector<LayerSpec> specs = net.specs();
    specs[specs.size() - 2].name = "Dense_1";
    net = Network(net.input_shape(), std::move(specs));
    if (rng) net.initialize(*rng);
    return net;
}

Network build_desk_network(SeededRng* rng, std::size_t class_count, float dropout_conv, float dropout_dense) {
    static constexpr BlockSpec blocks[] = {{8, 3}, {16, 3}, {32, 3}, {64, 3}};
    Network net = build_block_network(Shape{64, 64, 3}, blocks, 384, class_count, dropout_conv, dropout_dense);
    if (rng) net.initialize(*rng);
    return net;
}

Summary summarize(const Network& net) {
    Summary s;
    for (const auto& l : net.layers()) {
        if (l.spec.kind == LayerKind::relu || l.spec.kind == LayerKind::softmax) continue;
        s.rows.push_back({l.spec.name, l.output_shape, l.param_count()});
        s.total += l.param_count();
    }
    s.trainable = s.total;
    s.non_trainable = 0;
    return s;
}

std::string format_summary(const Summary& summary) {
    std::ostringstream os;
    os << std::left << std::setw(20) << "Layer" << std::setw(20) << "Output" << "Params\n";
    for (const auto& r : summary.rows) {
        os << std::setw(20) << r.name << std::setw(20) << r.output_shape.str() << r.params << '\n';
    }
    os << "Total params: " << summary.total << '\n'
       << "Trainable params: " << summary.trainable << '\n'
       << "Non-trainable params: " << summary.non_trainable << '\n';
    return os.str();
}

// ---------------------------------------------------------------- execution

Tensor forward_sample(const Network& net, const Tensor& sample, Mode mode, SeededRng& rng, SampleTrace* trace) {
    if (sample.shape() != net.input_shape()) {
        throw ShapeError("network expects input " + net.input_shape().str() + ", got " + sample.shape().str());
    }
    const auto layers = net.layers();
    const std::size_t n = layers.size() - 1;  // softmax is applied by the caller
    if (trace) {
        trace->inputs.assign(n, Tensor());
        trace->pool_masks.assign(n, PoolMask());
        trace->dropout_masks.assign(n, Tensor());
    }
    Tensor x = sample;
    for (std::size_t i = 0; i < n; ++i) {
        const Layer& l = layers[i];
        Tensor y;
        switch (l.spec.kind) {
            case LayerKind::conv: y = conv_forward(l.conv, x); break;
            case LayerKind::relu: y = relu(x); break;
            case LayerKind::maxpool: {
                auto r = maxpool_forward(x);
                y = std::move(r.output);
                if (trace) trace->pool_masks[i] = std::move(r.mask);
                break;
            }
            case LayerKind::dropout: {
                if (mode == Mode::eval) {
                    y = x;
                } else {
                    auto r = dropout_apply(Dropout(l.spec.rate), mode, x, rng);
                    y = std::move(r.output);
                    if (trace) trace->dropout_masks[i] = std::move(r.mask);
                }
                break;
            }
            case LayerKind::flatten: y = x.reshaped(l.output_shape); break;
            case LayerKind::dense: y = dense_forward(l.dense, x); break;
            case LayerKind::softmax: throw ShapeError("softmax may only appear as the final layer");
        }
        if (trace) trace->inputs[i] = std::move(x);
        x = std::move(y);
    }
    if (trace) trace->logits = x;
    return x;
}

ForwardResult forward(const Network& net, const Tensor& batch, Mode mode, SeededRng& rng) {
    const Shape& in = net.input_shape();
    if (batch.rank() != 4 || batch.dim(1) != in[0] || batch.dim(2) != in[1] || batch.dim(3) != in[2]) {
        throw ShapeError("forward expects [N, " + std::to_string(in[0]) + ", " + std::to_string(in[1]) + ", " +
                         std::to_string(in[2]) + "], got " + batch.shape().str());
    }
    const std::size_t n = batch.dim(0), per = in.numel(), c = net.class_count();
    ForwardResult result{Tensor(), Tensor(Shape{n, c}), {}};
    if (mode == Mode::train) result.traces.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto first = batch.data().begin() + static_cast<std::ptrdiff_t>(s * per);
        Tensor sample(in, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(per)));
        const Tensor logits =
            forward_sample(net, sample, mode, rng, mode == Mode::train ? &result.traces[s] : nullptr);
        std::copy(logits.data().begin(), logits.data().end(), result.logits.ptr() + s * c);
    }
    result.probabilities = softmax(result.logits);
    return result;
}

Tensor predict(const Network& net, const Tensor& batch) {
    SeededRng unused(0);
    if (batch.rank() == 3) {
        return forward(net, batch.reshaped(Shape{1, batch.dim(0), batch.dim(1), batch.dim(2)}), Mode::eval, unused)
            .probabilities;
    }
    return forward(net, batch, Mode::eval, unused).probabilities;
}

void Gradients::zero() {
    for (auto& t : tensors) t.fill(0.0f);
}

Gradients make_gradients(const Network& net) {
    Gradients g;
    for (const Tensor* p : net.parameters()) g.tensors.emplace_back(p->shape());
    return g;
}

void backward_sample(const Network& net, const SampleTrace& trace, const Tensor& grad_logits, Gradients& grads) {
    const auto layers = net.layers();
    const std::size_t n = layers.size() - 1;
    if (trace.inputs.size() != n) throw ShapeError("backward: trace does not belong to this network");
    if (grad_logits.shape() != Shape{net.class_count()}) {
        throw ShapeError("backward: grad_logits must be " + Shape{net.class_count()}.str() + ", got " +
                         grad_logits.shape().str());
    }
    // Parameter tensors of layer i start at param_index[i].
    std::vector<std::size_t> param_index(n, 0);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
        param_index[i] = p;
        if (layers[i].spec.kind == LayerKind::conv || layers[i].spec.kind == LayerKind::dense) p += 2;
    }
    if (grads.tensors.size() != p) throw ShapeError("backward: gradient buffers do not match network");

    Tensor g = grad_logits;
    for (std::size_t i = n; i-- > 0;) {
        const Layer& l = layers[i];
        const Tensor& x = trace.inputs[i];
        Tensor gx;
        Tensor* gx_ptr = i == 0 ? nullptr : &gx;
        switch (l.spec.kind) {
            case LayerKind::conv:
                conv_backward_accumulate(l.conv, x, g, gx_ptr, grads.tensors[param_index[i]],
                                         grads.tensors[param_index[i] + 1]);
                break;
            case LayerKind::dense:
                dense_backward_accumulate(l.dense, x, g, gx_ptr, grads.tensors[param_index[i]],
                                          grads.tensors[param_index[i] + 1]);
                break;
            case LayerKind::relu: gx = relu_backward(x, g); break;
            case LayerKind::maxpool: gx = maxpool_backward(trace.pool_masks[i], g); break;
            case LayerKind::dropout:
                gx = trace.dropout_masks[i].empty() ? std::move(g) : dropout_backward(trace.dropout_masks[i], g);
                break;
            case LayerKind::flatten: gx = std::move(g).reshaped(l.input_shape); break;
            case LayerKind::softmax: break;
        }
        g = std::move(gx);
    }
}

}  // namespace leafnet
