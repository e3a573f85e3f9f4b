#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leafnet/classes.hpp"
#include "leafnet/layers.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

enum class LayerKind { conv, relu, maxpool, dropout, flatten, dense, softmax };

const char* layer_kind_name(LayerKind kind) noexcept;

/// Declarative description of one layer. `units` is the output channel count
/// for conv and the output feature count for dense.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t units = 0;
    std::size_t kernel = 0;
    Padding padding = Padding::valid;
    float rate = 0.0f;
    std::string name;  // filled in by Network when empty

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, Padding padding);
    static LayerSpec relu();
    static LayerSpec maxpool();
    static LayerSpec dropout(float rate);
    static LayerSpec flatten();
    static LayerSpec dense(std::size_t out_features);
    static LayerSpec softmax();

    /// Output shape for a given input shape; throws ShapeError if incompatible.
    Shape output_shape(const Shape& input) const;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// A layer bound to concrete shapes. Only the member matching `spec.kind`
/// carries weights.
struct Layer {
    LayerSpec spec;
    Shape input_shape;
    Shape output_shape;
    Conv2D conv;
    Dense dense;

    std::size_t param_count() const noexcept;
};

/// Shape-checked stack of layers ending in dense -> softmax.
class Network {
public:
    Network() = default;
    /// Validates the chain, assigns default names and allocates zero weights.
    Network(Shape input_shape, std::vector<LayerSpec> specs);

    const Shape& input_shape() const noexcept { return input_shape_; }
    std::size_t class_count() const noexcept { return class_count_; }
    std::span<const Layer> layers() const noexcept { return layers_; }
    std::span<Layer> layers() noexcept { return layers_; }
    std::vector<LayerSpec> specs() const;

    std::size_t param_count() const noexcept;

    /// Weight then bias tensor of every parametric layer, in network order.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    /// He-normal weights, zero biases.
    void initialize(SeededRng& rng);

    /// Copy with every dropout layer removed; names of the others are kept.
    Network without_dropout() const;

private:
    Shape input_shape_;
    std::size_t class_count_ = 0;
    std::vector<Layer> layers_;
};

struct BlockSpec {
    std::size_t width = 0;
    std::size_t kernel = 3;
};

/// [conv same, relu, conv valid, relu, maxpool] per block, then
/// dropout -> flatten -> dense -> relu -> dropout -> dense -> softmax.
Network build_block_network(const Shape& input_shape, std::span<const BlockSpec> blocks,
                            std::size_t hidden_units, std::size_t class_count, float dropout_conv,
                            float dropout_dense);

/// The 256x256x3 -> 38 network with its published layer names.
/// Initialized with He weights when `rng` is non-null, zero otherwise.
Network build_paper_network(SeededRng* rng = nullptr, float dropout_conv = 0.25f, float dropout_dense = 0.5f);

/// Reduced variant for 64x64 input: first four blocks at quarter width.
Network build_desk_network(SeededRng* rng = nullptr, std::size_t class_count = kClassCount,
                           float dropout_conv = 0.25f, float dropout_dense = 0.5f);

struct SummaryRow {
    std::string name;
    Shape output_shape;
    std::size_t params = 0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct Summary {
    std::vector<SummaryRow> rows;
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

/// One row per conv, pool, dropout, flatten and dense layer; activations are
/// folded into the layer they follow.
Summary summarize(const Network& net);
std::string format_summary(const Summary& summary);

// ---------------------------------------------------------------- execution

/// Per-sample record of everything backward needs.
struct SampleTrace {
    std::vector<Tensor> inputs;         // input of each layer before the softmax
    std::vector<PoolMask> pool_masks;   // indexed by layer; empty for non-pool layers
    std::vector<Tensor> dropout_masks;  // indexed by layer; empty for non-dropout layers
    Tensor logits;                      // [class_count]
};

/// Logits of one [H, W, C] sample. Records a trace when `trace` is non-null.
Tensor forward_sample(const Network& net, const Tensor& sample, Mode mode, SeededRng& rng,
                      SampleTrace* trace = nullptr);

struct ForwardResult {
    Tensor probabilities;             // [N, class_count]
    Tensor logits;                    // [N, class_count]
    std::vector<SampleTrace> traces;  // one per sample in train mode, empty in eval mode
};

/// Batched forward over [N, H, W, C].
ForwardResult forward(const Network& net, const Tensor& batch, Mode mode, SeededRng& rng);

/// Eval-mode probabilities for [N, H, W, C] or a single [H, W, C] sample
/// (returned as [1, class_count]).
Tensor predict(const Network& net, const Tensor& batch);

/// Gradient buffers parallel to Network::parameters().
struct Gradients {
    std::vector<Tensor> tensors;
    void zero();
};

Gradients make_gradients(const Network& net);

/// Backpropagates d loss / d logits ([class_count]) through one traced
/// sample and adds the parameter gradients into `grads`.
void backward_sample(const Network& net, const SampleTrace& trace, const Tensor& grad_logits,
                     Gradients& grads);

// ---------------------------------------------------------------- persistence

/// Malformed or truncated model file. `offset` is the byte position where
/// the problem was detected.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset);
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Inference-only bundle: dropout removed, weights fixed, classes embedded.
struct FrozenModel {
    Network network;
    std::vector<ClassInfo> classes;
    std::uint32_t format_version = kModelFormatVersion;

    Tensor predict(const Tensor& batch) const { return leafnet::predict(network, batch); }
};

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

/// Requires exactly net.class_count() class records.
void export_frozen(const Network& net, const std::vector<ClassInfo>& classes, const std::filesystem::path& path);
FrozenModel load_frozen(const std::filesystem::path& path);

enum class ModelFileKind { checkpoint, frozen };

/// Reads only the header. Throws FormatError for anything else.
ModelFileKind model_file_kind(const std::filesystem::path& path);

/// A frozen bundle as stored, or a 38-output checkpoint paired with the
/// built-in class table.
FrozenModel load_inference_model(const std::filesystem::path& path);

}  // namespace leafnet
