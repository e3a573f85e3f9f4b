#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leafnet/data.hpp"
#include "leafnet/model.hpp"

namespace leafnet {

/// Loss became NaN or infinite; training stops instead of continuing.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Architecture { paper, desk };

const char* architecture_name(Architecture a) noexcept;
/// Input extent the architecture expects (256 or 64).
std::size_t architecture_image_size(Architecture a) noexcept;

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 15;
    float dropout_conv = 0.25f;
    float dropout_dense = 0.5f;
    std::uint64_t seed = 0;
    bool use_augmentation = true;
    AugmentConfig augment;
    double train_fraction = 0.75;
    Architecture architecture = Architecture::paper;

    /// Throws ArgumentError on out-of-domain values.
    void validate() const;
};

struct AdamState {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-7f;
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

/// Zero moments shaped like the network's parameters.
AdamState make_adam_state(const Network& net);

/// One Adam update of every parameter tensor.
void adam_step(std::span<Tensor* const> weights, const std::vector<Tensor>& grads, AdamState& state, double lr);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct EpochStats {
    double loss = 0.0;      // mean of per-batch mean losses
    double accuracy = 0.0;  // over all samples
};

/// One optimisation pass: per batch, optional augmentation, train-mode
/// forward, softmax cross-entropy, backward and one Adam step. `rng` drives
/// augmentation and dropout.
EpochStats run_epoch(Network& net, const std::vector<Batch>& batches, const TrainConfig& config, AdamState& adam,
                     SeededRng& rng);

/// Eval-mode pass with no augmentation and no weight change. Loss is the mean
/// over samples. Returns zeros when there are no batches.
EpochStats evaluate_epoch(const Network& net, const std::vector<Batch>& batches);

/// Argmax predictions for every sample in `batches`, in order.
std::vector<std::size_t> predict_labels(const Network& net, const std::vector<Batch>& batches);

/// Builds the network a config asks for, He-initialised from `rng`.
Network build_network(const TrainConfig& config, SeededRng& rng);

struct FitOptions {
    /// When non-empty, best.pldc (highest validation accuracy) and
    /// final.pldc are written here.
    std::filesystem::path checkpoint_dir;
    /// Decoded images are kept in memory up to this many bytes.
    std::size_t cache_bytes = std::size_t{1} << 30;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
    Network network;
    std::vector<EpochRecord> history;
    Split split;
};

FitResult fit(const DatasetManifest& manifest, const TrainConfig& config, const FitOptions& options = {});

/// Header `epoch,loss,accuracy,val_loss,val_accuracy`, values to 4 decimals.
void export_history_csv(const std::vector<EpochRecord>& records, const std::filesystem::path& path);
std::string format_history_csv(const std::vector<EpochRecord>& records);
std::vector<EpochRecord> parse_history_csv(const std::string& text);

}  // namespace leafnet
