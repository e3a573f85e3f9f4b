#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "leafnet/classes.hpp"
#include "leafnet/image.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

inline constexpr std::size_t kImageSize = 256;

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    std::filesystem::path path;
    std::size_t class_index = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<Sample> samples;
    std::vector<ClassInfo> classes;
    std::vector<std::string> warnings;
    /// Class indices that have a directory in the tree, ascending.
    std::vector<std::size_t> matched_classes;

    /// Sample count per class index, sized to classes.size().
    std::vector<std::size_t> class_counts() const;
};

struct ScanOptions {
    /// Fully decode every file and apply validate_image. Off by default:
    /// the scan then only checks each file's PNG/JPEG signature.
    bool validate = false;
};

/// Walks a class-per-directory tree. Directory names are matched
/// case-insensitively against ClassInfo::directory_name.
DatasetManifest scan_manifest(const std::filesystem::path& root, const ScanOptions& options = {});

/// Decoded RGB image resized to size x size, values in 0..255.
Tensor decode_resize(const std::filesystem::path& path, std::size_t size = kImageSize);
Tensor decode_resize(std::span<const std::uint8_t> bytes, std::size_t size = kImageSize);

/// Maps 0..255 to [0, 1].
Tensor normalize(const Tensor& img);

struct Validation {
    bool accepted = false;
    std::string reason;  // empty when accepted
};

/// Rejects undecodable files and blank (zero-variance) images.
Validation validate_image(const std::filesystem::path& path);
Validation validate_image_bytes(std::span<const std::uint8_t> bytes);

struct AugmentConfig {
    double rotation_degrees_max = 20.0;
    double horizontal_flip_prob = 0.5;
    double vertical_flip_prob = 0.5;
    double zoom_min = 0.8;
    double zoom_max = 1.2;

    static AugmentConfig none() { return {0.0, 0.0, 0.0, 1.0, 1.0}; }
    /// Throws ArgumentError on out-of-domain values.
    void validate() const;
    bool is_identity() const noexcept;
};

/// Rotation, then flips, then zoom; output shape equals input shape and values
/// are clamped to [0, 1].
Tensor augment(const Tensor& img, const AugmentConfig& cfg, SeededRng& rng);

Tensor flip_horizontal(const Tensor& img);
Tensor flip_vertical(const Tensor& img);
/// Rotation by `degrees` about the centre, bilinear, border clamped.
Tensor rotate(const Tensor& img, double degrees);
/// factor > 1 magnifies (centre crop); factor < 1 shrinks with border fill.
Tensor zoom(const Tensor& img, double factor);

struct Split {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<std::string> warnings;
};

/// Stratified split: each class sends round(fraction * n) samples to train.
/// Classes with fewer than two samples go entirely to train with a warning.
Split split(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed);

/// Sample order for one epoch, grouped into batches; the final batch may be
/// short. Empty input gives no batches.
std::vector<std::vector<Sample>> batch_plan(const std::vector<Sample>& samples, std::size_t batch_size,
                                            std::uint64_t shuffle_seed);

struct Batch {
    Tensor inputs;  // [N, size, size, 3] in [0, 1]
    std::vector<std::size_t> labels;
};

/// Decodes, resizes and normalizes each sample; augments when `augment_cfg`
/// is non-null (using `rng`).
Batch load_batch(std::span<const Sample> samples, std::size_t size, const AugmentConfig* augment_cfg = nullptr,
                 SeededRng* rng = nullptr);

/// batch_plan followed by load_batch for each group.
std::vector<Batch> batches(const std::vector<Sample>& samples, std::size_t batch_size, std::uint64_t shuffle_seed,
                           std::size_t size = kImageSize);

struct SyntheticOptions {
    std::size_t n_classes = 4;
    std::size_t n_per_class = 8;
    std::uint64_t seed = 0;
    std::size_t image_size = 64;
};

/// Writes n_per_class PNGs into a directory per class (named after the first
/// n_classes dataset directories). Each class has its own colour and stripe
/// pattern. Returns the paths written, in order.
std::vector<std::filesystem::path> generate_synthetic_dataset(const SyntheticOptions& options,
                                                              const std::filesystem::path& out_dir);

/// The image generate_synthetic_dataset writes for (class, index), in 0..255.
Tensor synthetic_image(std::size_t class_index, std::size_t n_classes, std::size_t image_index, std::uint64_t seed,
                       std::size_t size);

}  // namespace leafnet
