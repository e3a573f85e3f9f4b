#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "leafnet/tensor.hpp"

namespace leafnet {

/// Bytes that are not a readable PNG or JPEG image.
class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ImageFormat { unknown, png, jpeg };

/// Identifies the container from its leading signature bytes.
ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decodes PNG or JPEG into an RGB [H, W, 3] tensor with values in 0..255.
Tensor decode_image(std::span<const std::uint8_t> bytes);
Tensor decode_image_file(const std::filesystem::path& path);

/// Encodes an RGB [H, W, 3] tensor in 0..255 (rounded, clamped) as 8-bit data.
std::vector<std::uint8_t> encode_png(const Tensor& rgb);
std::vector<std::uint8_t> encode_jpeg(const Tensor& rgb, int quality = 90);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Bilinear resampling with half-pixel centres and edge clamping. Resizing to
/// the same extent returns the input unchanged.
Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w);

/// Bilinear sample at fractional (y, x), coordinates clamped to the border.
void sample_bilinear(const Tensor& img, double y, double x, float* out);

}  // namespace leafnet
