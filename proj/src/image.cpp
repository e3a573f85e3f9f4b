#include "leafnet/image.hpp"

#include <png.h>
// jpeglib.h needs size_t and FILE declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>

namespace leafnet {

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept {
    static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return ImageFormat::png;
    if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) return ImageFormat::jpeg;
    return ImageFormat::unknown;
}

namespace {

Tensor from_rgb8(const std::vector<std::uint8_t>& pixels, std::size_t h, std::size_t w) {
    Tensor out(Shape{h, w, 3});
    for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = static_cast<float>(pixels[i]);
    return out;
}

std::vector<std::uint8_t> to_rgb8(const Tensor& rgb) {
    if (rgb.rank() != 3 || rgb.dim(2) != 3) throw ShapeError("expected an RGB [H, W, 3] image, got " + rgb.shape().str());
    std::vector<std::uint8_t> out(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb[i]), 0L, 255L));
    }
    return out;
}

Tensor decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DecodeError(std::string("PNG header: ") + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw DecodeError("PNG has zero extent");
    }
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError("PNG data: " + msg);
    }
    return from_rgb8(pixels, image.height, image.width);
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr) {}

// Only trivially destructible locals live in this frame because of longjmp.
bool decode_jpeg_raw(const std::uint8_t* data, std::size_t size, std::uint8_t** out, std::size_t* h,
                     std::size_t* w, char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.output_message = jpeg_silent;
    *out = nullptr;
    if (setjmp(err.jump)) {
        std::strcpy(message, err.message);
        jpeg_destroy_decompress(&cinfo);
        std::free(*out);
        *out = nullptr;
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    *h = cinfo.output_height;
    *w = cinfo.output_width;
    const std::size_t stride = *w * 3;
    *out = static_cast<std::uint8_t*>(std::malloc(stride * *h));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = *out + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    // libjpeg accepts a truncated stream with a warning and pads it; treat
    // that as a failure so corrupt files are rejected.
    const bool truncated = err.base.num_warnings > 0;
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (truncated) {
        std::strcpy(message, "corrupt or truncated JPEG data");
        std::free(*out);
        *out = nullptr;
        return false;
    }
    return true;
}

Tensor decode_jpeg(std::span<const std::uint8_t> bytes) {
    std::uint8_t* raw = nullptr;
    std::size_t h = 0, w = 0;
    char message[JMSG_LENGTH_MAX] = {};
    if (!decode_jpeg_raw(bytes.data(), bytes.size(), &raw, &h, &w, message)) {
        throw DecodeError(std::string("JPEG: ") + message);
    }
    std::vector<std::uint8_t> pixels(raw, raw + h * w * 3);
    std::free(raw);
    if (h == 0 || w == 0) throw DecodeError("JPEG has zero extent");
    return from_rgb8(pixels, h, w);
}

bool encode_jpeg_raw(const std::uint8_t* pixels, std::size_t h, std::size_t w, int quality, unsigned char** out,
                     unsigned long* out_size) {
    jpeg_compress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, out, out_size);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto row = const_cast<JSAMPROW>(pixels + cinfo.next_scanline * w * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

}  // namespace

Tensor decode_image(std::span<const std::uint8_t> bytes) {
    switch (sniff_format(bytes)) {
        case ImageFormat::png: return decode_png(bytes);
        case ImageFormat::jpeg: return decode_jpeg(bytes);
        case ImageFormat::unknown: break;
    }
    throw DecodeError("not a PNG or JPEG image (" + std::to_string(bytes.size()) + " bytes)");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Tensor decode_image_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Tensor& rgb) {
    const auto pixels = to_rgb8(rgb);
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(rgb.dim(1));
    image.height = static_cast<png_uint_32>(rgb.dim(0));
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("PNG encode: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw std::runtime_error(std::string("PNG encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_jpeg(const Tensor& rgb, int quality) {
    const auto pixels = to_rgb8(rgb);
    unsigned char* buf = nullptr;
    unsigned long size = 0;
    if (!encode_jpeg_raw(pixels.data(), rgb.dim(0), rgb.dim(1), quality, &buf, &size)) {
        std::free(buf);
        throw std::runtime_error("JPEG encode failed");
    }
    std::vector<std::uint8_t> out(buf, buf + size);
    std::free(buf);
    return out;
}

void sample_bilinear(const Tensor& img, double y, double x, float* out) {
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const auto y0 = static_cast<std::size_t>(y), x0 = static_cast<std::size_t>(x);
    const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    const float* p = img.ptr();
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double a = p[(y0 * w + x0) * c + ch], b = p[(y0 * w + x1) * c + ch];
        const double d = p[(y1 * w + x0) * c + ch], e = p[(y1 * w + x1) * c + ch];
        const double top = a + (b - a) * fx;
        const double bottom = d + (e - d) * fx;
        out[ch] = static_cast<float>(top + (bottom - top) * fy);
    }
}

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    if (img.rank() != 3) throw ShapeError("resize expects [H, W, C], got " + img.shape().str());
    if (out_h == 0 || out_w == 0) throw ShapeError("resize target must be positive");
    if (img.dim(0) == out_h && img.dim(1) == out_w) return img;
    const std::size_t c = img.dim(2);
    const double sy = static_cast<double>(img.dim(0)) / static_cast<double>(out_h);
    const double sx = static_cast<double>(img.dim(1)) / static_cast<double>(out_w);
    Tensor out(Shape{out_h, out_w, c});
    for (std::size_t y = 0; y < out_h; ++y) {
        const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
        for (std::size_t x = 0; x < out_w; ++x) {
            const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
            sample_bilinear(img, src_y, src_x, out.ptr() + (y * out_w + x) * c);
        }
    }
    return out;
}

}  // namespace leafnet
