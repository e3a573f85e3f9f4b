#include "leafnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

namespace leafnet {

namespace fs = std::filesystem;

std::vector<std::size_t> DatasetManifest::class_counts() const {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (const auto& s : samples) ++counts.at(s.class_index);
    return counts;
}

namespace {

std::vector<fs::path> sorted_entries(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::uint8_t> read_prefix(const fs::path& path, std::size_t n) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint8_t> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    buf.resize(static_cast<std::size_t>(in.gcount()));
    return buf;
}

}  // namespace

DatasetManifest scan_manifest(const fs::path& root, const ScanOptions& options) {
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
    DatasetManifest m;
    m.root = root;
    m.classes = class_table();
    for (const auto& dir : sorted_entries(root)) {
        if (!fs::is_directory(dir)) continue;
        const auto cls = find_class_by_directory(dir.filename().string());
        if (!cls) {
            m.warnings.push_back("unknown class directory ignored: " + dir.filename().string());
            continue;
        }
        m.matched_classes.push_back(*cls);
        std::size_t found = 0;
        for (const auto& file : sorted_entries(dir)) {
            if (!fs::is_regular_file(file)) continue;
            if (options.validate) {
                const Validation v = validate_image(file);
                if (!v.accepted) {
                    m.warnings.push_back("skipped " + file.string() + ": " + v.reason);
                    continue;
                }
            } else if (sniff_format(read_prefix(file, 8)) == ImageFormat::unknown) {
                m.warnings.push_back("skipped " + file.string() + ": not a PNG or JPEG file");
                continue;
            }
            m.samples.push_back({file, *cls});
            ++found;
        }
        if (found == 0) m.warnings.push_back("class directory has no images: " + dir.filename().string());
    }
    std::sort(m.matched_classes.begin(), m.matched_classes.end());
    m.matched_classes.erase(std::unique(m.matched_classes.begin(), m.matched_classes.end()), m.matched_classes.end());
    if (m.matched_classes.empty()) {
        throw ManifestError("no class directories under " + root.string() + " match the class table");
    }
    return m;
}

Tensor decode_resize(const fs::path& path, std::size_t size) {
    return resize_bilinear(decode_image_file(path), size, size);
}

Tensor decode_resize(std::span<const std::uint8_t> bytes, std::size_t size) {
    return resize_bilinear(decode_image(bytes), size, size);
}

Tensor normalize(const Tensor& img) {
    Tensor out(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] / 255.0f;
    return out;
}

Validation validate_image_bytes(std::span<const std::uint8_t> bytes) {
    Tensor img;
    try {
        img = decode_image(bytes);
    } catch (const DecodeError& e) {
        return {false, std::string("decode failure: ") + e.what()};
    }
    const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    if (*lo == *hi) return {false, "zero variance"};
    return {true, ""};
}

Validation validate_image(const fs::path& path) {
    try {
        return validate_image_bytes(read_file_bytes(path));
    } catch (const IoError& e) {
        return {false, e.what()};
    }
}

// ---------------------------------------------------------------- augmentation

void AugmentConfig::validate() const {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(rotation_degrees_max >= 0.0)) throw ArgumentError("rotation_degrees_max must be >= 0");
    if (!prob_ok(horizontal_flip_prob) || !prob_ok(vertical_flip_prob)) {
        throw ArgumentError("flip probabilities must lie in [0, 1]");
    }
    if (!(zoom_min > 0.0 && zoom_min <= zoom_max)) throw ArgumentError("zoom range must satisfy 0 < min <= max");
}

bool AugmentConfig::is_identity() const noexcept {
    return rotation_degrees_max == 0.0 && horizontal_flip_prob == 0.0 && vertical_flip_prob == 0.0 &&
           zoom_min == 1.0 && zoom_max == 1.0;
}

Tensor flip_horizontal(const Tensor& img) {
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    Tensor out(img.shape());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::copy_n(img.ptr() + (y * w + x) * c, c, out.ptr() + (y * w + (w - 1 - x)) * c);
        }
    }
    return out;
}

Tensor flip_vertical(const Tensor& img) {
    const std::size_t h = img.dim(0), row = img.dim(1) * img.dim(2);
    Tensor out(img.shape());
    for (std::size_t y = 0; y < h; ++y) std::copy_n(img.ptr() + y * row, row, out.ptr() + (h - 1 - y) * row);
    return out;
}

namespace {

// Resamples through an inverse map from output pixel offsets (relative to
// the centre) to source offsets.
template <typename Map>
Tensor remap(const Tensor& img, Map map) {
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
    Tensor out(img.shape());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const auto [sy, sx] = map(static_cast<double>(y) - cy, static_cast<double>(x) - cx);
            sample_bilinear(img, cy + sy, cx + sx, out.ptr() + (y * w + x) * c);
        }
    }
    return out;
}

}  // namespace

Tensor rotate(const Tensor& img, double degrees) {
    const double t = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    return remap(img, [&](double dy, double dx) { return std::pair{c * dy - s * dx, s * dy + c * dx}; });
}

Tensor zoom(const Tensor& img, double factor) {
    if (!(factor > 0.0)) throw ArgumentError("zoom factor must be positive");
    return remap(img, [&](double dy, double dx) { return std::pair{dy / factor, dx / factor}; });
}

Tensor augment(const Tensor& img, const AugmentConfig& cfg, SeededRng& rng) {
    cfg.validate();
    if (img.rank() != 3) throw ShapeError("augment expects [H, W, C], got " + img.shape().str());
    Tensor x = img;
    if (cfg.rotation_degrees_max > 0.0) {
        x = rotate(x, rng.uniform(-cfg.rotation_degrees_max, cfg.rotation_degrees_max));
    }
    if (cfg.horizontal_flip_prob > 0.0 && rng.bernoulli(cfg.horizontal_flip_prob)) x = flip_horizontal(x);
    if (cfg.vertical_flip_prob > 0.0 && rng.bernoulli(cfg.vertical_flip_prob)) x = flip_vertical(x);
    const double z = cfg.zoom_min < cfg.zoom_max ? rng.uniform(cfg.zoom_min, cfg.zoom_max) : cfg.zoom_min;
    if (z != 1.0) x = zoom(x, z);
    for (auto& v : x.data()) v = std::clamp(v, 0.0f, 1.0f);
    return x;
}

// ---------------------------------------------------------------- split and batching

Split split(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ArgumentError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
    }
    std::map<std::size_t, std::vector<Sample>> by_class;
    for (const auto& s : samples) by_class[s.class_index].push_back(s);
    const SeededRng base(seed);
    Split out;
    for (auto& [cls, group] : by_class) {
        if (group.size() < 2) {
            out.warnings.push_back("class " + std::to_string(cls) + " has " + std::to_string(group.size()) +
                                   " sample(s); all assigned to train");
            out.train.insert(out.train.end(), group.begin(), group.end());
            continue;
        }
        SeededRng rng = base.derive(cls);
        rng.shuffle(group);
        const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(group.size())));
        out.train.insert(out.train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.val.insert(out.val.end(), group.begin() + static_cast<std::ptrdiff_t>(n_train), group.end());
    }
    return out;
}

std::vector<std::vector<Sample>> batch_plan(const std::vector<Sample>& samples, std::size_t batch_size,
                                            std::uint64_t shuffle_seed) {
    if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
    std::vector<Sample> order = samples;
    SeededRng rng(shuffle_seed);
    rng.shuffle(order);
    std::vector<std::vector<Sample>> out;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

Batch load_batch(std::span<const Sample> samples, std::size_t size, const AugmentConfig* augment_cfg,
                 SeededRng* rng) {
    if (augment_cfg && !rng) throw ArgumentError("augmentation needs a random source");
    if (samples.empty()) throw ArgumentError("cannot load an empty batch");
    const std::size_t per = size * size * 3;
    Batch b{Tensor(Shape{samples.size(), size, size, 3}), {}};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Tensor img = normalize(decode_resize(samples[i].path, size));
        if (augment_cfg) img = augment(img, *augment_cfg, *rng);
        std::copy(img.data().begin(), img.data().end(), b.inputs.ptr() + i * per);
        b.labels.push_back(samples[i].class_index);
    }
    return b;
}

std::vector<Batch> batches(const std::vector<Sample>& samples, std::size_t batch_size, std::uint64_t shuffle_seed,
                           std::size_t size) {
    std::vector<Batch> out;
    for (const auto& group : batch_plan(samples, batch_size, shuffle_seed)) out.push_back(load_batch(group, size));
    return out;
}

// ---------------------------------------------------------------- synthetic data

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double hh = std::fmod(h, 1.0) * 6.0;
    const int sector = static_cast<int>(hh);
    const double f = hh - sector;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

}  // namespace

Tensor synthetic_image(std::size_t class_index, std::size_t n_classes, std::size_t image_index, std::uint64_t seed,
                       std::size_t size) {
    SeededRng rng(mix_seed(mix_seed(seed, class_index), image_index));
    const auto n = static_cast<double>(n_classes);
    const auto base = hsv_to_rgb(static_cast<double>(class_index) / n, 0.75, 0.85);
    const double stripe_angle = std::numbers::pi * static_cast<double>(class_index) / n;
    const double stripe_freq = 3.0 + static_cast<double>(class_index % 3) * 2.0;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double fs = static_cast<double>(size);
    const double cy = fs / 2.0 + rng.uniform(-0.08, 0.08) * fs;
    const double cx = fs / 2.0 + rng.uniform(-0.08, 0.08) * fs;
    const double ra = rng.uniform(0.40, 0.48) * fs, rb = rng.uniform(0.30, 0.40) * fs;
    const double tilt = rng.uniform(0.0, std::numbers::pi);
    const double brightness = rng.uniform(0.9, 1.1);

    Tensor img(Shape{size, size, 3});
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double u = (dx * std::cos(tilt) + dy * std::sin(tilt)) / ra;
            const double v = (-dx * std::sin(tilt) + dy * std::cos(tilt)) / rb;
            const bool leaf = u * u + v * v <= 1.0;
            const double along = (static_cast<double>(x) * std::cos(stripe_angle) +
                                  static_cast<double>(y) * std::sin(stripe_angle)) / fs;
            const double stripe = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * stripe_freq * along + phase);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                static constexpr double soil[3] = {0.30, 0.24, 0.18};
                double value = leaf ? base[ch] * brightness * (0.75 + 0.25 * stripe) : soil[ch];
                value += rng.uniform(-0.03, 0.03);
                img.at(y, x, ch) = static_cast<float>(std::clamp(std::round(value * 255.0), 0.0, 255.0));
            }
        }
    }
    return img;
}

std::vector<fs::path> generate_synthetic_dataset(const SyntheticOptions& options, const fs::path& out_dir) {
    if (options.n_classes == 0 || options.n_classes > kClassCount) {
        throw ArgumentError("n_classes must lie in [1, " + std::to_string(kClassCount) + "]");
    }
    if (options.image_size < 2) throw ArgumentError("image_size must be at least 2");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<fs::path> written;
    for (std::size_t c = 0; c < options.n_classes; ++c) {
        const fs::path dir = out_dir / class_table()[c].directory_name;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        for (std::size_t i = 0; i < options.n_per_class; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "img_%04zu.png", i);
            const fs::path path = dir / name;
            write_file_bytes(path, encode_png(synthetic_image(c, options.n_classes, i, options.seed, options.image_size)));
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace leafnet
