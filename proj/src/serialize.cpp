#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "leafnet/image.hpp"
#include "leafnet/model.hpp"

namespace leafnet {

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

namespace {

constexpr char kMagic[4] = {'P', 'L', 'D', 'M'};
enum class FileKind : std::uint32_t { checkpoint = 1, frozen = 2 };

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void floats(std::span<const float> values) {
        if constexpr (std::endian::native == std::endian::little) {
            bytes(values.data(), values.size() * sizeof(float));
        } else {
            for (float f : values) le(std::bit_cast<std::uint32_t>(f));
        }
    }
    const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(const std::vector<char>& buf, std::size_t limit) : buf_(buf), limit_(limit) {}

    std::size_t offset() const { return pos_; }
    const char* take(std::size_t n, const char* what) {
        if (n > limit_ - pos_) throw FormatError(std::string("truncated file while reading ") + what, pos_);
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename U>
    U le(const char* what) {
        const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(U), what));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
        return v;
    }
    void floats(std::span<float> out, const char* what) {
        const char* p = take(out.size() * sizeof(float), what);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), p, out.size() * sizeof(float));
        } else {
            for (std::size_t i = 0; i < out.size(); ++i) {
                std::uint32_t v = 0;
                for (std::size_t b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i * 4 + b])) << (8 * b);
                out[i] = std::bit_cast<float>(v);
            }
        }
    }

private:
    const std::vector<char>& buf_;
    std::size_t limit_;
    std::size_t pos_ = 0;
};

nlohmann::json spec_to_json(const LayerSpec& s) {
    nlohmann::json j{{"kind", layer_kind_name(s.kind)}, {"name", s.name}};
    switch (s.kind) {
        case LayerKind::conv:
            j["units"] = s.units;
            j["kernel"] = s.kernel;
            j["padding"] = padding_name(s.padding);
            break;
        case LayerKind::dense: j["units"] = s.units; break;
        case LayerKind::dropout: j["rate"] = s.rate; break;
        default: break;
    }
    return j;
}

LayerSpec spec_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    LayerSpec s;
    if (kind == "conv") {
        const std::string pad = j.at("padding").get<std::string>();
        if (pad != "same" && pad != "valid") throw std::invalid_argument("unknown padding " + pad);
        s = LayerSpec::conv(j.at("units").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                            pad == "same" ? Padding::same : Padding::valid);
    } else if (kind == "relu") {
        s = LayerSpec::relu();
    } else if (kind == "maxpool") {
        s = LayerSpec::maxpool();
    } else if (kind == "dropout") {
        s = LayerSpec::dropout(j.at("rate").get<float>());
    } else if (kind == "flatten") {
        s = LayerSpec::flatten();
    } else if (kind == "dense") {
        s = LayerSpec::dense(j.at("units").get<std::size_t>());
    } else if (kind == "softmax") {
        s = LayerSpec::softmax();
    } else {
        throw std::invalid_argument("unknown layer kind " + kind);
    }
    s.name = j.at("name").get<std::string>();
    return s;
}

void write_file(const Network& net, FileKind kind, const std::vector<ClassInfo>* classes,
                const std::filesystem::path& path) {
    nlohmann::json meta;
    meta["input_shape"] = net.input_shape().dims();
    meta["layers"] = nlohmann::json::array();
    for (const auto& s : net.specs()) meta["layers"].push_back(spec_to_json(s));
    if (classes) meta["classes"] = *classes;
    const std::string meta_text = meta.dump();

    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.le<std::uint32_t>(kModelFormatVersion);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(kind));
    w.le<std::uint64_t>(meta_text.size());
    w.bytes(meta_text.data(), meta_text.size());
    for (const Tensor* t : net.parameters()) {
        w.le<std::uint64_t>(t->size());
        w.floats(t->data());
    }
    const auto& buf = w.buffer();
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    Writer tail;
    tail.le<std::uint32_t>(crc);
    out.write(tail.buffer().data(), 4);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

struct Loaded {
    Network network;
    nlohmann::json meta;
};

Loaded read_file(const std::filesystem::path& path, FileKind expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader head(buf, buf.size());
    if (std::memcmp(head.take(4, "magic"), kMagic, 4) != 0) throw FormatError("bad magic, not a model file", 0);
    const auto version = head.le<std::uint32_t>("version");
    if (version != kModelFormatVersion) {
        throw FormatError("unsupported format version " + std::to_string(version), 4);
    }
    const auto kind = head.le<std::uint32_t>("kind");
    if (kind != static_cast<std::uint32_t>(expected)) {
        throw FormatError(std::string("expected a ") + (expected == FileKind::frozen ? "frozen bundle" : "checkpoint") +
                              ", found kind " + std::to_string(kind),
                          8);
    }
    if (buf.size() < 4) throw FormatError("truncated file", buf.size());
    Reader r(buf, buf.size() - 4);
    r.take(12, "header");
    const auto meta_len = r.le<std::uint64_t>("metadata length");
    const std::size_t meta_at = r.offset();
    const char* meta_ptr = r.take(meta_len, "metadata");

    Loaded loaded;
    try {
        loaded.meta = nlohmann::json::parse(meta_ptr, meta_ptr + meta_len);
        std::vector<LayerSpec> specs;
        for (const auto& j : loaded.meta.at("layers")) specs.push_back(spec_from_json(j));
        loaded.network = Network(Shape(loaded.meta.at("input_shape").get<std::vector<std::size_t>>()), std::move(specs));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid metadata: ") + e.what(), meta_at);
    }

    for (Tensor* t : loaded.network.parameters()) {
        const std::size_t at = r.offset();
        const auto count = r.le<std::uint64_t>("record length");
        if (count != t->size()) {
            throw FormatError("weight record holds " + std::to_string(count) + " values, layer expects " +
                                  std::to_string(t->size()),
                              at);
        }
        r.floats(t->data(), "weights");
    }
    if (r.offset() != buf.size() - 4) throw FormatError("trailing bytes after weight records", r.offset());
    Reader crc_reader(buf, buf.size());
    crc_reader.take(buf.size() - 4, "payload");
    const auto stored = crc_reader.le<std::uint32_t>("checksum");
    const auto actual = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (stored != actual) throw FormatError("checksum mismatch", buf.size() - 4);
    return loaded;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    write_file(net, FileKind::checkpoint, nullptr, path);
}

Network load_checkpoint(const std::filesystem::path& path) {
    return read_file(path, FileKind::checkpoint).network;
}

void export_frozen(const Network& net, const std::vector<ClassInfo>& classes, const std::filesystem::path& path) {
    if (classes.size() != net.class_count()) {
        throw ArgumentError("frozen export needs " + std::to_string(net.class_count()) + " class records, got " +
                            std::to_string(classes.size()));
    }
    write_file(net.without_dropout(), FileKind::frozen, &classes, path);
}

FrozenModel load_frozen(const std::filesystem::path& path) {
    Loaded loaded = read_file(path, FileKind::frozen);
    FrozenModel model;
    try {
        model.classes = loaded.meta.at("classes").get<std::vector<ClassInfo>>();
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid class metadata: ") + e.what(), 20);
    }
    if (model.classes.size() != loaded.network.class_count()) {
        throw FormatError("class record count does not match network outputs", 20);
    }
    model.network = std::move(loaded.network);
    return model;
}

ModelFileKind model_file_kind(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> buf(12);
    in.read(buf.data(), 12);
    buf.resize(static_cast<std::size_t>(in.gcount()));
    Reader head(buf, buf.size());
    if (std::memcmp(head.take(4, "magic"), kMagic, 4) != 0) throw FormatError("bad magic, not a model file", 0);
    head.le<std::uint32_t>("version");
    switch (head.le<std::uint32_t>("kind")) {
        case static_cast<std::uint32_t>(FileKind::checkpoint): return ModelFileKind::checkpoint;
        case static_cast<std::uint32_t>(FileKind::frozen): return ModelFileKind::frozen;
        default: throw FormatError("unknown model file kind", 8);
    }
}

FrozenModel load_inference_model(const std::filesystem::path& path) {
    if (model_file_kind(path) == ModelFileKind::frozen) return load_frozen(path);
    Network net = load_checkpoint(path);
    if (net.class_count() != class_table().size()) {
        throw ArgumentError("checkpoint has " + std::to_string(net.class_count()) +
                            " outputs; export it with explicit class metadata first");
    }
    return FrozenModel{net.without_dropout(), class_table(), kModelFormatVersion};
}

}  // namespace leafnet
