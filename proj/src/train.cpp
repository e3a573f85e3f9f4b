#include "leafnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "leafnet/kernels.hpp"

namespace leafnet {

const char* architecture_name(Architecture a) noexcept {
    return a == Architecture::paper ? "paper" : "desk";
}

std::size_t architecture_image_size(Architecture a) noexcept {
    return a == Architecture::paper ? kImageSize : 64;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be > 0");
    if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
    Dropout{dropout_conv};
    Dropout{dropout_dense};
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must lie in (0, 1)");
    augment.validate();
}

AdamState make_adam_state(const Network& net) {
    AdamState s;
    for (const Tensor* p : net.parameters()) {
        s.m.emplace_back(p->shape());
        s.v.emplace_back(p->shape());
    }
    return s;
}

void adam_step(std::span<Tensor* const> weights, const std::vector<Tensor>& grads, AdamState& state, double lr) {
    if (grads.size() != weights.size() || state.m.size() != weights.size() || state.v.size() != weights.size()) {
        throw ShapeError("adam_step: " + std::to_string(weights.size()) + " weight tensors but " +
                         std::to_string(grads.size()) + " gradients and " + std::to_string(state.m.size()) +
                         " moment tensors");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const Shape& s = weights[i]->shape();
        if (grads[i].shape() != s || state.m[i].shape() != s || state.v[i].shape() != s) {
            throw ShapeError("adam_step: tensor " + std::to_string(i) + " has weight shape " + s.str() +
                             " but gradient " + grads[i].shape().str());
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const kernels::AdamCoefficients coef{
        static_cast<float>(lr),
        state.beta1,
        state.beta2,
        state.eps,
        static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta1), t)),
        static_cast<float>(1.0 - std::pow(static_cast<double>(state.beta2), t)),
    };
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        k.adam(weights[i]->ptr(), grads[i].ptr(), state.m[i].ptr(), state.v[i].ptr(), weights[i]->size(), coef);
    }
}

namespace {

std::size_t argmax(std::span<const float> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

Tensor sample_at(const Tensor& batch, std::size_t i) {
    const Shape one(std::vector<std::size_t>(batch.shape().dims().begin() + 1, batch.shape().dims().end()));
    const std::size_t per = one.numel();
    const auto first = batch.data().begin() + static_cast<std::ptrdiff_t>(i * per);
    return Tensor(one, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(per)));
}

struct Tally {
    double loss_sum = 0.0;  // train: sum of batch means; eval: sum over samples
    std::size_t batches = 0;
    std::size_t samples = 0;
    std::size_t correct = 0;
};

void train_batch(Network& net, const Batch& batch, const TrainConfig& config, AdamState& adam, SeededRng& rng,
                 Gradients& grads, Tally& tally) {
    const std::size_t n = batch.labels.size(), c = net.class_count();
    if (n == 0 || batch.inputs.dim(0) != n) throw ShapeError("batch inputs and labels disagree");
    const bool do_augment = config.use_augmentation && !config.augment.is_identity();
    grads.zero();
    double batch_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor sample = sample_at(batch.inputs, i);
        if (do_augment) sample = augment(sample, config.augment, rng);
        SampleTrace trace;
        const Tensor logits = forward_sample(net, sample, Mode::train, rng, &trace);
        const std::size_t label[] = {batch.labels[i]};
        auto ce = softmax_cross_entropy(logits.reshaped(Shape{1, c}), label);
        if (!std::isfinite(ce.loss)) {
            throw TrainingError("non-finite loss at batch " + std::to_string(tally.batches) + ", sample " +
                                std::to_string(i));
        }
        batch_loss += ce.loss;
        tally.correct += argmax(logits.data()) == batch.labels[i];
        Tensor g = std::move(ce.grad_logits).reshaped(Shape{c});
        const float scale = 1.0f / static_cast<float>(n);
        for (auto& v : g.data()) v *= scale;
        backward_sample(net, trace, g, grads);
    }
    adam_step(net.parameters(), grads.tensors, adam, config.learning_rate);
    tally.loss_sum += batch_loss / static_cast<double>(n);
    tally.samples += n;
    ++tally.batches;
}

void eval_batch(const Network& net, const Batch& batch, Tally& tally, std::vector<std::size_t>* predictions) {
    SeededRng unused(0);
    const auto result = forward(net, batch.inputs, Mode::eval, unused);
    const std::size_t n = batch.labels.size(), c = net.class_count();
    const auto ce = softmax_cross_entropy(result.logits, batch.labels);
    tally.loss_sum += ce.loss * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = argmax(result.logits.data().subspan(i * c, c));
        tally.correct += p == batch.labels[i];
        if (predictions) predictions->push_back(p);
    }
    tally.samples += n;
    ++tally.batches;
}

EpochStats train_stats(const Tally& t) {
    if (t.batches == 0) return {};
    return {t.loss_sum / static_cast<double>(t.batches),
            static_cast<double>(t.correct) / static_cast<double>(t.samples)};
}

EpochStats eval_stats(const Tally& t) {
    if (t.samples == 0) return {};
    return {t.loss_sum / static_cast<double>(t.samples),
            static_cast<double>(t.correct) / static_cast<double>(t.samples)};
}

/// Decodes samples into normalized tensors, keeping them in memory while
/// the byte budget allows.
class ImageLoader {
public:
    ImageLoader(std::size_t size, std::size_t budget) : size_(size), budget_(budget) {}

    Batch load(std::span<const Sample> samples) {
        if (samples.empty()) throw ArgumentError("cannot load an empty batch");
        const std::size_t per = size_ * size_ * 3;
        Batch b{Tensor(Shape{samples.size(), size_, size_, 3}), {}};
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const Tensor& img = get(samples[i]);
            std::copy(img.data().begin(), img.data().end(), b.inputs.ptr() + i * per);
            b.labels.push_back(samples[i].class_index);
        }
        return b;
    }

private:
    const Tensor& get(const Sample& s) {
        const std::string key = s.path.string();
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        Tensor img = normalize(decode_resize(s.path, size_));
        const std::size_t bytes = img.size() * sizeof(float);
        if (used_ + bytes <= budget_) {
            used_ += bytes;
            return cache_.emplace(key, std::move(img)).first->second;
        }
        scratch_ = std::move(img);
        return scratch_;
    }

    std::size_t size_;
    std::size_t budget_;
    std::size_t used_ = 0;
    std::unordered_map<std::string, Tensor> cache_;
    Tensor scratch_;
};

}  // namespace

EpochStats run_epoch(Network& net, const std::vector<Batch>& batches, const TrainConfig& config, AdamState& adam,
                     SeededRng& rng) {
    Gradients grads = make_gradients(net);
    Tally tally;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        try {
            train_batch(net, batches[i], config, adam, rng, grads, tally);
        } catch (const ShapeError& e) {
            throw ShapeError("batch " + std::to_string(i) + ": " + e.what());
        }
    }
    return train_stats(tally);
}

EpochStats evaluate_epoch(const Network& net, const std::vector<Batch>& batches) {
    Tally tally;
    for (const auto& b : batches) eval_batch(net, b, tally, nullptr);
    return eval_stats(tally);
}

std::vector<std::size_t> predict_labels(const Network& net, const std::vector<Batch>& batches) {
    Tally tally;
    std::vector<std::size_t> out;
    for (const auto& b : batches) eval_batch(net, b, tally, &out);
    return out;
}

Network build_network(const TrainConfig& config, SeededRng& rng) {
    if (config.architecture == Architecture::paper) {
        return build_paper_network(&rng, config.dropout_conv, config.dropout_dense);
    }
    return build_desk_network(&rng, kClassCount, config.dropout_conv, config.dropout_dense);
}

FitResult fit(const DatasetManifest& manifest, const TrainConfig& config, const FitOptions& options) {
    config.validate();
    if (manifest.samples.empty()) throw ArgumentError("cannot fit on an empty manifest");
    const SeededRng root(config.seed);
    SeededRng init_rng = root.derive(1);
    SeededRng train_rng = root.derive(3);

    FitResult result{build_network(config, init_rng), {}, split(manifest.samples, config.train_fraction,
                                                               mix_seed(config.seed, 2))};
    Network& net = result.network;
    ImageLoader loader(architecture_image_size(config.architecture), options.cache_bytes);
    AdamState adam = make_adam_state(net);
    Gradients grads = make_gradients(net);
    const auto val_plan = batch_plan(result.split.val, config.batch_size, mix_seed(config.seed, 4));

    if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
    double best_val = -1.0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Tally train_tally;
        const auto plan = batch_plan(result.split.train, config.batch_size, mix_seed(config.seed, 1000 + epoch));
        for (const auto& group : plan) {
            const std::string where = "epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(train_tally.batches) + ": ";
            try {
                train_batch(net, loader.load(group), config, adam, train_rng, grads, train_tally);
            } catch (const TrainingError& e) {
                throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
            } catch (const DecodeError& e) {
                throw DecodeError(where + e.what());
            } catch (const ShapeError& e) {
                throw ShapeError(where + e.what());
            }
        }
        Tally val_tally;
        for (const auto& group : val_plan) eval_batch(net, loader.load(group), val_tally, nullptr);

        const EpochStats tr = train_stats(train_tally), va = eval_stats(val_tally);
        const EpochRecord rec{epoch, tr.loss, tr.accuracy, va.loss, va.accuracy};
        result.history.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);
        if (!options.checkpoint_dir.empty() && rec.val_accuracy > best_val) {
            best_val = rec.val_accuracy;
            save_checkpoint(net, options.checkpoint_dir / "best.pldc");
        }
    }
    if (!options.checkpoint_dir.empty()) save_checkpoint(net, options.checkpoint_dir / "final.pldc");
    return result;
}

// ---------------------------------------------------------------- history CSV

namespace {
constexpr const char* kHistoryHeader = "epoch,loss,accuracy,val_loss,val_accuracy";
}

std::string format_history_csv(const std::vector<EpochRecord>& records) {
    std::string out = std::string(kHistoryHeader) + "\n";
    char line[160];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, "%zu,%.4f,%.4f,%.4f,%.4f\n", r.epoch, r.loss, r.accuracy, r.val_loss,
                      r.val_accuracy);
        out += line;
    }
    return out;
}

void export_history_csv(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << format_history_csv(records);
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<EpochRecord> parse_history_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) {
        throw ArgumentError("history CSV must start with the header '" + std::string(kHistoryHeader) + "'");
    }
    std::vector<EpochRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream cs(line);
        for (std::string cell; std::getline(cs, cell, ',');) cells.push_back(cell);
        if (cells.size() != 5) throw ArgumentError("history CSV row " + std::to_string(row) + " needs 5 fields");
        try {
            out.push_back({std::stoul(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                           std::stod(cells[4])});
        } catch (const std::logic_error&) {
            throw ArgumentError("history CSV row " + std::to_string(row) + " is not numeric: " + line);
        }
    }
    return out;
}

}  // namespace leafnet
