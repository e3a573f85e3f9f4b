// Command-line front end: train, eval, predict, export, serve, synth, summary.
// Exit status 0 on success, 1 for usage errors, 2 for runtime failures.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <unistd.h>

#include "leafnet/data.hpp"
#include "leafnet/eval.hpp"
#include "leafnet/image.hpp"
#include "leafnet/service.hpp"
#include "leafnet/train.hpp"

namespace fs = std::filesystem;
using namespace leafnet;

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

/// Usage problem detected after parsing, e.g. a missing model path.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string default_model() {
    const char* env = std::getenv("LEAFNET_MODEL");
    return env ? env : "";
}

fs::path require_model(const std::string& path) {
    if (path.empty()) throw UsageError("no model given; pass --model or set LEAFNET_MODEL");
    return path;
}

const std::map<std::string, Architecture> kArchitectures = {{"paper", Architecture::paper},
                                                            {"desk", Architecture::desk}};

struct TrainArgs {
    std::string data, out = "run";
    TrainConfig config;
    bool no_augment = false;
    bool validate_images = false;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg = a.config;
    cfg.use_augmentation = !a.no_augment;
    const auto manifest = scan_manifest(a.data, ScanOptions{a.validate_images});
    for (const auto& w : manifest.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("%zu images in %zu classes; %s network, %zu epochs, lr %g, batch %zu\n", manifest.samples.size(),
                manifest.matched_classes.size(), architecture_name(cfg.architecture), cfg.epochs, cfg.learning_rate,
                cfg.batch_size);

    FitOptions opts;
    opts.checkpoint_dir = a.out;
    opts.on_epoch = [&](const EpochRecord& r) {
        std::printf("Epoch %zu/%zu - loss: %.4f - accuracy: %.4f - val_loss: %.4f - val_accuracy: %.4f\n", r.epoch,
                    cfg.epochs, r.loss, r.accuracy, r.val_loss, r.val_accuracy);
        std::fflush(stdout);
    };
    const auto result = fit(manifest, cfg, opts);
    for (const auto& w : result.split.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    export_history_csv(result.history, fs::path(a.out) / "history.csv");
    std::printf("wrote %s\n", (fs::path(a.out) / "history.csv").c_str());
    return 0;
}

struct EvalArgs {
    std::string model = default_model(), data, out, subset = "val";
    std::uint64_t seed = 0;
    double train_fraction = 0.75;
    std::size_t batch = 32;
};

int cmd_eval(const EvalArgs& a) {
    const FrozenModel model = load_inference_model(require_model(a.model));
    const auto manifest = scan_manifest(a.data);
    std::vector<Sample> samples = manifest.samples;
    if (a.subset == "val") samples = split(manifest.samples, a.train_fraction, mix_seed(a.seed, 2)).val;
    if (samples.empty()) throw ArgumentError("no samples to evaluate");

    std::vector<std::size_t> truth, predicted;
    const std::size_t size = model.network.input_shape()[0];
    for (std::size_t start = 0; start < samples.size(); start += a.batch) {
        const std::size_t n = std::min(a.batch, samples.size() - start);
        const Batch b = load_batch(std::span<const Sample>(samples).subspan(start, n), size, nullptr, nullptr);
        const Tensor probs = model.predict(b.inputs);
        const std::size_t c = model.classes.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = probs.data().subspan(i * c, c);
            predicted.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
            truth.push_back(b.labels[i]);
        }
    }
    const auto cm = confusion(truth, predicted, model.classes.size());
    const auto report = compute_metrics(cm);
    std::vector<std::string> names;
    for (const auto& c : model.classes) names.push_back(c.plant + " / " + c.condition);
    std::printf("%zu samples (%s)\n\n%s", samples.size(), a.subset.c_str(), format_report(report, names).c_str());
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        export_confusion_csv(cm, names, fs::path(a.out) / "confusion.csv");
        std::ofstream(fs::path(a.out) / "metrics.json") << report_to_json(report, names).dump(2) << "\n";
        std::printf("wrote %s and %s\n", (fs::path(a.out) / "confusion.csv").c_str(),
                    (fs::path(a.out) / "metrics.json").c_str());
    }
    return 0;
}

struct PredictArgs {
    std::string model = default_model();
    std::vector<std::string> images;
    std::size_t top_k = 5;
    bool json = false;
    bool no_color = false;
};

int cmd_predict(const PredictArgs& a) {
    const FrozenModel model = load_inference_model(require_model(a.model));
    const bool color = !a.no_color && isatty(STDOUT_FILENO);
    int status = 0;
    for (const auto& path : a.images) {
        try {
            const auto p = predict_image(model, read_file_bytes(path), a.top_k);
            if (a.json) {
                auto j = to_json(p);
                j["path"] = path;
                j.erase("probabilities");
                std::printf("%s\n", j.dump().c_str());
                continue;
            }
            const char* on = color ? (p.healthy ? "\033[32m" : "\033[31m") : "";
            const char* off = color ? "\033[0m" : "";
            std::printf("%s%s %s  %s %-28s %6.2f %%  %s%s\n", on, p.status_emoji.c_str(), p.plant_emoji.c_str(),
                        p.plant.c_str(), p.condition.c_str(), p.confidence * 100.0, path.c_str(), off);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "%s: %s\n", path.c_str(), e.what());
            status = kFailure;
        }
    }
    return status;
}

struct ExportArgs {
    std::string checkpoint, out, classes;
};

int cmd_export(const ExportArgs& a) {
    const Network net = load_checkpoint(a.checkpoint);
    const auto classes = a.classes.empty() ? class_table() : load_class_metadata(a.classes);
    export_frozen(net, classes, a.out);
    std::printf("wrote %s (%ju bytes, %zu parameters)\n", a.out.c_str(),
                static_cast<std::uintmax_t>(fs::file_size(a.out)), net.param_count());
    return 0;
}

int cmd_serve(ServiceConfig cfg, const std::string& model, double max_upload_mb) {
    cfg.model_path = require_model(model);
    cfg.max_upload_bytes = static_cast<std::size_t>(max_upload_mb * 1024 * 1024);
    return run_service(cfg) == 0 ? 0 : kFailure;
}

int cmd_synth(const SyntheticOptions& opts, const std::string& out) {
    const auto files = generate_synthetic_dataset(opts, out);
    std::printf("wrote %zu images in %zu classes to %s\n", files.size(), opts.n_classes, out.c_str());
    return 0;
}

int cmd_summary(Architecture arch) {
    const Network net = arch == Architecture::paper ? build_paper_network() : build_desk_network();
    std::printf("%s", format_summary(summarize(net)).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leaf disease classifier: training, evaluation and inference"};
    app.require_subcommand(1);
    int status = 0;

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a network on a class-per-directory image tree");
    t->add_option("--data", train.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
    t->add_option("--out", train.out, "Directory for checkpoints and history.csv")->capture_default_str();
    t->add_option("--epochs", train.config.epochs)->capture_default_str();
    t->add_option("--lr", train.config.learning_rate)->capture_default_str();
    t->add_option("--batch", train.config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    t->add_option("--seed", train.config.seed)->capture_default_str();
    t->add_option("--train-fraction", train.config.train_fraction)->capture_default_str();
    t->add_option("--dropout-conv", train.config.dropout_conv)->capture_default_str();
    t->add_option("--dropout-dense", train.config.dropout_dense)->capture_default_str();
    t->add_option("--arch", train.config.architecture, "paper (256x256) or desk (64x64)")
        ->transform(CLI::CheckedTransformer(kArchitectures, CLI::ignore_case));
    t->add_flag("--no-augment", train.no_augment, "Disable rotation, flip and zoom");
    t->add_flag("--validate-images", train.validate_images, "Decode every image while scanning");
    t->callback([&] { status = cmd_train(train); });

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Confusion matrix and precision/recall/F1 on a dataset");
    e->add_option("--model", ev.model, "Frozen bundle or checkpoint (default $LEAFNET_MODEL)");
    e->add_option("--data", ev.data, "Dataset root")->required()->check(CLI::ExistingDirectory);
    e->add_option("--out", ev.out, "Directory for confusion.csv and metrics.json");
    e->add_option("--subset", ev.subset, "val: the validation split train used; all: every image")
        ->check(CLI::IsMember({"val", "all"}))
        ->capture_default_str();
    e->add_option("--seed", ev.seed, "Seed the model was trained with")->capture_default_str();
    e->add_option("--train-fraction", ev.train_fraction)->capture_default_str();
    e->add_option("--batch", ev.batch)->capture_default_str()->check(CLI::PositiveNumber);
    e->callback([&] { status = cmd_eval(ev); });

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Diagnose leaf images");
    p->add_option("--model", pr.model, "Frozen bundle or checkpoint (default $LEAFNET_MODEL)");
    p->add_option("images", pr.images, "PNG or JPEG files")->required();
    p->add_option("--top-k", pr.top_k)->capture_default_str();
    p->add_flag("--json", pr.json, "One JSON object per line");
    p->add_flag("--no-color", pr.no_color);
    p->callback([&] { status = cmd_predict(pr); });

    ExportArgs ex;
    auto* x = app.add_subcommand("export", "Freeze a checkpoint into an inference bundle");
    x->add_option("--checkpoint", ex.checkpoint)->required()->check(CLI::ExistingFile);
    x->add_option("--out", ex.out, "Output bundle, e.g. model.pldm")->required();
    x->add_option("--classes", ex.classes, "Class metadata JSON (default: built-in 38-class table)")
        ->check(CLI::ExistingFile);
    x->callback([&] { status = cmd_export(ex); });

    ServiceConfig serve;
    std::string serve_model = default_model();
    double max_upload_mb = 10;
    auto* s = app.add_subcommand("serve", "Run the HTTP inference service");
    s->add_option("--model", serve_model, "Frozen bundle or checkpoint (default $LEAFNET_MODEL)");
    s->add_option("--host", serve.host)->capture_default_str();
    s->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(1, 65535));
    s->add_option("--max-upload-mb", max_upload_mb)->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--top-k", serve.top_k)->capture_default_str();
    s->callback([&] { status = cmd_serve(serve, serve_model, max_upload_mb); });

    SyntheticOptions synth;
    std::string synth_out;
    auto* y = app.add_subcommand("synth", "Write a procedural class-per-directory dataset");
    y->add_option("--classes", synth.n_classes)->capture_default_str()->check(CLI::Range(1, 38));
    y->add_option("--per-class", synth.n_per_class)->capture_default_str()->check(CLI::PositiveNumber);
    y->add_option("--seed", synth.seed)->capture_default_str();
    y->add_option("--size", synth.image_size)->capture_default_str()->check(CLI::PositiveNumber);
    y->add_option("--out", synth_out)->required();
    y->callback([&] { status = cmd_synth(synth, synth_out); });

    Architecture summary_arch = Architecture::paper;
    auto* m = app.add_subcommand("summary", "Print the layer table of a network");
    m->add_option("--arch", summary_arch)->transform(CLI::CheckedTransformer(kArchitectures, CLI::ignore_case));
    m->callback([&] { status = cmd_summary(summary_arch); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : kUsage;
    } catch (const UsageError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return kUsage;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return kFailure;
    }
    return status;
}
