// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <thread>

#include "gradcheck.hpp"
#include "leafnet/eval.hpp"
#include "leafnet/image.hpp"
#include "leafnet/layers.hpp"
#include "leafnet/ops.hpp"
#include "leafnet/service.hpp"
#include "leafnet/train.hpp"

namespace fs = std::filesystem;
using namespace leafnet;
using leafnet::testing::dot;
using leafnet::testing::max_relative_error;
using leafnet::testing::numeric_gradient;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "leafnet_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

/// Frozen bundle of the full-size network, written once and shared.
const fs::path& full_bundle() {
    static const fs::path path = [] {
        SeededRng rng(17);
        const Network net = build_paper_network(&rng);
        export_frozen(net, class_table(), work_dir() / "full.pldm");
        return work_dir() / "full.pldm";
    }();
    return path;
}

// ---------------------------------------------------------------------------

struct Row {
    const char* name;
    Shape shape;
    std::size_t params;
};

Outcome architecture() {
    const std::vector<Row> expected = {
        {"conv2d", {256, 256, 32}, 896},       {"conv2d_1", {254, 254, 32}, 9248},
        {"max_pooling2d", {127, 127, 32}, 0},  {"conv2d_2", {127, 127, 64}, 18496},
        {"conv2d_3", {125, 125, 64}, 36928},   {"max_pooling2d_1", {62, 62, 64}, 0},
        {"conv2d_4", {62, 62, 128}, 73856},    {"conv2d_5", {60, 60, 128}, 147584},
        {"max_pooling2d_2", {30, 30, 128}, 0}, {"conv2d_6", {30, 30, 256}, 295168},
        {"conv2d_7", {28, 28, 256}, 590080},   {"max_pooling2d_3", {14, 14, 256}, 0},
        {"conv2d_8", {14, 14, 512}, 3277312},  {"conv2d_9", {10, 10, 512}, 6554112},
        {"max_pooling2d_4", {5, 5, 512}, 0},   {"dropout", {5, 5, 512}, 0},
        {"flatten", {12800}, 0},               {"dense", {1536}, 19662336},
        {"dropout_1", {1536}, 0},              {"Dense_1", {38}, 58406},
    };
    Outcome o;
    const auto t0 = Clock::now();
    const Summary s = summarize(build_paper_network());
    o.require(s.rows.size() == expected.size(), std::to_string(s.rows.size()) + " summary rows");
    for (std::size_t i = 0; i < std::min(s.rows.size(), expected.size()); ++i) {
        const auto& e = expected[i];
        o.require(s.rows[i].name == e.name && s.rows[i].output_shape == e.shape && s.rows[i].params == e.params,
                  "row " + std::to_string(i) + " is " + s.rows[i].name + " " + s.rows[i].output_shape.str() + " " +
                      std::to_string(s.rows[i].params));
    }
    o.require(s.total == 30724422 && s.trainable == 30724422 && s.non_trainable == 0,
              "totals " + std::to_string(s.total) + "/" + std::to_string(s.trainable) + "/" +
                  std::to_string(s.non_trainable));
    const double secs = seconds_since(t0);
    o.require(secs < 1.0, "took " + fmt("%.2f s", secs));
    if (o.pass) o.detail = "20 rows, 30,724,422 params, " + fmt("%.2f s", secs);
    return o;
}

// ---------------------------------------------------------------------------

void randomize(TensorD& t, SeededRng& rng) {
    for (auto& v : t.data()) v = rng.uniform(-1, 1);
}

/// Distinct values at least 0.05 apart and away from zero, so no finite
/// difference step crosses a ReLU kink or flips a pooling winner.
TensorD spaced(SeededRng& rng, const Shape& shape) {
    TensorD t(shape);
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = -1.0 + 0.05 * static_cast<double>(i) + 0.025;
    rng.shuffle(v);
    std::copy(v.begin(), v.end(), t.data().begin());
    return t;
}

Outcome gradients() {
    constexpr double tol = 1e-5;
    Outcome o;
    double worst = 0;
    auto check = [&](const std::string& what, const TensorD& analytic, const TensorD& numeric) {
        const double err = max_relative_error(analytic, numeric);
        worst = std::max(worst, err);
        o.require(err < tol, what + " error " + fmt("%.2e", err));
    };
    SeededRng rng(91);
    for (std::size_t k : {1, 2, 3, 5}) {
        for (Padding pad : {Padding::same, Padding::valid}) {
            const std::string tag = "conv k=" + std::to_string(k) + (pad == Padding::same ? " same" : " valid");
            BasicConv2D<double> conv(2, 3, k, pad);
            randomize(conv.weights, rng);
            randomize(conv.bias, rng);
            TensorD x(Shape{6, 7, 2});
            randomize(x, rng);
            TensorD up(conv.output_shape(x.shape()));
            randomize(up, rng);
            const auto g = conv_backward(conv, x, up);
            auto f = [&] { return dot(conv_forward(conv, x), up); };
            check(tag + " dx", g.grad_x, numeric_gradient(f, x));
            check(tag + " dw", g.grad_w, numeric_gradient(f, conv.weights));
            check(tag + " db", g.grad_b, numeric_gradient(f, conv.bias));
        }
    }
    {
        BasicDense<double> dense(7, 5);
        randomize(dense.weights, rng);
        randomize(dense.bias, rng);
        TensorD x(Shape{7}), up(Shape{5});
        randomize(x, rng);
        randomize(up, rng);
        const auto g = dense_backward(dense, x, up);
        auto f = [&] { return dot(dense_forward(dense, x), up); };
        check("dense dx", g.grad_x, numeric_gradient(f, x));
        check("dense dw", g.grad_w, numeric_gradient(f, dense.weights));
        check("dense db", g.grad_b, numeric_gradient(f, dense.bias));
    }
    {
        TensorD x = spaced(rng, Shape{5, 6, 1});
        TensorD up(Shape{2, 3, 1});
        randomize(up, rng);
        const TensorD analytic = maxpool_backward(maxpool_forward(x).mask, up);
        check("maxpool", analytic, numeric_gradient([&] { return dot(maxpool_forward(x).output, up); }, x));
    }
    {
        TensorD x = spaced(rng, Shape{40});
        TensorD up(Shape{40});
        randomize(up, rng);
        check("relu", relu_backward(x, up), numeric_gradient([&] { return dot(relu(x), up); }, x));
    }
    {
        TensorD logits(Shape{4, kClassCount});
        randomize(logits, rng);
        const std::vector<std::size_t> labels = {0, 7, 37, 12};
        const auto analytic = softmax_cross_entropy(logits, labels).grad_logits;
        check("softmax-CE", analytic,
              numeric_gradient([&] { return softmax_cross_entropy(logits, labels).loss; }, logits));
    }
    if (o.pass) o.detail = "conv k=1,2,3,5 same/valid, dense, maxpool, relu, softmax-CE; max rel err " + fmt("%.1e", worst);
    return o;
}

// ---------------------------------------------------------------------------

Outcome adjointness() {
    Outcome o;
    SeededRng rng(2718);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.index(5);
        const Padding pad = rng.bernoulli(0.5) ? Padding::same : Padding::valid;
        const std::size_t h = k + rng.index(8), w = k + rng.index(8), c = 1 + rng.index(5);
        const Tensor x = rng_uniform<float>(rng, Shape{h, w, c}, -1, 1);
        const ConvGeometry g = ConvGeometry::make(x.shape(), k, pad);
        const Tensor gc = rng_uniform<float>(rng, Shape{g.positions(), g.patch_size()}, -1, 1);
        const Tensor cols = im2col(x, k, pad);
        const Tensor back = col2im(gc, x.shape(), k, pad);
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < cols.size(); ++i) lhs += static_cast<double>(cols[i]) * gc[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * back[i];
        const double rel = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12});
        worst = std::max(worst, rel);
        o.require(rel < 1e-4, "shape " + x.shape().str() + " k=" + std::to_string(k) + " rel " + fmt("%.2e", rel));
    }
    if (o.pass) o.detail = "100 shapes, max rel diff " + fmt("%.1e", worst);
    return o;
}

// ---------------------------------------------------------------------------

Outcome full_network_smoke() {
    Outcome o;
    const auto t0 = Clock::now();
    SeededRng rng(3);
    const Network net = build_paper_network(&rng);
    const Tensor x = rng_uniform<float>(rng, Shape{256, 256, 3}, 0, 1);
    SampleTrace trace;
    const Tensor logits = forward_sample(net, x, Mode::train, rng, &trace);
    const Tensor probs = softmax(logits.reshaped(Shape{1, kClassCount}));
    const double sum = std::accumulate(probs.data().begin(), probs.data().end(), 0.0);
    const std::size_t label[] = {0};
    auto ce = softmax_cross_entropy(logits.reshaped(Shape{1, kClassCount}), label);
    Gradients grads = make_gradients(net);
    backward_sample(net, trace, std::move(ce.grad_logits).reshaped(Shape{kClassCount}), grads);
    bool finite = true;
    double norm = 0;
    for (const auto& g : grads.tensors) {
        for (float v : g.data()) {
            finite = finite && std::isfinite(v);
            norm += static_cast<double>(v) * v;
        }
    }
    const double secs = seconds_since(t0);
    o.require(std::abs(sum - 1.0) <= 1e-6, "probabilities sum to " + fmt("%.9f", sum));
    o.require(finite && norm > 0, "gradients not finite or all zero");
    o.require(secs < 60.0, "took " + fmt("%.1f s", secs));
    if (o.pass) o.detail = "sum " + fmt("%.9f", sum) + ", " + fmt("%.1f s", secs) + " including init";
    return o;
}

// ---------------------------------------------------------------------------

Outcome desk_learning() {
    Outcome o;
    const auto t0 = Clock::now();
    const fs::path data = work_dir() / "desk_data";
    generate_synthetic_dataset({4, 32, 0, 64}, data);
    const auto manifest = scan_manifest(data);

    TrainConfig cfg;  // learning rate, batch size, dropout and augmentation at their defaults
    cfg.architecture = Architecture::desk;
    cfg.seed = 0;
    const std::size_t n_train = split(manifest.samples, cfg.train_fraction, mix_seed(cfg.seed, 2)).train.size();
    const std::size_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
    cfg.epochs = 200 / steps_per_epoch;

    const auto result = fit(manifest, cfg);
    const std::size_t steps = cfg.epochs * steps_per_epoch;
    std::vector<Batch> train_batches;
    for (const auto& group : batch_plan(result.split.train, cfg.batch_size, 1)) {
        train_batches.push_back(load_batch(group, 64, nullptr, nullptr));
    }
    const double train_acc = evaluate_epoch(result.network, train_batches).accuracy;
    const double val_acc = result.history.empty() ? 0.0 : result.history.back().val_accuracy;
    const double secs = seconds_since(t0);
    o.require(steps <= 200, std::to_string(steps) + " optimizer steps");
    o.require(train_acc == 1.0, "training accuracy " + fmt("%.4f", train_acc));
    o.require(val_acc >= 0.9, "validation accuracy " + fmt("%.4f", val_acc));
    o.require(secs < 300.0, "took " + fmt("%.0f s", secs));
    if (o.pass) {
        o.detail = std::to_string(steps) + " steps, train acc " + fmt("%.4f", train_acc) + ", val acc " +
                   fmt("%.4f", val_acc) + ", " + fmt("%.0f s", secs);
    }
    return o;
}

// ---------------------------------------------------------------------------

Outcome metrics_oracle() {
    Outcome o;
    SeededRng rng(77);
    for (int trial = 0; trial < 1000 && o.pass; ++trial) {
        const std::size_t k = 2 + rng.index(kClassCount - 1), n = 1 + rng.index(300);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.index(k);
            p[i] = rng.bernoulli(0.7) ? t[i] : rng.index(k);
        }
        const auto r = compute_metrics(confusion(t, p, k));
        std::size_t correct = 0, present = 0;
        double mp = 0, mr = 0, mf = 0;
        for (std::size_t i = 0; i < n; ++i) correct += t[i] == p[i];
        for (std::size_t c = 0; c < k; ++c) {
            std::uint64_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tp += t[i] == c && p[i] == c;
                fp += t[i] != c && p[i] == c;
                fn += t[i] == c && p[i] != c;
            }
            if (tp + fp + fn == 0) continue;
            ++present;
            const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
            const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
            const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            o.require(r.per_class[c].precision == prec && r.per_class[c].recall == rec && r.per_class[c].f1 == f1,
                      "trial " + std::to_string(trial) + " class " + std::to_string(c));
            mp += prec;
            mr += rec;
            mf += f1;
        }
        const auto np = static_cast<double>(present);
        o.require(r.accuracy == static_cast<double>(correct) / static_cast<double>(n) && r.macro_precision == mp / np &&
                      r.macro_recall == mr / np && r.macro_f1 == mf / np,
                  "trial " + std::to_string(trial) + " aggregates");
    }
    std::vector<std::size_t> labels(380);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % kClassCount;
    const auto perfect = compute_metrics(confusion(labels, labels, kClassCount));
    o.require(perfect.macro_precision == 1.0 && perfect.macro_recall == 1.0 && perfect.macro_f1 == 1.0,
              "perfect predictions not scored 1.0");
    o.require(format_percent(0.9817) == "98.17 %", "formatted as '" + format_percent(0.9817) + "'");
    if (o.pass) o.detail = "1000 random label sets exact; perfect = 1.0; '" + format_percent(0.9817) + "'";
    return o;
}

// ---------------------------------------------------------------------------

Outcome serialization() {
    Outcome o;
    SeededRng rng(404);
    const Network net = build_desk_network(&rng);
    const Tensor inputs = rng_uniform<float>(rng, Shape{100, 64, 64, 3}, 0, 1);
    const Tensor expected = predict(net, inputs);
    save_checkpoint(net, work_dir() / "desk.pldc");
    o.require(predict(load_checkpoint(work_dir() / "desk.pldc"), inputs) == expected, "checkpoint predictions differ");
    export_frozen(net, class_table(), work_dir() / "desk.pldm");
    o.require(load_frozen(work_dir() / "desk.pldm").predict(inputs) == expected, "frozen predictions differ");

    const auto bytes = fs::file_size(full_bundle());
    const double mb = static_cast<double>(bytes) / 1e6;
    o.require(std::abs(mb - 122.9) <= 1.0, "full bundle is " + fmt("%.2f MB", mb));
    const FrozenModel full = load_frozen(full_bundle());
    o.require(full.network.param_count() == 30724422, "full bundle reloads with wrong parameter count");
    if (o.pass) o.detail = "100 inputs bit-identical; full bundle " + std::to_string(bytes) + " bytes (" + fmt("%.2f MB)", mb);
    return o;
}

// ---------------------------------------------------------------------------

Outcome determinism() {
    Outcome o;
    const fs::path data = work_dir() / "det_data";
    generate_synthetic_dataset({4, 8, 9, 64}, data);
    const auto manifest = scan_manifest(data);
    TrainConfig cfg;
    cfg.architecture = Architecture::desk;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 1234;
    const auto a = fit(manifest, cfg), b = fit(manifest, cfg);
    o.require(a.history.size() == 3 && a.history == b.history, "epoch records differ");
    const auto pa = a.network.parameters(), pb = b.network.parameters();
    bool same = pa.size() == pb.size();
    for (std::size_t i = 0; same && i < pa.size(); ++i) {
        same = pa[i]->size() == pb[i]->size() &&
               std::memcmp(pa[i]->ptr(), pb[i]->ptr(), pa[i]->size() * sizeof(float)) == 0;
    }
    o.require(same, "final weights differ");
    if (o.pass) o.detail = "3 epochs with dropout and augmentation, records and " + std::to_string(a.network.param_count()) + " weights bit-identical";
    return o;
}

// ---------------------------------------------------------------------------

Outcome service_contract() {
    Outcome o;
    auto model = std::make_shared<const FrozenModel>(load_frozen(full_bundle()));
    const InferenceService service(ServiceConfig{}, model);
    httplib::Server server;
    service.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) return {false, "cannot bind a local port"};
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);

    const auto png = encode_png(synthetic_image(2, 4, 0, 5, 256));
    const auto t0 = Clock::now();
    auto res = client.Post("/predict", std::string(png.begin(), png.end()), "image/png");
    const double secs = seconds_since(t0);
    if (!res) {
        server.stop();
        thread.join();
        return {false, "no response from /predict"};
    }
    o.require(res->status == 200, "/predict status " + std::to_string(res->status));
    o.require(secs < 2.0, "/predict took " + fmt("%.2f s", secs));
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    for (const char* key : {"class_index", "plant", "condition", "healthy", "confidence", "plant_emoji",
                            "status_emoji", "status_color", "top_k"}) {
        o.require(j.is_object() && j.contains(key), std::string("missing field ") + key);
    }

    std::size_t healthy = 0;
    for (const auto& c : class_table()) {
        const auto d = class_display(c);
        const bool ok = c.healthy ? (d.status_color == "green" && d.status_emoji == "🌿")
                                  : (d.status_color == "red" && d.status_emoji == "🦠");
        o.require(ok, "display of " + c.directory_name);
        healthy += c.healthy;
    }
    o.require(healthy == 12, std::to_string(healthy) + " healthy classes in the table");

    auto bad = client.Post("/predict", "definitely not an image", "application/octet-stream");
    o.require(bad && bad->status == 400, "malformed body status " + std::to_string(bad ? bad->status : -1));

    auto classes = client.Get("/classes");
    std::size_t records = 0, healthy_flags = 0;
    if (classes && classes->status == 200) {
        const auto list = nlohmann::json::parse(classes->body, nullptr, false);
        if (list.is_array()) {
            records = list.size();
            for (const auto& c : list) healthy_flags += c.value("healthy", false);
        }
    }
    o.require(records == 38 && healthy_flags == 12,
              "/classes returned " + std::to_string(records) + " records, " + std::to_string(healthy_flags) + " healthy");
    server.stop();
    thread.join();
    if (o.pass) o.detail = "/predict 200 in " + fmt("%.2f s", secs) + ", 38 display mappings, 400 on garbage, /classes 38/12";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"architecture conformance", architecture},
        {"gradient correctness", gradients},
        {"im2col/col2im adjointness", adjointness},
        {"full-network smoke", full_network_smoke},
        {"desk-scale learning", desk_learning},
        {"metrics oracle", metrics_oracle},
        {"serialization", serialization},
        {"determinism", determinism},
        {"service contract", service_contract},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s  %-26s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(work_dir());
    return failures == 0 ? 0 : 1;
}
