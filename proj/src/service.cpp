#include "leafnet/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "leafnet/data.hpp"
#include "leafnet/image.hpp"

namespace leafnet {

ClassDisplay class_display(const ClassInfo& info) {
    ClassDisplay d;
    d.plant_emoji = info.plant_emoji.empty() ? plant_emoji_for(info.plant) : info.plant_emoji;
    d.status_emoji = info.healthy ? "🌿" : "🦠";
    d.status_color = info.healthy ? "green" : "red";
    return d;
}

nlohmann::json to_json(const Prediction& p) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& r : p.top_k) {
        top.push_back({{"class_index", r.class_index},
                       {"plant", r.plant},
                       {"condition", r.condition},
                       {"probability", r.probability}});
    }
    return {{"class_index", p.class_index},   {"plant", p.plant},
            {"condition", p.condition},       {"healthy", p.healthy},
            {"confidence", p.confidence},     {"plant_emoji", p.plant_emoji},
            {"status_emoji", p.status_emoji}, {"status_color", p.status_color},
            {"top_k", top},                   {"probabilities", p.probabilities}};
}

Prediction make_prediction(std::span<const float> probabilities, const std::vector<ClassInfo>& classes,
                           std::size_t top_k) {
    if (probabilities.empty() || probabilities.size() != classes.size()) {
        throw ArgumentError("prediction has " + std::to_string(probabilities.size()) + " probabilities for " +
                            std::to_string(classes.size()) + " classes");
    }
    std::vector<std::size_t> order(probabilities.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probabilities[a] > probabilities[b]; });

    const ClassInfo& best = classes[order[0]];
    const ClassDisplay display = class_display(best);
    Prediction p;
    p.class_index = order[0];
    p.plant = best.plant;
    p.condition = best.condition;
    p.healthy = best.healthy;
    p.confidence = probabilities[order[0]];
    p.plant_emoji = display.plant_emoji;
    p.status_emoji = display.status_emoji;
    p.status_color = display.status_color;
    p.probabilities.assign(probabilities.begin(), probabilities.end());
    for (std::size_t i = 0; i < std::min(top_k, order.size()); ++i) {
        const ClassInfo& c = classes[order[i]];
        p.top_k.push_back({order[i], c.plant, c.condition, probabilities[order[i]]});
    }
    return p;
}

Prediction predict_image(const FrozenModel& model, std::span<const std::uint8_t> bytes, std::size_t top_k) {
    const Shape& in = model.network.input_shape();
    const Tensor img = normalize(resize_bilinear(decode_image(bytes), in[0], in[1]));
    const Tensor probs = model.predict(img);
    return make_prediction(probs.data(), model.classes, top_k);
}

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
    return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& message) {
    return json_response(status, {{"error", message}, {"status", status}});
}

void send(httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

}  // namespace

InferenceService::InferenceService(ServiceConfig config, std::shared_ptr<const FrozenModel> model)
    : config_(std::move(config)), model_(std::move(model)) {}

HttpResponse InferenceService::handle_predict(std::span<const std::uint8_t> body) const {
    if (!model_) return error_response(503, "no model loaded");
    if (body.size() > config_.max_upload_bytes) {
        return error_response(413, "upload of " + std::to_string(body.size()) + " bytes exceeds the limit of " +
                                       std::to_string(config_.max_upload_bytes));
    }
    try {
        return json_response(200, to_json(predict_image(*model_, body, config_.top_k)));
    } catch (const DecodeError& e) {
        return error_response(400, std::string("decode failure: ") + e.what());
    }
}

HttpResponse InferenceService::handle_classes() const {
    const auto& classes = model_ ? model_->classes : class_table();
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : classes) {
        nlohmann::json j = c;
        const ClassDisplay d = class_display(c);
        j["status_emoji"] = d.status_emoji;
        j["status_color"] = d.status_color;
        out.push_back(std::move(j));
    }
    return json_response(200, out);
}

HttpResponse InferenceService::handle_health() const {
    return json_response(200, {{"status", "ok"},
                               {"model_loaded", has_model()},
                               {"classes", model_ ? model_->classes.size() : class_table().size()}});
}

void InferenceService::mount(httplib::Server& server) const {
    // The transport limit leaves headroom for multipart framing; the upload
    // limit itself is enforced in handle_predict.
    server.set_payload_max_length(config_.max_upload_bytes + (std::size_t{1} << 20));
    server.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
        if (req.is_multipart_form_data()) {
            if (!req.has_file("image")) {
                send(res, error_response(400, "multipart request has no 'image' field"));
                return;
            }
            const std::string content = req.get_file_value("image").content;
            send(res, handle_predict({reinterpret_cast<const std::uint8_t*>(content.data()), content.size()}));
            return;
        }
        send(res, handle_predict({reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size()}));
    });
    server.Get("/classes", [this](const httplib::Request&, httplib::Response& res) { send(res, handle_classes()); });
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) { send(res, handle_health()); });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            res.set_content(nlohmann::json{{"error", httplib::status_message(res.status)}, {"status", res.status}}.dump(),
                            "application/json");
        }
    });
}

int run_service(const ServiceConfig& config) {
    auto model = std::make_shared<const FrozenModel>(load_frozen(config.model_path));
    InferenceService service(config, model);
    httplib::Server server;
    service.mount(server);
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        std::fprintf(stderr, "%s %s -> %d\n", req.method.c_str(), req.path.c_str(), res.status);
    });
    std::fprintf(stderr, "serving %s on %s:%d\n", config.model_path.string().c_str(), config.host.c_str(),
                 config.port);
    if (!server.listen(config.host, config.port)) {
        std::fprintf(stderr, "cannot listen on %s:%d\n", config.host.c_str(), config.port);
        return 1;
    }
    return 0;
}

}  // namespace leafnet
