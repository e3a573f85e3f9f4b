#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "leafnet/classes.hpp"
#include "leafnet/model.hpp"

namespace httplib {
class Server;
}

namespace leafnet {

struct ClassDisplay {
    std::string plant_emoji;
    std::string status_emoji;  // 🌿 healthy, 🦠 diseased
    std::string status_color;  // "green" or "red"
};

ClassDisplay class_display(const ClassInfo& info);

struct RankedClass {
    std::size_t class_index = 0;
    std::string plant;
    std::string condition;
    double probability = 0.0;
};

struct Prediction {
    std::size_t class_index = 0;
    std::string plant;
    std::string condition;
    bool healthy = false;
    double confidence = 0.0;
    std::string plant_emoji;
    std::string status_emoji;
    std::string status_color;
    std::vector<RankedClass> top_k;  // descending probability
    std::vector<double> probabilities;
};

nlohmann::json to_json(const Prediction& p);

/// Builds a prediction from one probability row. Ties keep the lower index
/// first.
Prediction make_prediction(std::span<const float> probabilities, const std::vector<ClassInfo>& classes,
                           std::size_t top_k);

/// Decode, resize to the model input, normalize, forward. Throws DecodeError
/// for bytes that are not a readable PNG or JPEG.
Prediction predict_image(const FrozenModel& model, std::span<const std::uint8_t> bytes, std::size_t top_k);

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;
    std::filesystem::path model_path;
    std::size_t max_upload_bytes = std::size_t{10} << 20;
    std::size_t top_k = 5;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Endpoint logic independent of the HTTP server. The model is shared
/// immutably between requests.
class InferenceService {
public:
    explicit InferenceService(ServiceConfig config, std::shared_ptr<const FrozenModel> model = nullptr);

    bool has_model() const noexcept { return model_ != nullptr; }
    const ServiceConfig& config() const noexcept { return config_; }

    /// 200 with a Prediction, 400 undecodable, 413 oversized, 503 no model.
    HttpResponse handle_predict(std::span<const std::uint8_t> body) const;
    HttpResponse handle_classes() const;
    HttpResponse handle_health() const;

    /// Registers POST /predict (raw body or multipart field "image"),
    /// GET /classes and GET /health.
    void mount(httplib::Server& server) const;

private:
    ServiceConfig config_;
    std::shared_ptr<const FrozenModel> model_;
};

/// Loads the model named in the config and serves until the process stops.
/// Returns nonzero when the port cannot be bound.
int run_service(const ServiceConfig& config);

}  // namespace leafnet
