#include "leafnet/classes.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace leafnet {
namespace {

struct Row {
    const char* plant;
    const char* condition;
    const char* directory;
};

constexpr Row kRows[] = {
    {"Apple", "Apple Scab", "Apple___Apple_scab"},
    {"Apple", "Black Rot", "Apple___Black_rot"},
    {"Apple", "Cedar Apple Rust", "Apple___Cedar_apple_rust"},
    {"Apple", "Healthy", "Apple___healthy"},
    {"Blueberry", "Healthy", "Blueberry___healthy"},
    {"Cherry", "Powdery Mildew", "Cherry_(including_sour)___Powdery_mildew"},
    {"Cherry", "Healthy", "Cherry_(including_sour)___healthy"},
    {"Corn", "Gray Leaf Spot", "Corn_(maize)___Cercospora_leaf_spot Gray_leaf_spot"},
    {"Corn", "Common Rust", "Corn_(maize)___Common_rust_"},
    {"Corn", "Northern Leaf Blight", "Corn_(maize)___Northern_Leaf_Blight"},
    {"Corn", "Healthy", "Corn_(maize)___healthy"},
    {"Grape", "Black Rot", "Grape___Black_rot"},
    {"Grape", "Black Measles (Esca)", "Grape___Esca_(Black_Measles)"},
    {"Grape", "Leaf Blight", "Grape___Leaf_blight_(Isariopsis_Leaf_Spot)"},
    {"Grape", "Healthy", "Grape___healthy"},
    {"Orange", "Citrus Greening", "Orange___Haunglongbing_(Citrus_greening)"},
    {"Peach", "Bacterial Spot", "Peach___Bacterial_spot"},
    {"Peach", "Healthy", "Peach___healthy"},
    {"Bell Pepper", "Bacterial Spot", "Pepper,_bell___Bacterial_spot"},
    {"Bell Pepper", "Healthy", "Pepper,_bell___healthy"},
    {"Potato", "Early Blight", "Potato___Early_blight"},
    {"Potato", "Late Blight", "Potato___Late_blight"},
    {"Potato", "Healthy", "Potato___healthy"},
    {"Raspberry", "Healthy", "Raspberry___healthy"},
    {"Soybean", "Healthy", "Soybean___healthy"},
    {"Squash", "Powdery Mildew", "Squash___Powdery_mildew"},
    {"Strawberry", "Leaf Scorch", "Strawberry___Leaf_scorch"},
    {"Strawberry", "Healthy", "Strawberry___healthy"},
    {"Tomato", "Bacterial Spot", "Tomato___Bacterial_spot"},
    {"Tomato", "Early Blight", "Tomato___Early_blight"},
    {"Tomato", "Late Blight", "Tomato___Late_blight"},
    {"Tomato", "Leaf Mold", "Tomato___Leaf_Mold"},
    {"Tomato", "Septoria Leaf Spot", "Tomato___Septoria_leaf_spot"},
    {"Tomato", "Spider Mites", "Tomato___Spider_mites Two-spotted_spider_mite"},
    {"Tomato", "Target Spot", "Tomato___Target_Spot"},
    {"Tomato", "Tomato Yellow Leaf Curl Virus", "Tomato___Tomato_Yellow_Leaf_Curl_Virus"},
    {"Tomato", "Tomato Mosaic Virus", "Tomato___Tomato_mosaic_virus"},
    {"Tomato", "Healthy", "Tomato___healthy"},
};
static_assert(std::size(kRows) == kClassCount);

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

std::string plant_emoji_for(std::string_view plant) {
    static const std::pair<std::string_view, std::string_view> table[] = {
        {"Tomato", "🍅"}, {"Apple", "🍏"},  {"Corn", "🌽"},        {"Grape", "🍇"},
        {"Strawberry", "🍓"}, {"Peach", "🍑"}, {"Orange", "🍊"},   {"Potato", "🥔"},
        {"Bell Pepper", "🫑"}, {"Blueberry", "🫐"}, {"Cherry", "🍒"},
    };
    for (const auto& [name, emoji] : table) {
        if (name == plant) return std::string(emoji);
    }
    return "🌱";
}

const std::vector<ClassInfo>& class_table() {
    static const std::vector<ClassInfo> table = [] {
        std::vector<ClassInfo> out;
        for (std::size_t i = 0; i < kClassCount; ++i) {
            const Row& r = kRows[i];
            const bool healthy = std::string_view(r.condition) == "Healthy";
            out.push_back({i, r.plant, r.condition, healthy, r.directory, plant_emoji_for(r.plant)});
        }
        return out;
    }();
    return table;
}

std::optional<std::size_t> find_class_by_directory(std::string_view directory_name) {
    const std::string key = lower(directory_name);
    for (const auto& c : class_table()) {
        if (lower(c.directory_name) == key) return c.class_index;
    }
    return std::nullopt;
}

void to_json(nlohmann::json& j, const ClassInfo& c) {
    j = nlohmann::json{{"class_index", c.class_index}, {"plant", c.plant},
                       {"condition", c.condition},     {"healthy", c.healthy},
                       {"directory_name", c.directory_name}, {"plant_emoji", c.plant_emoji}};
}

void from_json(const nlohmann::json& j, ClassInfo& c) {
    j.at("class_index").get_to(c.class_index);
    j.at("plant").get_to(c.plant);
    j.at("condition").get_to(c.condition);
    j.at("healthy").get_to(c.healthy);
    j.at("directory_name").get_to(c.directory_name);
    j.at("plant_emoji").get_to(c.plant_emoji);
}

std::vector<ClassInfo> load_class_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open class metadata " + path.string());
    const auto classes = nlohmann::json::parse(in).get<std::vector<ClassInfo>>();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].class_index != i) {
            throw std::runtime_error("class metadata " + path.string() + ": record " + std::to_string(i) +
                                     " has class_index " + std::to_string(classes[i].class_index));
        }
    }
    return classes;
}

void save_class_metadata(const std::vector<ClassInfo>& classes, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write class metadata " + path.string());
    out << nlohmann::json(classes).dump(2) << '\n';
}

}  // namespace leafnet
