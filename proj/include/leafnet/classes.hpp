#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace leafnet {

inline constexpr std::size_t kClassCount = 38;

/// One output class. `directory_name` is the folder name used by the public
/// dataset; class indices follow the alphabetical order of those folders.
struct ClassInfo {
    std::size_t class_index = 0;
    std::string plant;
    std::string condition;
    bool healthy = false;
    std::string directory_name;
    std::string plant_emoji;

    friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

/// Built-in table of the 38 classes.
const std::vector<ClassInfo>& class_table();

/// Emoji for a plant name, or the seedling fallback for plants without one.
std::string plant_emoji_for(std::string_view plant);

/// Case-insensitive lookup by dataset directory name.
std::optional<std::size_t> find_class_by_directory(std::string_view directory_name);

void to_json(nlohmann::json& j, const ClassInfo& c);
void from_json(const nlohmann::json& j, ClassInfo& c);

/// Reads a JSON array of class records and checks indices are 0..n-1 in order.
std::vector<ClassInfo> load_class_metadata(const std::filesystem::path& path);
void save_class_metadata(const std::vector<ClassInfo>& classes, const std::filesystem::path& path);

}  // namespace leafnet
