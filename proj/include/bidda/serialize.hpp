#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace bidda {

struct NamedArray {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

// Versioned container: magic + version, JSON header describing the arrays,
// then raw little-endian float64 payloads in header order.
void write_array_container(const std::filesystem::path& path, const nlohmann::json& meta,
                           const std::vector<NamedArray>& arrays);
std::pair<nlohmann::json, std::vector<NamedArray>> read_array_container(
    const std::filesystem::path& path);

}  // namespace bidda
