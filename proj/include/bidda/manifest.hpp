#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "bidda/tensor.hpp"

namespace bidda {

std::string code_version();
uint64_t stable_hash(const std::string& s);
void write_manifest(const std::filesystem::path& dir, const nlohmann::json& config,
                    uint64_t seed);

}  // namespace bidda
