#include "bidda/manifest.hpp"

#include <fstream>

namespace bidda {

std::string code_version() { return "bidda 0.1.0"; }

// FNV-1a over the canonical serialized config; stable across runs.
uint64_t stable_hash(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& config,
                    uint64_t seed) {
    nlohmann::json m{{"code_version", code_version()},
                     {"seed", seed},
                     {"config_hash", stable_hash(config.dump())}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << m.dump(2) << "\n";
}

}  // namespace bidda
