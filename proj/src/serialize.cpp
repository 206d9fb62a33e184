#include "bidda/serialize.hpp"

#include <cstring>
#include <fstream>

#include "bidda/tensor.hpp"

namespace bidda {

namespace {
constexpr char kMagic[4] = {'B', 'D', 'A', 'C'};
constexpr uint32_t kVersion = 1;
}  // namespace

void write_array_container(const std::filesystem::path& path, const nlohmann::json& meta,
                           const std::vector<NamedArray>& arrays) {
    nlohmann::json header{{"meta", meta}, {"arrays", nlohmann::json::array()}};
    for (const auto& a : arrays)
        header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}});
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint file " + path.string());
    out.write(kMagic, 4);
    const uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), 4);
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& a : arrays)
        out.write(reinterpret_cast<const char*>(a.data.data()),
                  static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    if (!out) throw IoError("short write to checkpoint file " + path.string());
}

std::pair<nlohmann::json, std::vector<NamedArray>> read_array_container(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing checkpoint file " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a checkpoint container: " + path.string());
    uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    if (ver != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(ver) + " in " +
                      path.string());
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(hs);

    std::vector<NamedArray> arrays;
    for (const auto& j : header["arrays"]) {
        NamedArray a;
        a.name = j["name"].get<std::string>();
        a.shape = j["shape"].get<std::vector<int>>();
        size_t n = 1;
        for (int d : a.shape) n *= static_cast<size_t>(d);
        a.data.resize(n);
        in.read(reinterpret_cast<char*>(a.data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        arrays.push_back(std::move(a));
    }
    if (!in) throw IoError("truncated checkpoint container: " + path.string());
    return {header["meta"], std::move(arrays)};
}

}  // namespace bidda
