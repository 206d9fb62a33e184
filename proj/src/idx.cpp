#include <fstream>

#include "bidda/datasets.hpp"

namespace bidda {

namespace {

uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | b[3];
}

}  // namespace

// IDX format: big-endian magic (0x00000803 for rank-3 ubyte images,
// 0x00000801 for rank-1 ubyte labels), then dimension sizes, then raw bytes.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream img_in(images, std::ios::binary);
    if (!img_in) throw IoError("missing data file: " + images.string() + " (expected IDX images)");
    std::ifstream lab_in(labels, std::ios::binary);
    if (!lab_in) throw IoError("missing data file: " + labels.string() + " (expected IDX labels)");

    const uint32_t img_magic = read_be32(img_in);
    if (img_magic != 0x00000803)
        throw IoError("bad IDX image magic in " + images.string());
    const uint32_t n = read_be32(img_in);
    const uint32_t h = read_be32(img_in);
    const uint32_t w = read_be32(img_in);

    const uint32_t lab_magic = read_be32(lab_in);
    if (lab_magic != 0x00000801)
        throw IoError("bad IDX label magic in " + labels.string());
    const uint32_t ln = read_be32(lab_in);
    if (ln != n)
        throw IoError("IDX image/label count mismatch: " + std::to_string(n) + " vs " +
                      std::to_string(ln));

    Dataset ds;
    ds.h = static_cast<int>(h);
    ds.w = static_cast<int>(w);
    ds.c = 1;
    std::vector<unsigned char> raw(static_cast<size_t>(n) * h * w);
    img_in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!img_in) throw IoError("truncated IDX image file " + images.string());
    ds.pixels.assign(raw.begin(), raw.end());

    std::vector<unsigned char> lab(n);
    lab_in.read(reinterpret_cast<char*>(lab.data()), n);
    if (!lab_in) throw IoError("truncated IDX label file " + labels.string());
    ds.labels.assign(lab.begin(), lab.end());
    return ds;
}

}  // namespace bidda
