#include <cstring>
#include <fstream>
#include <map>

#include <zlib.h>

#include "bidda/datasets.hpp"

// Minimal MATLAB Level-5 MAT reader: numeric, non-complex arrays, with
// miCOMPRESSED support. Enough for the SVHN *_32x32.mat matrices.

namespace bidda {

namespace {

struct Mat5Array {
    std::vector<int> dims;
    std::vector<double> data;
};

struct Reader {
    const unsigned char* p;
    size_t n, pos = 0;

    uint32_t u32() {
        uint32_t v;
        std::memcpy(&v, p + pos, 4);
        pos += 4;
        return v;
    }
    const unsigned char* take(size_t k) {
        const unsigned char* q = p + pos;
        pos += k;
        return q;
    }
    bool done() const { return pos + 8 > n; }
};

constexpr uint32_t miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5,
                   miUINT32 = 6, miSINGLE = 7, miDOUBLE = 9, miMATRIX = 14, miCOMPRESSED = 15;

size_t elem_size(uint32_t type) {
    switch (type) {
        case miINT8:
        case miUINT8: return 1;
        case miINT16:
        case miUINT16: return 2;
        case miINT32:
        case miUINT32:
        case miSINGLE: return 4;
        case miDOUBLE: return 8;
        default: return 0;
    }
}

std::vector<double> decode_numeric(uint32_t type, const unsigned char* q, size_t bytes) {
    const size_t es = elem_size(type);
    if (es == 0) throw IoError("mat5: unsupported numeric type " + std::to_string(type));
    const size_t cnt = bytes / es;
    std::vector<double> out(cnt);
    for (size_t i = 0; i < cnt; ++i) {
        switch (type) {
            case miINT8: out[i] = reinterpret_cast<const int8_t*>(q)[i]; break;
            case miUINT8: out[i] = q[i]; break;
            case miINT16: {
                int16_t v;
                std::memcpy(&v, q + i * 2, 2);
                out[i] = v;
                break;
            }
            case miUINT16: {
                uint16_t v;
                std::memcpy(&v, q + i * 2, 2);
                out[i] = v;
                break;
            }
            case miINT32: {
                int32_t v;
                std::memcpy(&v, q + i * 4, 4);
                out[i] = v;
                break;
            }
            case miUINT32: {
                uint32_t v;
                std::memcpy(&v, q + i * 4, 4);
                out[i] = v;
                break;
            }
            case miSINGLE: {
                float v;
                std::memcpy(&v, q + i * 4, 4);
                out[i] = v;
                break;
            }
            case miDOUBLE: {
                double v;
                std::memcpy(&v, q + i * 8, 8);
                out[i] = v;
                break;
            }
        }
    }
    return out;
}

// Reads one sub-element tag, handling the packed small-element form.
void read_tag(Reader& r, uint32_t& type, uint32_t& bytes, const unsigned char*& data) {
    const uint32_t first = r.u32();
    if (first >> 16) {  // small data element: size in the upper half-word
        type = first & 0xffff;
        bytes = first >> 16;
        data = r.take(4);
    } else {
        type = first;
        bytes = r.u32();
        data = r.take((bytes + 7) & ~size_t(7));  // elements pad to 8 bytes
    }
}

void parse_matrix(const unsigned char* q, size_t bytes, std::map<std::string, Mat5Array>& out) {
    Reader r{q, bytes};
    uint32_t type, sz;
    const unsigned char* data;

    read_tag(r, type, sz, data);  // array flags
    if (type != miUINT32 || sz < 8) throw IoError("mat5: bad array flags");
    uint32_t flags;
    std::memcpy(&flags, data, 4);
    const uint32_t cls = flags & 0xff;
    if (cls < 6 || cls > 13) return;  // only numeric classes
    if (flags & 0x0800) throw IoError("mat5: complex arrays are not supported");

    read_tag(r, type, sz, data);  // dimensions
    if (type != miINT32) throw IoError("mat5: bad dimensions element");
    Mat5Array arr;
    for (size_t i = 0; i < sz / 4; ++i) {
        int32_t d;
        std::memcpy(&d, data + i * 4, 4);
        arr.dims.push_back(d);
    }

    read_tag(r, type, sz, data);  // name
    std::string name(reinterpret_cast<const char*>(data), sz);

    read_tag(r, type, sz, data);  // real part
    arr.data = decode_numeric(type, data, sz);
    out[name] = std::move(arr);
}

std::map<std::string, Mat5Array> parse_mat5(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing data file: " + path.string() + " (expected MAT v5 container)");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 128) throw IoError("mat5: file too short: " + path.string());
    if (buf[126] != 'I' || buf[127] != 'M')
        throw IoError("mat5: big-endian or invalid MAT file: " + path.string());

    std::map<std::string, Mat5Array> arrays;
    Reader r{buf.data(), buf.size(), 128};
    while (!r.done()) {
        const uint32_t type = r.u32();
        const uint32_t bytes = r.u32();
        // compressed elements are stored unpadded; everything else pads to 8
        const unsigned char* data =
            r.take(type == miCOMPRESSED ? bytes : (bytes + 7) & ~size_t(7));
        if (type == miMATRIX) {
            parse_matrix(data, bytes, arrays);
        } else if (type == miCOMPRESSED) {
            // zlib stream wrapping exactly one element
            std::vector<unsigned char> plain;
            plain.resize(std::max<size_t>(bytes * 4, 1 << 16));
            z_stream zs{};
            inflateInit(&zs);
            zs.next_in = const_cast<unsigned char*>(data);
            zs.avail_in = bytes;
            size_t total = 0;
            int ret = Z_OK;
            while (ret != Z_STREAM_END) {
                if (total == plain.size()) plain.resize(plain.size() * 2);
                zs.next_out = plain.data() + total;
                zs.avail_out = static_cast<uInt>(plain.size() - total);
                ret = inflate(&zs, Z_NO_FLUSH);
                if (ret != Z_OK && ret != Z_STREAM_END) {
                    inflateEnd(&zs);
                    throw IoError("mat5: zlib inflate failed in " + path.string());
                }
                total = plain.size() - zs.avail_out;
            }
            inflateEnd(&zs);
            Reader ir{plain.data(), total};
            const uint32_t itype = ir.u32();
            const uint32_t ibytes = ir.u32();
            if (itype == miMATRIX) parse_matrix(ir.take(ibytes), ibytes, arrays);
        }
    }
    return arrays;
}

}  // namespace

// SVHN matrices: X is H x W x 3 x N uint8 (column-major), y is N x 1 with
// label 10 denoting digit 0.
Dataset load_svhn_mat(const std::filesystem::path& path) {
    auto arrays = parse_mat5(path);
    auto xit = arrays.find("X");
    auto yit = arrays.find("y");
    if (xit == arrays.end() || yit == arrays.end())
        throw IoError("mat5: variables X and y not found in " + path.string());
    const auto& X = xit->second;
    if (X.dims.size() != 4 || X.dims[2] != 3)
        throw IoError("mat5: X must be H x W x 3 x N in " + path.string());
    const int H = X.dims[0], W = X.dims[1], C = X.dims[2], N = X.dims[3];
    Dataset ds;
    ds.h = H;
    ds.w = W;
    ds.c = C;
    ds.pixels.resize(static_cast<size_t>(N) * H * W * C);
    const size_t plane = static_cast<size_t>(H) * W;
    for (int i = 0; i < N; ++i)
        for (int ch = 0; ch < C; ++ch)
            for (int x = 0; x < W; ++x)
                for (int y = 0; y < H; ++y) {
                    const size_t src = y + x * H + ch * plane + static_cast<size_t>(i) * plane * C;
                    ds.pixels[((static_cast<size_t>(i) * H + y) * W + x) * C + ch] =
                        static_cast<float>(X.data[src]);
                }
    ds.labels.resize(N);
    const auto& y = yit->second;
    if (static_cast<int>(y.data.size()) != N)
        throw IoError("mat5: y length does not match X in " + path.string());
    for (int i = 0; i < N; ++i) {
        const int lab = static_cast<int>(y.data[i]);
        ds.labels[i] = lab == 10 ? 0 : lab;
    }
    return ds;
}

}  // namespace bidda
