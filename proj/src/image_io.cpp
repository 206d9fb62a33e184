#include "bidda/image_io.hpp"

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

namespace bidda {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), ::tolower);
    return e;
}

ImageFile load_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw IoError("unsupported PNM flavor in " + path.string());
    auto next_int = [&]() {
        // skip whitespace and '#' comments
        for (;;) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        int v;
        in >> v;
        return v;
    };
    ImageFile img;
    img.w = next_int();
    img.h = next_int();
    const int maxval = next_int();
    in.get();  // single whitespace before raster
    img.c = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<size_t>(img.h) * img.w * img.c);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("truncated PNM file " + path.string());
    img.pixels.resize(raw.size());
    const float scale = 255.0f / maxval;
    for (size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] * scale;
    return img;
}

ImageFile load_png_file(const fs::path& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open image " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng failed on " + path.string());
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    ImageFile img;
    img.w = static_cast<int>(png_get_image_width(png, info));
    img.h = static_cast<int>(png_get_image_height(png, info));
    img.c = png_get_channels(png, info) >= 3 ? 3 : 1;
    const size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> raw(rowbytes * img.h);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y) rows[y] = raw.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    img.pixels.resize(static_cast<size_t>(img.h) * img.w * img.c);
    const int src_c = static_cast<int>(rowbytes / img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch)
                img.pixels[(static_cast<size_t>(y) * img.w + x) * img.c + ch] =
                    raw[rowbytes * y + static_cast<size_t>(x) * src_c + ch];
    return img;
}

ImageFile load_jpeg_file(const fs::path& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open image " + path.string());
    jpeg_decompress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    jpeg_start_decompress(&cinfo);
    ImageFile img;
    img.w = static_cast<int>(cinfo.output_width);
    img.h = static_cast<int>(cinfo.output_height);
    img.c = cinfo.output_components >= 3 ? 3 : 1;
    std::vector<unsigned char> row(static_cast<size_t>(img.w) * cinfo.output_components);
    img.pixels.resize(static_cast<size_t>(img.h) * img.w * img.c);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* rp = row.data();
        const int y = static_cast<int>(cinfo.output_scanline);
        jpeg_read_scanlines(&cinfo, &rp, 1);
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch)
                img.pixels[(static_cast<size_t>(y) * img.w + x) * img.c + ch] =
                    row[static_cast<size_t>(x) * cinfo.output_components + ch];
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    return img;
}

}  // namespace

ImageFile load_image(const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".ppm" || ext == ".pgm") return load_pnm(path);
    if (ext == ".png") return load_png_file(path);
    if (ext == ".jpg" || ext == ".jpeg") return load_jpeg_file(path);
    throw IoError("unsupported image format '" + ext + "' for " + path.string());
}

void save_png(const fs::path& path, const ImageFile& img) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write image " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.w, img.h, 8,
                 img.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(static_cast<size_t>(img.w) * img.c);
    for (int y = 0; y < img.h; ++y) {
        for (size_t i = 0; i < row.size(); ++i) {
            const float v = img.pixels[static_cast<size_t>(y) * img.w * img.c + i];
            row[i] = static_cast<unsigned char>(std::clamp(v, 0.0f, 255.0f) + 0.5f);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void save_ppm(const fs::path& path, const ImageFile& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    out << (img.c == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
    for (float v : img.pixels)
        out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0.0f, 255.0f) + 0.5f)));
}

Dataset load_image_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("missing data file: " + dir.string() + " (expected a directory of texture images)");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = lower_ext(e.path());
        if (ext == ".ppm" || ext == ".pgm" || ext == ".png" || ext == ".jpg" || ext == ".jpeg")
            files.push_back(e.path());
    }
    if (files.empty()) throw IoError("no images found in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<ImageFile> imgs;
    int min_h = 1 << 30, min_w = 1 << 30;
    for (const auto& f : files) {
        imgs.push_back(load_image(f));
        min_h = std::min(min_h, imgs.back().h);
        min_w = std::min(min_w, imgs.back().w);
    }
    Dataset ds;
    ds.h = min_h;
    ds.w = min_w;
    ds.c = 3;
    ds.pixels.resize(imgs.size() * ds.image_size());
    for (size_t i = 0; i < imgs.size(); ++i) {
        const auto& im = imgs[i];
        const int oy = (im.h - min_h) / 2, ox = (im.w - min_w) / 2;
        float* dst = ds.pixels.data() + ds.image_size() * i;
        for (int y = 0; y < min_h; ++y)
            for (int x = 0; x < min_w; ++x)
                for (int ch = 0; ch < 3; ++ch)
                    dst[(y * min_w + x) * 3 + ch] =
                        im.c == 3
                            ? im.pixels[(static_cast<size_t>(oy + y) * im.w + ox + x) * 3 + ch]
                            : im.pixels[static_cast<size_t>(oy + y) * im.w + ox + x];
    }
    return ds;
}

}  // namespace bidda
