#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bidda/datasets.hpp"

namespace bidda {

struct ImageFile {
    int h = 0, w = 0, c = 0;  // c is 1 or 3
    std::vector<float> pixels;  // [0,255], HWC
};

ImageFile load_image(const std::filesystem::path& path);  // ppm/pgm/png/jpeg by extension
void save_png(const std::filesystem::path& path, const ImageFile& img);
void save_ppm(const std::filesystem::path& path, const ImageFile& img);

// All images in a directory (ppm/pgm/png/jpg), converted to a common size by
// center-cropping to the smallest image; sorted by filename for determinism.
Dataset load_image_directory(const std::filesystem::path& dir);

}  // namespace bidda
