#include <fstream>
#include <sstream>

#include "bidda/datasets.hpp"

namespace bidda {

// USPS mirrors distribute 16x16 grayscale digits as libsvm-format text:
// "<label> 1:<v> 2:<v> ... 256:<v>" with features in [-1, 1] and labels in
// 1..10 (label k encodes digit k-1).
Dataset load_usps_libsvm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("missing data file: " + path.string() +
                      " (expected USPS in libsvm text format)");
    Dataset ds;
    ds.h = 16;
    ds.w = 16;
    ds.c = 1;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double label;
        ss >> label;
        std::vector<float> img(256, 0.0f);
        std::string tok;
        while (ss >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw IoError("usps: malformed feature '" + tok + "' at " + path.string() + ":" +
                              std::to_string(lineno));
            const int idx = std::stoi(tok.substr(0, colon));
            const double val = std::stod(tok.substr(colon + 1));
            if (idx < 1 || idx > 256)
                throw IoError("usps: feature index out of range at " + path.string() + ":" +
                              std::to_string(lineno));
            img[idx - 1] = static_cast<float>((val + 1.0) * 127.5);  // [-1,1] -> [0,255]
        }
        ds.pixels.insert(ds.pixels.end(), img.begin(), img.end());
        const int digit = static_cast<int>(label) - 1;
        if (digit < 0 || digit > 9)
            throw IoError("usps: label out of range at " + path.string() + ":" +
                          std::to_string(lineno));
        ds.labels.push_back(digit);
    }
    if (ds.labels.empty()) throw IoError("usps: no samples in " + path.string());
    return ds;
}

}  // namespace bidda
