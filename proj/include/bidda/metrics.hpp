#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bidda/datasets.hpp"
#include "bidda/losses.hpp"

namespace bidda {

struct SsimConfig {
    int window = 8;               // uniform square window
    double k1 = 0.01, k2 = 0.03;  // stabilizers: C1=(k1*L)^2, C2=(k2*L)^2
    double dynamic_range = 255.0;

    void validate() const {
        if (window < 1) throw ConfigError("ssim.window must be >= 1");
        if (k1 <= 0 || k2 <= 0 || dynamic_range <= 0)
            throw ConfigError("ssim constants must be positive");
    }
};

inline double accuracy(const LabelBatch& predictions, const LabelBatch& truth) {
    require(predictions.size() == truth.size(), "accuracy: length mismatch");
    require(!truth.empty(), "accuracy: empty inputs");
    size_t hits = 0;
    for (size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
    return static_cast<double>(hits) / truth.size();
}

// Windowed SSIM, uniform window, population moments, mean over all window
// positions and channels. Result lies in [-1, 1].
double ssim(const float* a, const float* b, int h, int w, int c, const SsimConfig& cfg);
double ssim(const ImageBatch& a, int index_a, const ImageBatch& b, int index_b,
            const SsimConfig& cfg);

// Per class: mean SSIM of `pairs_per_class` random distinct pairs (drawn with
// replacement); then the unweighted mean over classes. Classes with fewer
// than two images are skipped with a warning.
double mean_intra_class_ssim(const Dataset& ds, int pairs_per_class, uint64_t seed,
                             const SsimConfig& cfg);

// Pixels scaled to [-1,1], PCA to n_pca components (reduced with a warning
// when the data cannot support that many), then exact t-SNE to 2-D.
struct EmbedConfig {
    int n_pca = 64;
    double perplexity = 30.0;
    int iterations = 1000;
};
std::vector<std::array<double, 2>> embed_2d(const ImageBatch& images, const EmbedConfig& cfg,
                                            uint64_t seed);

// Exact t-SNE on already-reduced rows.
std::vector<std::array<double, 2>> tsne_2d(const std::vector<std::vector<double>>& rows,
                                           double perplexity, int iterations, uint64_t seed);

}  // namespace bidda
