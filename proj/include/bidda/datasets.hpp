#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bidda/nets.hpp"
#include "bidda/rng.hpp"
#include "bidda/tensor.hpp"

namespace bidda {

// A batch of images together with the closed interval its values lie in.
template <typename S>
struct ImageBatchT {
    Tensor<S> data;
    Range range{0.0, 255.0};
};
using ImageBatch = ImageBatchT<float>;

// In-memory dataset; pixels are raw [0, 255] floats, NHWC. Labels are empty
// for unlabeled data. Target-domain ground truth is carried for evaluation
// only; training never reads it.
struct Dataset {
    int h = 0, w = 0, c = 0;
    std::vector<float> pixels;
    std::vector<int> labels;

    int count() const {
        return h * w * c == 0 ? 0 : static_cast<int>(pixels.size() / (static_cast<size_t>(h) * w * c));
    }
    size_t image_size() const { return static_cast<size_t>(h) * w * c; }
    const float* image(int i) const { return pixels.data() + image_size() * i; }

    Tensor<float> gather(const std::vector<int>& idx) const;
    ImageBatch all() const;
};

struct DomainPair {
    Dataset source;      // labeled training source
    Dataset source_val;  // labeled source validation split (may be empty)
    Dataset target;      // training target; labels present for evaluation only
    Dataset target_val;  // labeled target subset for ensemble validation
    int classes = 0;
    std::string setting;
};

struct DataConfig {
    std::string data_root;
    std::string texture_dir;  // MNIST-M background patches
    int ensemble_val_size = 1000;
    uint64_t seed = 0;
    // synthetic setting
    int synth_source = 2000, synth_target = 2000;
    int synth_image_size = 12, synth_classes = 10;
    // split overrides; <0 means the published protocol sizes
    int src_train = -1, src_val = -1;
    std::string cache_dir;  // constructed datasets (MNIST-M) cached here if set
};

enum class Setting { mnist_usps, usps_mnist, mnist_mnistm, svhn_mnist, mnist_svhn, synthetic };
Setting parse_setting(const std::string& name);
std::string setting_name(Setting s);

DomainPair load_domain_pair(Setting setting, const DataConfig& cfg);

// Background substitution: out = |digit - patch| per channel, 3-channel
// output. Patches larger than the digits are randomly cropped (seeded).
ImageBatch make_mnist_m(const ImageBatch& digits, const ImageBatch& patches,
                        uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Range maps. Each preprocessing map has an exact inverse.
// ---------------------------------------------------------------------------
template <typename S>
ImageBatchT<S> preprocess_generator_input(const ImageBatchT<S>& x) {
    require(x.range == Range{0.0, 255.0},
            "preprocess_generator_input: input range must be [0,255]");
    ImageBatchT<S> y{x.data, Range{kGenInLo, kGenInHi}};
    for (auto& v : y.data.v) v = v / S(255) - S(0.5);
    return y;
}

template <typename S>
ImageBatchT<S> invert_generator_preprocess(const ImageBatchT<S>& x) {
    require(x.range == Range{kGenInLo, kGenInHi},
            "invert_generator_preprocess: input range must be [-0.5,0.5]");
    ImageBatchT<S> y{x.data, Range{0.0, 255.0}};
    for (auto& v : y.data.v) v = (v + S(0.5)) * S(255);
    return y;
}

template <typename S>
ImageBatchT<S> preprocess_discriminative_input(const ImageBatchT<S>& x) {
    require(x.range == Range{0.0, 255.0},
            "preprocess_discriminative_input: input range must be [0,255]");
    ImageBatchT<S> y{x.data, Range{kDiscLo, kDiscHi}};
    for (auto& v : y.data.v) v = v - S(127.5);
    return y;
}

template <typename S>
ImageBatchT<S> invert_discriminative_preprocess(const ImageBatchT<S>& x) {
    require(x.range == Range{kDiscLo, kDiscHi},
            "invert_discriminative_preprocess: input range must be [-127.5,127.5]");
    ImageBatchT<S> y{x.data, Range{0.0, 255.0}};
    for (auto& v : y.data.v) v = v + S(127.5);
    return y;
}

template <typename S>
Tensor<S> cast_tensor(const Tensor<float>& t) {
    Tensor<S> out(t.n, t.h, t.w, t.c);
    for (size_t i = 0; i < t.size(); ++i) out.v[i] = static_cast<S>(t.v[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic shuffled batch stream; the final partial batch is dropped.
// ---------------------------------------------------------------------------
class BatchStream {
public:
    BatchStream(const Dataset& ds, int batch_size, uint64_t seed);

    int batches_per_epoch() const { return static_cast<int>(order_.size()) / batch_size_; }
    void start_epoch(int epoch);
    // Returns false once the epoch is exhausted.
    bool next(Tensor<float>& images, std::vector<int>* labels);

    // Cycling access for the smaller/larger of two domains: reshuffles and
    // continues whenever an epoch boundary is crossed.
    void next_cycling(Tensor<float>& images, std::vector<int>* labels);

private:
    const Dataset* ds_;
    int batch_size_;
    uint64_t seed_;
    std::vector<int> order_;
    int cursor_ = 0;
    int epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Misc dataset utilities.
// ---------------------------------------------------------------------------
Dataset resize_bilinear(const Dataset& in, int nh, int nw);
Dataset to_three_channels(const Dataset& in);

// Versioned binary container for processed datasets.
void save_dataset(const std::filesystem::path& path, const Dataset& ds, int classes);
std::pair<Dataset, int> load_dataset(const std::filesystem::path& path);

// Raw loaders for the standard public formats.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset load_svhn_mat(const std::filesystem::path& path);
Dataset load_usps_libsvm(const std::filesystem::path& path);

// Synthetic 10-class glyph pair: source is light-on-dark grayscale (replicated
// to RGB); the target applies a procedural color-texture shift.
DomainPair make_synthetic_pair(const DataConfig& cfg);
// Procedural color textures (the bundled patch set for MNIST-M style tests).
Dataset make_procedural_textures(int count, int size, uint64_t seed);

}  // namespace bidda
