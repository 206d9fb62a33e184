#include "bidda/datasets.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "bidda/image_io.hpp"

namespace bidda {

namespace fs = std::filesystem;

Tensor<float> Dataset::gather(const std::vector<int>& idx) const {
    Tensor<float> out(static_cast<int>(idx.size()), h, w, c);
    for (size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.data() + image_size() * i, image(idx[i]), image_size() * sizeof(float));
    return out;
}

ImageBatch Dataset::all() const {
    std::vector<int> idx(count());
    for (int i = 0; i < count(); ++i) idx[i] = i;
    return ImageBatch{gather(idx), Range{0.0, 255.0}};
}

Setting parse_setting(const std::string& name) {
    if (name == "mnist-usps") return Setting::mnist_usps;
    if (name == "usps-mnist") return Setting::usps_mnist;
    if (name == "mnist-mnistm") return Setting::mnist_mnistm;
    if (name == "svhn-mnist") return Setting::svhn_mnist;
    if (name == "mnist-svhn") return Setting::mnist_svhn;
    if (name == "synthetic") return Setting::synthetic;
    throw ConfigError("unknown setting '" + name +
                      "' (expected mnist-usps, usps-mnist, mnist-mnistm, svhn-mnist, "
                      "mnist-svhn or synthetic)");
}

std::string setting_name(Setting s) {
    switch (s) {
        case Setting::mnist_usps: return "mnist-usps";
        case Setting::usps_mnist: return "usps-mnist";
        case Setting::mnist_mnistm: return "mnist-mnistm";
        case Setting::svhn_mnist: return "svhn-mnist";
        case Setting::mnist_svhn: return "mnist-svhn";
        case Setting::synthetic: return "synthetic";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// BatchStream
// ---------------------------------------------------------------------------
BatchStream::BatchStream(const Dataset& ds, int batch_size, uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), seed_(seed) {
    require(batch_size >= 1, "batch_stream: batch_size must be >= 1");
    require(ds.count() > 0, "batch_stream: empty dataset");
    order_.resize(ds.count());
    for (int i = 0; i < ds.count(); ++i) order_[i] = i;
    start_epoch(0);
}

void BatchStream::start_epoch(int epoch) {
    epoch_ = epoch;
    cursor_ = 0;
    Rng rng(seed_, 0x5eed0000ull + static_cast<uint64_t>(epoch));
    for (int i = 0; i < ds_->count(); ++i) order_[i] = i;
    rng.shuffle(order_);
}

bool BatchStream::next(Tensor<float>& images, std::vector<int>* labels) {
    if (cursor_ + batch_size_ > static_cast<int>(order_.size())) return false;
    std::vector<int> idx(order_.begin() + cursor_, order_.begin() + cursor_ + batch_size_);
    cursor_ += batch_size_;
    images = ds_->gather(idx);
    if (labels) {
        labels->resize(idx.size());
        for (size_t i = 0; i < idx.size(); ++i)
            (*labels)[i] = ds_->labels.empty() ? -1 : ds_->labels[idx[i]];
    }
    return true;
}

void BatchStream::next_cycling(Tensor<float>& images, std::vector<int>* labels) {
    if (!next(images, labels)) {
        start_epoch(epoch_ + 1);
        next(images, labels);
    }
}

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------
Dataset resize_bilinear(const Dataset& in, int nh, int nw) {
    Dataset out;
    out.h = nh;
    out.w = nw;
    out.c = in.c;
    out.labels = in.labels;
    const int n = in.count();
    out.pixels.resize(static_cast<size_t>(n) * nh * nw * in.c);
    const double sy = static_cast<double>(in.h) / nh, sx = static_cast<double>(in.w) / nw;
    for (int i = 0; i < n; ++i) {
        const float* src = in.image(i);
        float* dst = out.pixels.data() + out.image_size() * i;
        for (int y = 0; y < nh; ++y) {
            const double fy = std::min((y + 0.5) * sy - 0.5, in.h - 1.0);
            const int y0 = std::max(0, static_cast<int>(std::floor(fy)));
            const int y1 = std::min(in.h - 1, y0 + 1);
            const double wy = std::clamp(fy - y0, 0.0, 1.0);
            for (int x = 0; x < nw; ++x) {
                const double fx = std::min((x + 0.5) * sx - 0.5, in.w - 1.0);
                const int x0 = std::max(0, static_cast<int>(std::floor(fx)));
                const int x1 = std::min(in.w - 1, x0 + 1);
                const double wx = std::clamp(fx - x0, 0.0, 1.0);
                for (int ch = 0; ch < in.c; ++ch) {
                    const double v00 = src[(y0 * in.w + x0) * in.c + ch];
                    const double v01 = src[(y0 * in.w + x1) * in.c + ch];
                    const double v10 = src[(y1 * in.w + x0) * in.c + ch];
                    const double v11 = src[(y1 * in.w + x1) * in.c + ch];
                    dst[(y * nw + x) * in.c + ch] = static_cast<float>(
                        (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11));
                }
            }
        }
    }
    return out;
}

Dataset to_three_channels(const Dataset& in) {
    if (in.c == 3) return in;
    require(in.c == 1, "to_three_channels: expected 1- or 3-channel input");
    Dataset out;
    out.h = in.h;
    out.w = in.w;
    out.c = 3;
    out.labels = in.labels;
    out.pixels.resize(in.pixels.size() * 3);
    for (size_t i = 0; i < in.pixels.size(); ++i) {
        out.pixels[i * 3] = out.pixels[i * 3 + 1] = out.pixels[i * 3 + 2] = in.pixels[i];
    }
    return out;
}

// Container: magic, version, geometry, optional labels, raw float pixels.
static constexpr char kDatasetMagic[4] = {'B', 'D', 'D', 'S'};
static constexpr uint32_t kDatasetVersion = 1;

void save_dataset(const fs::path& path, const Dataset& ds, int classes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file " + path.string());
    out.write(kDatasetMagic, 4);
    auto w32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    w32(kDatasetVersion);
    w32(static_cast<uint32_t>(ds.count()));
    w32(static_cast<uint32_t>(ds.h));
    w32(static_cast<uint32_t>(ds.w));
    w32(static_cast<uint32_t>(ds.c));
    w32(static_cast<uint32_t>(classes));
    w32(ds.labels.empty() ? 0u : 1u);
    if (!ds.labels.empty())
        out.write(reinterpret_cast<const char*>(ds.labels.data()), ds.labels.size() * 4);
    out.write(reinterpret_cast<const char*>(ds.pixels.data()), ds.pixels.size() * 4);
    if (!out) throw IoError("short write to dataset file " + path.string());
}

std::pair<Dataset, int> load_dataset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing dataset file " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw IoError("not a dataset container: " + path.string());
    auto r32 = [&]() {
        uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    const uint32_t version = r32();
    if (version != kDatasetVersion)
        throw IoError("unsupported dataset container version " + std::to_string(version));
    Dataset ds;
    const uint32_t n = r32();
    ds.h = static_cast<int>(r32());
    ds.w = static_cast<int>(r32());
    ds.c = static_cast<int>(r32());
    const int classes = static_cast<int>(r32());
    const bool has_labels = r32() != 0;
    if (has_labels) {
        ds.labels.resize(n);
        in.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(n) * 4);
    }
    ds.pixels.resize(static_cast<size_t>(n) * ds.h * ds.w * ds.c);
    in.read(reinterpret_cast<char*>(ds.pixels.data()),
            static_cast<std::streamsize>(ds.pixels.size()) * 4);
    if (!in) throw IoError("truncated dataset container: " + path.string());
    return {std::move(ds), classes};
}

// ---------------------------------------------------------------------------
// MNIST-M construction
// ---------------------------------------------------------------------------
ImageBatch make_mnist_m(const ImageBatch& digits, const ImageBatch& patches, uint64_t seed) {
    const auto& d = digits.data;
    const auto& p = patches.data;
    require(d.c == 1, "make_mnist_m: digits must be grayscale");
    require(p.c == 3, "make_mnist_m: patches must be 3-channel");
    require(p.n >= 1 && d.n >= 1, "make_mnist_m: empty batch");
    if (p.h < d.h || p.w < d.w)
        throw ContractError("make_mnist_m: patch " + std::to_string(p.h) + "x" +
                            std::to_string(p.w) + " smaller than digit " + std::to_string(d.h) +
                            "x" + std::to_string(d.w));
    Rng rng(seed, 0x7a7cull);
    ImageBatch out;
    out.range = patches.range;
    out.data = Tensor<float>(d.n, d.h, d.w, 3);
    for (int i = 0; i < d.n; ++i) {
        const int pi = i % p.n;
        const int oy = p.h == d.h ? 0 : static_cast<int>(rng.below(p.h - d.h + 1));
        const int ox = p.w == d.w ? 0 : static_cast<int>(rng.below(p.w - d.w + 1));
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
                const float g = d.at(i, y, x, 0);
                for (int ch = 0; ch < 3; ++ch)
                    out.data.at(i, y, x, ch) = std::abs(g - p.at(pi, oy + y, ox + x, ch));
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// load_domain_pair
// ---------------------------------------------------------------------------
namespace {

fs::path need_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p))
        throw IoError("missing data file: " + p.string() + " (expected " + what + ")");
    return p;
}

// Seeded shuffle, then split off the first 'n_val' as validation.
std::pair<Dataset, Dataset> split_train_val(const Dataset& ds, int n_train, int n_val,
                                            uint64_t seed) {
    require(n_train + n_val <= ds.count(),
            "split: dataset has " + std::to_string(ds.count()) + " images, need " +
                std::to_string(n_train + n_val));
    std::vector<int> idx(ds.count());
    for (int i = 0; i < ds.count(); ++i) idx[i] = i;
    Rng rng(seed, 0x59117ull);
    rng.shuffle(idx);
    auto take = [&](int from, int n) {
        Dataset out;
        out.h = ds.h;
        out.w = ds.w;
        out.c = ds.c;
        out.pixels.resize(static_cast<size_t>(n) * ds.image_size());
        if (!ds.labels.empty()) out.labels.resize(n);
        for (int i = 0; i < n; ++i) {
            std::memcpy(out.pixels.data() + out.image_size() * i, ds.image(idx[from + i]),
                        ds.image_size() * sizeof(float));
            if (!ds.labels.empty()) out.labels[i] = ds.labels[idx[from + i]];
        }
        return out;
    };
    return {take(0, n_train), take(n_train, n_val)};
}

Dataset sample_labeled_subset(const Dataset& ds, int n, uint64_t seed) {
    require(!ds.labels.empty(), "validation subset requires labels");
    require(n >= 1, "validation subset size must be >= 1");
    require(n <= ds.count(), "validation subset larger than dataset");
    std::vector<int> idx(ds.count());
    for (int i = 0; i < ds.count(); ++i) idx[i] = i;
    Rng rng(seed, 0x7e57ull);
    rng.shuffle(idx);
    idx.resize(n);
    Dataset out;
    out.h = ds.h;
    out.w = ds.w;
    out.c = ds.c;
    out.pixels.resize(static_cast<size_t>(n) * ds.image_size());
    out.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        std::memcpy(out.pixels.data() + out.image_size() * i, ds.image(idx[i]),
                    ds.image_size() * sizeof(float));
        out.labels[i] = ds.labels[idx[i]];
    }
    return out;
}

Dataset load_mnist_train(const DataConfig& cfg) {
    const fs::path root = fs::path(cfg.data_root) / "mnist";
    return load_idx(need_file(root / "train-images-idx3-ubyte", "MNIST IDX training images"),
                    need_file(root / "train-labels-idx1-ubyte", "MNIST IDX training labels"));
}

Dataset load_usps_all(const DataConfig& cfg) {
    const fs::path root = fs::path(cfg.data_root) / "usps";
    Dataset train = load_usps_libsvm(need_file(root / "usps", "USPS training set, libsvm format"));
    Dataset test = load_usps_libsvm(need_file(root / "usps.t", "USPS test set, libsvm format"));
    train.pixels.insert(train.pixels.end(), test.pixels.begin(), test.pixels.end());
    train.labels.insert(train.labels.end(), test.labels.begin(), test.labels.end());
    return train;
}

Dataset build_mnist_m(const Dataset& mnist, const DataConfig& cfg) {
    if (!cfg.cache_dir.empty()) {
        const fs::path cache = fs::path(cfg.cache_dir) / "mnistm_train.bdds";
        if (fs::exists(cache)) return load_dataset(cache).first;
    }
    Dataset textures;
    if (!cfg.texture_dir.empty()) {
        textures = load_image_directory(cfg.texture_dir);
    } else {
        textures = make_procedural_textures(64, 64, cfg.seed);
    }
    ImageBatch digits = mnist.all();
    ImageBatch patches = textures.all();
    require(patches.data.c == 3, "texture patches must be color images");
    ImageBatch blended = make_mnist_m(digits, patches, cfg.seed);
    Dataset out;
    out.h = blended.data.h;
    out.w = blended.data.w;
    out.c = 3;
    out.pixels.assign(blended.data.v.begin(), blended.data.v.end());
    out.labels = mnist.labels;
    if (!cfg.cache_dir.empty()) {
        fs::create_directories(cfg.cache_dir);
        save_dataset(fs::path(cfg.cache_dir) / "mnistm_train.bdds", out, 10);
    }
    return out;
}

}  // namespace

DomainPair load_domain_pair(Setting setting, const DataConfig& cfg) {
    DomainPair pair;
    pair.setting = setting_name(setting);
    pair.classes = 10;

    if (setting == Setting::synthetic) {
        return make_synthetic_pair(cfg);
    }

    switch (setting) {
        case Setting::mnist_usps: {
            Dataset mnist = load_mnist_train(cfg);
            const int ntr = cfg.src_train > 0 ? cfg.src_train : 50000;
            const int nva = cfg.src_val >= 0 ? cfg.src_val : 10000;
            std::tie(pair.source, pair.source_val) = split_train_val(mnist, ntr, nva, cfg.seed);
            Dataset usps = load_usps_all(cfg);
            pair.target = resize_bilinear(usps, 28, 28);
            break;
        }
        case Setting::usps_mnist: {
            Dataset usps = load_usps_libsvm(
                need_file(fs::path(cfg.data_root) / "usps" / "usps", "USPS training set"));
            usps = resize_bilinear(usps, 28, 28);
            const int ntr = cfg.src_train > 0 ? cfg.src_train : 6562;
            const int nva = cfg.src_val >= 0 ? cfg.src_val : 729;
            std::tie(pair.source, pair.source_val) = split_train_val(usps, ntr, nva, cfg.seed);
            pair.target = load_mnist_train(cfg);  // the protocol tests on the MNIST training set
            break;
        }
        case Setting::mnist_mnistm: {
            Dataset mnist = load_mnist_train(cfg);
            Dataset mnist_rgb = to_three_channels(mnist);
            const int ntr = cfg.src_train > 0 ? cfg.src_train : 50000;
            const int nva = cfg.src_val >= 0 ? cfg.src_val : 10000;
            std::tie(pair.source, pair.source_val) =
                split_train_val(mnist_rgb, ntr, nva, cfg.seed);
            pair.target = build_mnist_m(mnist, cfg);
            break;
        }
        case Setting::svhn_mnist: {
            Dataset svhn_train = load_svhn_mat(need_file(
                fs::path(cfg.data_root) / "svhn" / "train_32x32.mat", "SVHN training matrix"));
            Dataset svhn_test = load_svhn_mat(need_file(
                fs::path(cfg.data_root) / "svhn" / "test_32x32.mat", "SVHN test matrix"));
            pair.source = std::move(svhn_train);
            pair.source_val = std::move(svhn_test);
            Dataset mnist = load_mnist_train(cfg);
            pair.target = to_three_channels(resize_bilinear(mnist, 32, 32));
            break;
        }
        case Setting::mnist_svhn: {
            Dataset mnist = load_mnist_train(cfg);
            Dataset mnist_rgb = to_three_channels(resize_bilinear(mnist, 32, 32));
            const int ntr = cfg.src_train > 0 ? cfg.src_train : 50000;
            const int nva = cfg.src_val >= 0 ? cfg.src_val : 10000;
            std::tie(pair.source, pair.source_val) =
                split_train_val(mnist_rgb, ntr, nva, cfg.seed);
            Dataset svhn_train = load_svhn_mat(need_file(
                fs::path(cfg.data_root) / "svhn" / "train_32x32.mat", "SVHN training matrix"));
            Dataset svhn_test = load_svhn_mat(need_file(
                fs::path(cfg.data_root) / "svhn" / "test_32x32.mat", "SVHN test matrix"));
            svhn_train.pixels.insert(svhn_train.pixels.end(), svhn_test.pixels.begin(),
                                     svhn_test.pixels.end());
            svhn_train.labels.insert(svhn_train.labels.end(), svhn_test.labels.begin(),
                                     svhn_test.labels.end());
            pair.target = std::move(svhn_train);
            break;
        }
        case Setting::synthetic:
            break;  // handled above
    }

    pair.target_val = sample_labeled_subset(pair.target, cfg.ensemble_val_size, cfg.seed);
    return pair;
}

}  // namespace bidda
