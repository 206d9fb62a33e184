#include <cmath>
#include <numbers>

#include "bidda/datasets.hpp"

namespace bidda {

namespace {

// 8x8 glyph bitmaps, one per class; MSB is the leftmost pixel.
constexpr unsigned char kGlyphs[10][8] = {
    {0x3C, 0x66, 0x66, 0x66, 0x66, 0x66, 0x3C, 0x00},
    {0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x3C, 0x00},
    {0x3C, 0x66, 0x06, 0x0C, 0x18, 0x30, 0x7E, 0x00},
    {0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00},
    {0x0C, 0x1C, 0x2C, 0x4C, 0x7E, 0x0C, 0x0C, 0x00},
    {0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00},
    {0x1C, 0x30, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00},
    {0x7E, 0x06, 0x0C, 0x18, 0x30, 0x30, 0x30, 0x00},
    {0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00},
    {0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00},
};

// Grayscale glyph with random placement, brightness and pixel noise.
void draw_glyph(float* img, int size, int cls, Rng& rng) {
    const int max_off = size - 8;
    const int oy = static_cast<int>(rng.below(max_off + 1));
    const int ox = static_cast<int>(rng.below(max_off + 1));
    const double fg = rng.uniform(180.0, 255.0);
    for (int i = 0; i < size * size; ++i) img[i] = 0.0f;
    for (int r = 0; r < 8; ++r)
        for (int col = 0; col < 8; ++col)
            if ((kGlyphs[cls][r] >> (7 - col)) & 1)
                img[(oy + r) * size + ox + col] = static_cast<float>(fg);
    for (int i = 0; i < size * size; ++i) {
        const double noisy = img[i] + rng.normal() * 8.0;
        img[i] = static_cast<float>(std::clamp(noisy, 0.0, 255.0));
    }
}

// Colorful smooth texture: per-channel base color, linear gradient and a
// sinusoidal stripe pattern with random orientation.
void draw_texture(float* img, int h, int w, Rng& rng) {
    double base[3], gx[3], gy[3], amp[3], phase[3];
    const double fx = rng.uniform(0.5, 3.0), fy = rng.uniform(0.5, 3.0);
    for (int ch = 0; ch < 3; ++ch) {
        base[ch] = rng.uniform(50.0, 205.0);
        gx[ch] = rng.uniform(-80.0, 80.0);
        gy[ch] = rng.uniform(-80.0, 80.0);
        amp[ch] = rng.uniform(20.0, 70.0);
        phase[ch] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = w > 1 ? (2.0 * x / (w - 1) - 1.0) : 0.0;
            const double v = h > 1 ? (2.0 * y / (h - 1) - 1.0) : 0.0;
            const double angle = 2.0 * std::numbers::pi * (fx * x + fy * y) / w;
            for (int ch = 0; ch < 3; ++ch) {
                const double val = base[ch] + gx[ch] * u + gy[ch] * v +
                                   amp[ch] * std::sin(angle + phase[ch]);
                img[(y * w + x) * 3 + ch] = static_cast<float>(std::clamp(val, 0.0, 255.0));
            }
        }
}

Dataset glyph_dataset(int n, int size, int classes, Rng& rng) {
    Dataset ds;
    ds.h = size;
    ds.w = size;
    ds.c = 1;
    ds.pixels.resize(static_cast<size_t>(n) * size * size);
    ds.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const int cls = i % classes;
        ds.labels[i] = cls;
        draw_glyph(ds.pixels.data() + ds.image_size() * i, size, cls, rng);
    }
    // deterministic shuffle so class order carries no signal
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    Dataset out = ds;
    for (int i = 0; i < n; ++i) {
        std::memcpy(out.pixels.data() + out.image_size() * i, ds.image(idx[i]),
                    ds.image_size() * sizeof(float));
        out.labels[i] = ds.labels[idx[i]];
    }
    return out;
}

}  // namespace

Dataset make_procedural_textures(int count, int size, uint64_t seed) {
    Rng rng(seed, 0x7e97ull);
    Dataset ds;
    ds.h = size;
    ds.w = size;
    ds.c = 3;
    ds.pixels.resize(static_cast<size_t>(count) * ds.image_size());
    for (int i = 0; i < count; ++i)
        draw_texture(ds.pixels.data() + ds.image_size() * i, size, size, rng);
    return ds;
}

// The target domain applies a fixed color/texture shift to the glyphs: a
// deterministic color gradient background with a stripe pattern and a fixed
// warm foreground color. The transform is noise-free: a stride-1 convolution
// generator cannot synthesize iid pixel noise, and adding any would hand the
// discriminator an unbeatable smoothness cue at this scale. Variation across
// images comes from the glyph jitter itself.
static void fixed_color_shift(const float* glyph, float* out, int size) {
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / (size - 1);
            const double v = static_cast<double>(y) / (size - 1);
            const double stripe = 25.0 * std::sin(2.0 * std::numbers::pi * (x + 2 * y) / 6.0);
            const double bg[3] = {40.0 + 120.0 * u + stripe, 90.0 + 80.0 * v - stripe,
                                  190.0 - 110.0 * u + 0.5 * stripe};
            const double fg[3] = {235.0, 60.0, 45.0};
            const double m = glyph[y * size + x] / 255.0;
            for (int ch = 0; ch < 3; ++ch) {
                const double val = (1.0 - m) * bg[ch] + m * fg[ch];
                out[(y * size + x) * 3 + ch] = static_cast<float>(std::clamp(val, 0.0, 255.0));
            }
        }
}

DomainPair make_synthetic_pair(const DataConfig& cfg) {
    require(cfg.synth_classes >= 2 && cfg.synth_classes <= 10,
            "synthetic: classes must be in [2,10]");
    require(cfg.synth_image_size >= 10, "synthetic: image size must be >= 10");
    DomainPair pair;
    pair.setting = "synthetic";
    pair.classes = cfg.synth_classes;
    const int size = cfg.synth_image_size;

    Rng src_rng(cfg.seed, 0x50f7c2ull);
    Dataset src_gray = glyph_dataset(cfg.synth_source, size, cfg.synth_classes, src_rng);
    pair.source = to_three_channels(src_gray);

    Rng tgt_rng(cfg.seed, 0x7a9b01ull);
    Dataset tgt_gray = glyph_dataset(cfg.synth_target, size, cfg.synth_classes, tgt_rng);
    pair.target.h = size;
    pair.target.w = size;
    pair.target.c = 3;
    pair.target.labels = tgt_gray.labels;
    pair.target.pixels.resize(static_cast<size_t>(cfg.synth_target) * size * size * 3);
    for (int i = 0; i < cfg.synth_target; ++i) {
        fixed_color_shift(tgt_gray.image(i),
                          pair.target.pixels.data() + pair.target.image_size() * i, size);
    }

    const int val_n = std::min(cfg.ensemble_val_size, cfg.synth_target);
    {
        std::vector<int> idx(pair.target.count());
        for (int i = 0; i < pair.target.count(); ++i) idx[i] = i;
        Rng vrng(cfg.seed, 0x7e57ull);
        vrng.shuffle(idx);
        idx.resize(val_n);
        pair.target_val.h = size;
        pair.target_val.w = size;
        pair.target_val.c = 3;
        pair.target_val.pixels.resize(static_cast<size_t>(val_n) * pair.target.image_size());
        pair.target_val.labels.resize(val_n);
        for (int i = 0; i < val_n; ++i) {
            std::memcpy(pair.target_val.pixels.data() + pair.target_val.image_size() * i,
                        pair.target.image(idx[i]), pair.target.image_size() * sizeof(float));
            pair.target_val.labels[i] = pair.target.labels[idx[i]];
        }
    }
    return pair;
}

}  // namespace bidda
