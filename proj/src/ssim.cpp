#include <cmath>
#include <iostream>
#include <map>

#include "bidda/metrics.hpp"

namespace bidda {

double ssim(const float* a, const float* b, int h, int w, int c, const SsimConfig& cfg) {
    cfg.validate();
    require(cfg.window <= h && cfg.window <= w,
            "ssim: window " + std::to_string(cfg.window) + " does not fit in " +
                std::to_string(h) + "x" + std::to_string(w));
    const double c1 = cfg.k1 * cfg.dynamic_range * cfg.k1 * cfg.dynamic_range;
    const double c2 = cfg.k2 * cfg.dynamic_range * cfg.k2 * cfg.dynamic_range;
    const int win = cfg.window;
    const double n = static_cast<double>(win) * win;

    double total = 0.0;
    long count = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y + win <= h; ++y) {
            for (int x = 0; x + win <= w; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = 0; dy < win; ++dy)
                    for (int dx = 0; dx < win; ++dx) {
                        const double va = a[((y + dy) * w + x + dx) * c + ch];
                        const double vb = b[((y + dy) * w + x + dx) * c + ch];
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                const double ma = sa / n, mb = sb / n;
                const double va = saa / n - ma * ma;
                const double vb = sbb / n - mb * mb;
                const double cov = sab / n - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
    }
    return total / count;
}

double ssim(const ImageBatch& a, int index_a, const ImageBatch& b, int index_b,
            const SsimConfig& cfg) {
    const auto& ta = a.data;
    const auto& tb = b.data;
    require(ta.h == tb.h && ta.w == tb.w && ta.c == tb.c, "ssim: image shape mismatch");
    const size_t stride = static_cast<size_t>(ta.h) * ta.w * ta.c;
    return ssim(ta.data() + stride * index_a, tb.data() + stride * index_b, ta.h, ta.w, ta.c,
                cfg);
}

double mean_intra_class_ssim(const Dataset& ds, int pairs_per_class, uint64_t seed,
                             const SsimConfig& cfg) {
    require(!ds.labels.empty(), "mean_intra_class_ssim: labels required");
    require(pairs_per_class >= 1, "mean_intra_class_ssim: pairs_per_class must be >= 1");
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < ds.count(); ++i) by_class[ds.labels[i]].push_back(i);

    Rng rng(seed, 0x551eull);
    double class_sum = 0.0;
    int classes_used = 0;
    for (const auto& [cls, idx] : by_class) {
        if (idx.size() < 2) {
            std::cerr << "mean_intra_class_ssim: class " << cls << " has " << idx.size()
                      << " image(s); skipped\n";
            continue;
        }
        double acc = 0.0;
        for (int p = 0; p < pairs_per_class; ++p) {
            const int i = idx[rng.below(static_cast<uint32_t>(idx.size()))];
            int j = i;
            while (j == i) j = idx[rng.below(static_cast<uint32_t>(idx.size()))];
            acc += ssim(ds.image(i), ds.image(j), ds.h, ds.w, ds.c, cfg);
        }
        class_sum += acc / pairs_per_class;
        ++classes_used;
    }
    require(classes_used > 0, "mean_intra_class_ssim: no class has two or more images");
    return class_sum / classes_used;
}

}  // namespace bidda
