#include <doctest.h>

#include "bidda/harness.hpp"
#include "bidda/metrics.hpp"

using namespace bidda;

TEST_CASE("accuracy: exact-match fraction") {
    CHECK_EQ(accuracy({1, 2, 3}, {1, 2, 3}), doctest::Approx(1.0));
    CHECK_EQ(accuracy({1, 2, 3}, {4, 5, 6}), doctest::Approx(0.0));
    CHECK_EQ(accuracy({1, 2, 3, 4}, {1, 2, 3, 9}), doctest::Approx(0.75));
    CHECK_THROWS_AS(accuracy({1}, {1, 2}), ContractError);
}

TEST_CASE("ssim: reflexivity, symmetry, constant-image closed form") {
    SsimConfig cfg;  // 8x8 uniform window, k1=0.01, k2=0.03, L=255
    Rng rng(61);
    const int h = 12, w = 12, c = 1;
    std::vector<float> a(h * w), b(h * w);
    for (auto& v : a) v = static_cast<float>(rng.uniform(0.0, 255.0));
    for (auto& v : b) v = static_cast<float>(rng.uniform(0.0, 255.0));

    CHECK_EQ(ssim(a.data(), a.data(), h, w, c, cfg), doctest::Approx(1.0).epsilon(1e-6));
    CHECK_EQ(ssim(a.data(), b.data(), h, w, c, cfg),
             doctest::Approx(ssim(b.data(), a.data(), h, w, c, cfg)).epsilon(1e-6));

    // two constant images: only the luminance factor survives
    const double c1v = 80.0, c2v = 200.0;
    std::vector<float> ca(h * w, static_cast<float>(c1v)), cb(h * w, static_cast<float>(c2v));
    const double C1 = 0.01 * 255 * 0.01 * 255;
    const double expect = (2 * c1v * c2v + C1) / (c1v * c1v + c2v * c2v + C1);
    CHECK_EQ(ssim(ca.data(), cb.data(), h, w, c, cfg), doctest::Approx(expect).epsilon(1e-9));

    // simultaneous affine rescale with a matching dynamic range is invariant
    std::vector<float> a2(a), b2(b);
    for (auto& v : a2) v *= 0.5f;
    for (auto& v : b2) v *= 0.5f;
    SsimConfig half = cfg;
    half.dynamic_range = 127.5;
    CHECK_EQ(ssim(a2.data(), b2.data(), h, w, c, half),
             doctest::Approx(ssim(a.data(), b.data(), h, w, c, cfg)).epsilon(1e-6));

    SsimConfig big = cfg;
    big.window = 20;
    CHECK_THROWS_AS(ssim(a.data(), b.data(), h, w, c, big), ContractError);
}

TEST_CASE("mean_intra_class_ssim: identical images, determinism, sparse classes") {
    Dataset ds;
    ds.h = ds.w = 10;
    ds.c = 1;
    Rng rng(62);
    std::vector<float> proto(100);
    for (auto& v : proto) v = static_cast<float>(rng.uniform(0.0, 255.0));
    // class 0: four identical copies; class 1: two random images; class 2: one image
    for (int i = 0; i < 4; ++i) {
        ds.pixels.insert(ds.pixels.end(), proto.begin(), proto.end());
        ds.labels.push_back(0);
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 100; ++j)
            ds.pixels.push_back(static_cast<float>(rng.uniform(0.0, 255.0)));
        ds.labels.push_back(1);
    }
    ds.pixels.insert(ds.pixels.end(), proto.begin(), proto.end());
    ds.labels.push_back(2);

    SsimConfig cfg;
    Dataset identical;
    identical.h = identical.w = 10;
    identical.c = 1;
    for (int i = 0; i < 3; ++i) {
        identical.pixels.insert(identical.pixels.end(), proto.begin(), proto.end());
        identical.labels.push_back(0);
    }
    CHECK_EQ(mean_intra_class_ssim(identical, 50, 1, cfg), doctest::Approx(1.0).epsilon(1e-6));

    const double v1 = mean_intra_class_ssim(ds, 100, 7, cfg);  // class 2 skipped with warning
    const double v2 = mean_intra_class_ssim(ds, 100, 7, cfg);
    CHECK_EQ(v1, doctest::Approx(v2));  // deterministic per seed
    CHECK_GE(v1, -1.0);
    CHECK_LE(v1, 1.0);
}

TEST_CASE("embed_2d: shape, determinism, PCA rank reduction") {
    DataConfig dc;
    dc.synth_source = 30;
    dc.synth_target = 30;
    dc.ensemble_val_size = 5;
    auto pair = load_domain_pair(Setting::synthetic, dc);
    ImageBatch images = pair.target.all();

    EmbedConfig cfg;
    cfg.n_pca = 64;  // 30 points cannot support 64 components; reduced with a warning
    cfg.iterations = 120;
    auto em1 = embed_2d(images, cfg, 5);
    CHECK_EQ(em1.size(), 30);
    auto em2 = embed_2d(images, cfg, 5);
    for (size_t i = 0; i < em1.size(); ++i) {
        CHECK_EQ(em1[i][0], doctest::Approx(em2[i][0]));
        CHECK_EQ(em1[i][1], doctest::Approx(em2[i][1]));
    }
    for (auto& p : em1) {
        CHECK(std::isfinite(p[0]));
        CHECK(std::isfinite(p[1]));
    }
}

TEST_CASE("ablation rows: five distinct configurations matching the component study") {
    LossWeights base;  // alpha=gamma=nu=1, beta=mu=10, eta=1
    auto rows = ablation_rows(base);
    REQUIRE_EQ(rows.size(), 5);

    CHECK_EQ(rows[0].name, "s2t_gan");
    CHECK_EQ(rows[0].weights.alpha, 1.0);
    CHECK_EQ(rows[0].weights.beta, 10.0);
    CHECK_EQ(rows[0].weights.gamma, 0.0);
    CHECK_EQ(rows[0].weights.mu, 0.0);
    CHECK_EQ(rows[0].weights.eta, 0.0);
    CHECK_EQ(rows[0].weights.nu, 0.0);

    CHECK_EQ(rows[1].weights.alpha, 0.0);
    CHECK_EQ(rows[1].weights.gamma, 1.0);
    CHECK_EQ(rows[1].weights.mu, 10.0);

    CHECK_EQ(rows[2].weights.alpha, 1.0);
    CHECK_EQ(rows[2].weights.gamma, 1.0);
    CHECK_EQ(rows[2].weights.nu, 0.0);

    CHECK_EQ(rows[3].weights.nu, 1.0);
    CHECK_EQ(rows[3].weights.eta, 0.0);
    CHECK(rows[4].self_labeling);
    CHECK_EQ(rows[4].weights.eta, 1.0);

    // all five weight vectors are mutually distinct
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = i + 1; j < rows.size(); ++j) {
            const auto& a = rows[i].weights;
            const auto& b = rows[j].weights;
            const bool same = a.alpha == b.alpha && a.beta == b.beta && a.gamma == b.gamma &&
                              a.mu == b.mu && a.eta == b.eta && a.nu == b.nu;
            CHECK_FALSE(same);
        }
}
