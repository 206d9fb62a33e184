#include <doctest.h>

#include "bidda/inference.hpp"

using namespace bidda;

namespace {

ModelArch small_arch() {
    ModelArch a;
    a.gen_features = 6;
    a.gen_blocks = 1;
    a.disc_f1 = 6;
    a.disc_f2 = 6;
    a.clf_conv1 = 6;
    a.clf_conv2 = 6;
    a.clf_fc1 = 12;
    a.clf_fc2 = 12;
    a.clf_kernel = 3;
    return a;
}

struct Frozen {
    Generator<float> g_ts;
    Classifier<float> c_s, c_t;
    ImageBatchT<float> images;
    LabelBatch labels;
    Tensor<float> z;
};

Frozen frozen_models(int n = 24) {
    Rng rng(55);
    auto arch = small_arch();
    Frozen f{build_generator<float>(12, 12, 3, arch, rng),
             build_classifier<float>(12, 12, 3, 10, arch, rng),
             build_classifier<float>(12, 12, 3, 10, arch, rng),
             {},
             {},
             {}};
    Tensor<float> imgs(n, 12, 12, 3);
    for (auto& v : imgs.v) v = static_cast<float>(rng.uniform(0.0, 255.0));
    f.images = {imgs, Range{0.0, 255.0}};
    f.labels.resize(n);
    for (int i = 0; i < n; ++i) f.labels[i] = static_cast<int>(rng.below(10));
    f.z = eval_noise<float>(n, arch.noise_dim, 99);
    return f;
}

}  // namespace

TEST_CASE("ensemble_predict: degenerate weights reduce to single classifiers") {
    auto f = frozen_models();
    auto parts = ensemble_parts(f.c_s, f.c_t, f.g_ts, f.images, f.z);

    auto p0 = ensemble_predict(f.c_s, f.c_t, f.g_ts, f.images, f.z, EnsembleWeights{0.0});
    CHECK_EQ(p0.v, parts.probs_ct.v);  // exactly C_t
    auto p1 = ensemble_predict(f.c_s, f.c_t, f.g_ts, f.images, f.z, EnsembleWeights{1.0});
    CHECK_EQ(p1.v, parts.probs_cs.v);  // exactly C_s . G_ts

    // argmax under sigma=0 equals the standalone C_t prediction
    CHECK_EQ(argmax_rows(p0), argmax_rows(parts.probs_ct));
}

TEST_CASE("ensemble_predict: convex combination oracle and row sums") {
    EnsembleParts<float> parts;
    parts.probs_cs = Tensor<float>::mat(1, 2);
    parts.probs_cs.v = {0.2f, 0.8f};
    parts.probs_ct = Tensor<float>::mat(1, 2);
    parts.probs_ct.v = {0.6f, 0.4f};
    auto mixed = combine_probs(parts, EnsembleWeights{0.5});
    CHECK_EQ(mixed.v[0], doctest::Approx(0.4).epsilon(1e-6));
    CHECK_EQ(mixed.v[1], doctest::Approx(0.6).epsilon(1e-6));

    auto f = frozen_models();
    auto real_parts = ensemble_parts(f.c_s, f.c_t, f.g_ts, f.images, f.z);
    Rng rng(77);
    for (int trial = 0; trial < 8; ++trial) {
        EnsembleWeights w{rng.uniform(0.0, 1.0)};
        auto p = combine_probs(real_parts, w);
        for (int i = 0; i < p.rows(); ++i) {
            double sum = 0;
            for (int k = 0; k < p.c; ++k) sum += p.v[i * p.c + k];
            CHECK_EQ(sum, doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    CHECK_THROWS_AS(combine_probs(real_parts, EnsembleWeights{1.5}), ConfigError);
}

TEST_CASE("select_sigma: grid-optimal, verified by exhaustive re-evaluation") {
    auto f = frozen_models(40);
    auto sel = select_sigma_detailed(f.c_s, f.c_t, f.g_ts, f.images, f.labels, f.z);
    CHECK_EQ(sel.grid_accuracy.size(), kSigmaGridSize);

    // exhaustive re-evaluation through the public prediction path
    double best_acc = -1.0;
    for (int i = 0; i < kSigmaGridSize; ++i) {
        EnsembleWeights w{i / 10.0};
        auto probs = ensemble_predict(f.c_s, f.c_t, f.g_ts, f.images, f.z, w);
        const double acc = accuracy(argmax_rows(probs), f.labels);
        CHECK_EQ(acc, doctest::Approx(sel.grid_accuracy[i]));
        best_acc = std::max(best_acc, acc);
    }
    const int chosen = static_cast<int>(sel.weights.sigma * 10 + 0.5);
    CHECK_EQ(sel.grid_accuracy[chosen], doctest::Approx(best_acc));
    // ties break to the smallest sigma
    for (int i = 0; i < chosen; ++i) CHECK_LT(sel.grid_accuracy[i], best_acc);
}

TEST_CASE("select_sigma: all-equal accuracies return sigma 0; empty set errors") {
    auto f = frozen_models(10);
    // make both classifiers identical so every sigma scores the same
    auto ps = f.c_s.params();
    auto pt = f.c_t.params();
    for (size_t i = 0; i < ps.refs.size(); ++i) pt.refs[i].value->v = ps.refs[i].value->v;
    // identity-free check is too strong; instead verify the tie rule on a
    // genuinely constant grid: zero out both classifiers
    for (auto& r : ps.refs) r.value->fill(0.0f);
    for (auto& r : pt.refs) r.value->fill(0.0f);
    auto sel = select_sigma_detailed(f.c_s, f.c_t, f.g_ts, f.images, f.labels, f.z);
    for (double a : sel.grid_accuracy) CHECK_EQ(a, doctest::Approx(sel.grid_accuracy[0]));
    CHECK_EQ(sel.weights.sigma, 0.0);

    ImageBatchT<float> empty;
    LabelBatch no_labels;
    CHECK_THROWS_AS(select_sigma(f.c_s, f.c_t, f.g_ts, empty, no_labels, f.z), ContractError);
}
