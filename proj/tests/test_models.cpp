#include <doctest.h>

#include "bidda/checkpoint.hpp"
#include "bidda/nets.hpp"

using namespace bidda;

namespace {

Tensor<float> random_batch(Rng& rng, int b, int h, int w, int c, double lo, double hi) {
    Tensor<float> t(b, h, w, c);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

}  // namespace

TEST_CASE("generator: shape contract and bounded output range") {
    Rng rng(31);
    ModelArch arch;
    arch.gen_features = 8;
    arch.gen_blocks = 2;
    auto g = build_generator<float>(28, 28, 3, arch, rng);
    auto x = random_batch(rng, 4, 28, 28, 3, kGenInLo, kGenInHi);
    auto z = rng.normal_tensor<float>(4, arch.noise_dim);
    auto y = g.forward(x, z, nullptr);
    CHECK_EQ(y.n, 4);
    CHECK_EQ(y.h, 28);
    CHECK_EQ(y.w, 28);
    CHECK_EQ(y.c, 3);
    for (float v : y.v) {
        CHECK_GE(v, -127.5f);
        CHECK_LE(v, 127.5f);
    }

    // two different noise draws: outputs must not be bitwise identical
    auto z2 = rng.normal_tensor<float>(4, arch.noise_dim);
    auto y2 = g.forward(x, z2, nullptr);
    CHECK_NE(y.v, y2.v);
}

TEST_CASE("generator: parameter count matches the architecture descriptor") {
    Rng rng(32);
    ModelArch arch;
    arch.gen_features = 8;
    arch.gen_blocks = 2;
    arch.noise_dim = 5;
    auto g = build_generator<float>(12, 12, 3, arch, rng);

    // independent count from layer shapes
    auto conv_params = [](int cin, int cout, int k) { return k * k * cin * cout + cout; };
    size_t expect = 0;
    expect += 5 * 144 + 144;                  // noise channel dense
    expect += conv_params(4, 8, 3) + 2 * 8;   // input conv + bn
    expect += 2 * (2 * (conv_params(8, 8, 3) + 2 * 8));  // two blocks, two conv+bn each
    expect += conv_params(8, 3, 3);           // output conv, no bn
    auto ps = g.params();
    CHECK_EQ(ps.count(), expect);

    // arch json records the same layer inventory
    auto a = g.arch();
    CHECK_EQ(a["blocks"].get<int>(), 2);
    CHECK_EQ(a["layers"].size(), 1 + 1 + 4 + 1);  // dense, conv_in, 2 blocks x 2, conv_out
}

TEST_CASE("generator: invalid shapes and noise dims are configuration errors") {
    Rng rng(33);
    ModelArch arch;
    CHECK_THROWS_AS(build_generator<float>(2, 2, 3, arch, rng), ContractError);
    CHECK_THROWS_AS(build_generator<float>(12, 12, 2, arch, rng), ContractError);
    arch.noise_dim = -1;
    CHECK_THROWS_AS(build_generator<float>(12, 12, 3, arch, rng), ContractError);
}

TEST_CASE("discriminator: one score per image; eval-mode duplicates score equally") {
    Rng rng(34);
    ModelArch arch;
    arch.disc_f1 = 8;
    arch.disc_f2 = 8;
    auto d = build_discriminator<float>(28, 28, 3, arch, rng);
    auto x = random_batch(rng, 5, 28, 28, 3, kDiscLo, kDiscHi);
    auto s = d.forward(x, nullptr);
    CHECK_EQ(s.rows(), 5);
    CHECK_EQ(s.c, 1);
    for (float v : s.v) CHECK(std::isfinite(v));

    // duplicate an image; eval mode must score copies identically
    d.mode = Mode::eval;
    Tensor<float> dup(2, 28, 28, 3);
    std::copy(x.v.begin(), x.v.begin() + dup.size() / 2, dup.v.begin());
    std::copy(x.v.begin(), x.v.begin() + dup.size() / 2, dup.v.begin() + dup.size() / 2);
    auto s2 = d.forward(dup, nullptr);
    CHECK_EQ(s2.v[0], s2.v[1]);

    // all-zero input stays finite; all-zero parameters collapse to a constant
    Tensor<float> zeros(3, 28, 28, 3);
    auto s3 = d.forward(zeros, nullptr);
    for (float v : s3.v) CHECK(std::isfinite(v));
    auto ps = d.params();
    for (auto& r : ps.refs) r.value->fill(0.0f);
    auto s4 = d.forward(x, nullptr);
    CHECK_EQ(s4.v[0], s4.v[1]);
    CHECK_EQ(s4.v[1], s4.v[2]);
}

TEST_CASE("classifier: logits shape, 43-class build, softmax properties") {
    Rng rng(35);
    ModelArch arch;
    arch.clf_conv1 = 8;
    arch.clf_conv2 = 8;
    arch.clf_fc1 = 16;
    arch.clf_fc2 = 16;
    auto c10 = build_classifier<float>(28, 28, 3, 10, arch, rng);
    auto x = random_batch(rng, 3, 28, 28, 3, kDiscLo, kDiscHi);
    auto logits = c10.forward(x, nullptr);
    CHECK_EQ(logits.rows(), 3);
    CHECK_EQ(logits.c, 10);

    auto c43 = build_classifier<float>(40, 40, 3, 43, arch, rng);
    auto x43 = random_batch(rng, 2, 40, 40, 3, kDiscLo, kDiscHi);
    CHECK_EQ(c43.forward(x43, nullptr).c, 43);

    CHECK_THROWS_AS(build_classifier<float>(28, 28, 3, 1, arch, rng), ContractError);

    // softmax rows sum to one
    auto probs = softmax(logits);
    for (int i = 0; i < probs.rows(); ++i) {
        double sum = 0;
        for (int k = 0; k < probs.c; ++k) sum += probs.v[i * probs.c + k];
        CHECK_EQ(sum, doctest::Approx(1.0).epsilon(1e-6));
    }

    // uniform logits -> uniform probabilities
    Tensor<float> flat = Tensor<float>::mat(2, 10);
    flat.fill(0.37f);
    auto u = softmax(flat);
    for (float v : u.v) CHECK_EQ(v, doctest::Approx(0.1).epsilon(1e-6));

    // shift invariance
    Tensor<float> shifted = logits;
    for (auto& v : shifted.v) v += 3.25f;
    auto p2 = softmax(shifted);
    for (size_t i = 0; i < p2.size(); ++i)
        CHECK_EQ(p2.v[i], doctest::Approx(probs.v[i]).epsilon(1e-6));
}

TEST_CASE("eval-mode forwards are deterministic functions of params and input") {
    Rng rng(36);
    ModelArch arch;
    arch.gen_features = 6;
    arch.gen_blocks = 1;
    auto g = build_generator<float>(12, 12, 3, arch, rng);
    g.mode = Mode::eval;
    auto x = random_batch(rng, 2, 12, 12, 3, kGenInLo, kGenInHi);
    auto z = rng.normal_tensor<float>(2, arch.noise_dim);
    auto y1 = g.forward(x, z, nullptr);
    auto y2 = g.forward(x, z, nullptr);
    CHECK_EQ(y1.v, y2.v);  // bitwise: eval mode mutates nothing
}

TEST_CASE("checkpoints: roundtrip restores outputs; shape validation rejects mismatches") {
    namespace fs = std::filesystem;
    Rng rng(37);
    ModelArch arch;
    arch.gen_features = 6;
    arch.gen_blocks = 1;
    auto g = build_generator<float>(12, 12, 3, arch, rng);
    auto x = random_batch(rng, 2, 12, 12, 3, kGenInLo, kGenInHi);
    auto z = rng.normal_tensor<float>(2, arch.noise_dim);
    g.mode = Mode::eval;
    auto before = g.forward(x, z, nullptr);

    const fs::path path = fs::temp_directory_path() / "bidda_model_test.bdac";
    save_model<float>(g, path);
    auto loaded = load_generator<float>(path);
    auto after = loaded.forward(x, z, nullptr);
    CHECK_EQ(before.v, after.v);

    ModelArch other = arch;
    other.gen_features = 8;
    auto g2 = build_generator<float>(12, 12, 3, other, rng);
    CHECK_THROWS_AS(load_model<float>(g2, path), IoError);
    fs::remove(path);
}
