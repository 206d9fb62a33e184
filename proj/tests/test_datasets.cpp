#include <doctest.h>

#include <fstream>

#include "bidda/datasets.hpp"
#include "bidda/losses.hpp"
#include "bidda/image_io.hpp"

using namespace bidda;

namespace {
const std::filesystem::path kFixtures = std::filesystem::path(FIXTURE_DIR);
}

TEST_CASE("preprocessing: affine endpoints and exact inverses") {
    Tensor<float> t = Tensor<float>::mat(1, 3);
    t.v = {0.0f, 255.0f, 127.5f};
    ImageBatch raw{t, Range{0.0, 255.0}};

    auto g = preprocess_generator_input(raw);
    CHECK_EQ(g.data.v[0], doctest::Approx(-0.5));
    CHECK_EQ(g.data.v[1], doctest::Approx(0.5));
    CHECK_EQ(g.data.v[2], doctest::Approx(0.0));
    CHECK(g.range == Range{kGenInLo, kGenInHi});

    auto d = preprocess_discriminative_input(raw);
    CHECK_EQ(d.data.v[0], doctest::Approx(-127.5));
    CHECK_EQ(d.data.v[1], doctest::Approx(127.5));
    CHECK_EQ(d.data.v[2], doctest::Approx(0.0));

    // property: inverse maps recover the input within 1e-6
    Rng rng(41);
    Tensor<float> r(2, 5, 5, 3);
    for (auto& v : r.v) v = static_cast<float>(rng.uniform(0.0, 255.0));
    ImageBatch batch{r, Range{0.0, 255.0}};
    auto round_g = invert_generator_preprocess(preprocess_generator_input(batch));
    auto round_d = invert_discriminative_preprocess(preprocess_discriminative_input(batch));
    for (size_t i = 0; i < r.size(); ++i) {
        CHECK_EQ(round_g.data.v[i], doctest::Approx(r.v[i]).epsilon(1e-6));
        CHECK_EQ(round_d.data.v[i], doctest::Approx(r.v[i]).epsilon(1e-6));
    }

    // wrong declared range is a contract error
    CHECK_THROWS_AS(preprocess_generator_input(g), ContractError);
    CHECK_THROWS_AS(preprocess_discriminative_input(d), ContractError);
}

TEST_CASE("make_mnist_m: blend rule, channels and range") {
    const int n = 3, hw = 6;
    Tensor<float> digits(n, hw, hw, 1);
    Tensor<float> patches(n, hw, hw, 3);
    Rng rng(42);
    for (auto& v : patches.v) v = static_cast<float>(rng.uniform(0.0, 255.0));

    ImageBatch db{digits, Range{0.0, 255.0}};
    ImageBatch pb{patches, Range{0.0, 255.0}};

    SUBCASE("all-black digit: output equals the patch") {
        auto out = make_mnist_m(db, pb, 0);
        CHECK_EQ(out.data.c, 3);
        CHECK(out.range == pb.range);
        for (size_t i = 0; i < out.data.size(); ++i)
            CHECK_EQ(out.data.v[i], doctest::Approx(patches.v[i]));
    }
    SUBCASE("all-white digit: output is the per-pixel inversion of the patch") {
        db.data.fill(255.0f);
        auto out = make_mnist_m(db, pb, 0);
        for (size_t i = 0; i < out.data.size(); ++i)
            CHECK_EQ(out.data.v[i], doctest::Approx(255.0f - patches.v[i]));
    }
    SUBCASE("standard digit on constant gray: foreground differs from background") {
        pb.data.fill(100.0f);
        db.data.at(0, 2, 2, 0) = 255.0f;  // one foreground pixel
        auto out = make_mnist_m(db, pb, 0);
        CHECK_EQ(out.data.at(0, 2, 2, 0), doctest::Approx(155.0f));
        CHECK_EQ(out.data.at(0, 0, 0, 0), doctest::Approx(100.0f));
        CHECK_NE(out.data.at(0, 2, 2, 0), out.data.at(0, 0, 0, 0));
    }
    SUBCASE("patch smaller than digit is a size error") {
        Tensor<float> small(1, 4, 4, 3);
        ImageBatch sp{small, Range{0.0, 255.0}};
        CHECK_THROWS_AS(make_mnist_m(db, sp, 0), ContractError);
    }
}

TEST_CASE("batch_stream: epoch arithmetic, determinism, errors") {
    Dataset ds;
    ds.h = ds.w = 2;
    ds.c = 1;
    ds.pixels.resize(100 * 4);
    ds.labels.resize(100);
    for (int i = 0; i < 100; ++i) ds.labels[i] = i % 10;

    BatchStream s(ds, 32, 9);
    CHECK_EQ(s.batches_per_epoch(), 3);  // floor(100/32); the partial batch drops

    auto order_of = [&](int epoch) {
        BatchStream t(ds, 32, 9);
        t.start_epoch(epoch);
        std::vector<int> labels;
        Tensor<float> img;
        std::vector<int> lb;
        while (t.next(img, &lb)) labels.insert(labels.end(), lb.begin(), lb.end());
        return labels;
    };
    CHECK_EQ(order_of(0), order_of(0));  // same seed, same epoch: identical order
    CHECK_NE(order_of(0), order_of(1));  // epochs reshuffle

    Dataset empty;
    CHECK_THROWS_AS(BatchStream(empty, 4, 0), ContractError);
    CHECK_THROWS_AS(BatchStream(ds, 0, 0), ContractError);
}

TEST_CASE("synthetic domain pair: sizes, determinism, geometry") {
    DataConfig cfg;
    cfg.seed = 4;
    cfg.synth_source = 60;
    cfg.synth_target = 50;
    cfg.synth_image_size = 12;
    cfg.ensemble_val_size = 25;
    auto a = load_domain_pair(Setting::synthetic, cfg);
    CHECK_EQ(a.classes, 10);
    CHECK_EQ(a.source.count(), 60);
    CHECK_EQ(a.target.count(), 50);
    CHECK_EQ(a.target_val.count(), 25);
    CHECK_EQ(a.source.c, 3);
    CHECK_EQ(a.target.c, 3);

    auto b = load_domain_pair(Setting::synthetic, cfg);
    CHECK_EQ(a.source.pixels, b.source.pixels);  // deterministic per seed
    CHECK_EQ(a.target.pixels, b.target.pixels);
    CHECK_EQ(a.target_val.labels, b.target_val.labels);

    CHECK_THROWS_AS(parse_setting("mnist-to-mars"), ConfigError);
}

TEST_CASE("idx loader: fixture roundtrip and missing-file error") {
    auto ds = load_idx(kFixtures / "tiny-images-idx3-ubyte", kFixtures / "tiny-labels-idx1-ubyte");
    CHECK_EQ(ds.count(), 4);
    CHECK_EQ(ds.h, 6);
    CHECK_EQ(ds.w, 6);
    CHECK_EQ(ds.labels, std::vector<int>{0, 1, 2, 3});
    CHECK_EQ(ds.image(1)[2 * 6 + 3], doctest::Approx(209.0f));  // frozen from the generator

    try {
        load_idx(kFixtures / "no-such-images", kFixtures / "tiny-labels-idx1-ubyte");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("no-such-images") != std::string::npos);
    }
}

TEST_CASE("svhn mat loader: compressed matrix, layout, label 10 -> 0") {
    auto ds = load_svhn_mat(kFixtures / "tiny_svhn.mat");
    CHECK_EQ(ds.count(), 5);
    CHECK_EQ(ds.h, 8);
    CHECK_EQ(ds.w, 8);
    CHECK_EQ(ds.c, 3);
    CHECK_EQ(ds.labels, std::vector<int>{1, 5, 0, 3, 7});  // 10 encodes digit 0
    // frozen pixel values from the fixture generator
    CHECK_EQ(ds.image(0)[0], doctest::Approx(102.0f));
    CHECK_EQ(ds.image(0)[1], doctest::Approx(61.0f));
    CHECK_EQ(ds.image(0)[2], doctest::Approx(98.0f));
    const float* img1 = ds.image(1);
    CHECK_EQ(img1[(2 * 8 + 3) * 3 + 0], doctest::Approx(170.0f));
    CHECK_EQ(img1[(2 * 8 + 3) * 3 + 1], doctest::Approx(77.0f));
    CHECK_EQ(img1[(2 * 8 + 3) * 3 + 2], doctest::Approx(52.0f));
}

TEST_CASE("usps loader: libsvm text format") {
    auto ds = load_usps_libsvm(kFixtures / "tiny_usps.t");
    CHECK_EQ(ds.count(), 2);
    CHECK_EQ(ds.h, 16);
    CHECK_EQ(ds.w, 16);
    CHECK_EQ(ds.labels, std::vector<int>{0, 9});  // labels 1..10 encode digits 0..9
    for (float v : ds.pixels) {
        CHECK_GE(v, 0.0f);
        CHECK_LE(v, 255.0f);
    }
}

TEST_CASE("dataset container: versioned save/load roundtrip") {
    namespace fs = std::filesystem;
    DataConfig cfg;
    cfg.synth_source = 10;
    cfg.synth_target = 10;
    cfg.ensemble_val_size = 5;
    auto pair = load_domain_pair(Setting::synthetic, cfg);
    const fs::path path = fs::temp_directory_path() / "bidda_ds_test.bdds";
    save_dataset(path, pair.target, pair.classes);
    auto [loaded, classes] = load_dataset(path);
    CHECK_EQ(classes, 10);
    CHECK_EQ(loaded.pixels, pair.target.pixels);
    CHECK_EQ(loaded.labels, pair.target.labels);
    fs::remove(path);
}

TEST_CASE("resize and channel replication") {
    Dataset ds;
    ds.h = ds.w = 4;
    ds.c = 1;
    ds.pixels.assign(16, 55.0f);
    ds.labels = {7};
    auto up = resize_bilinear(ds, 9, 9);
    CHECK_EQ(up.h, 9);
    for (float v : up.pixels) CHECK_EQ(v, doctest::Approx(55.0f));  // constant image stays constant
    auto rgb = to_three_channels(ds);
    CHECK_EQ(rgb.c, 3);
    CHECK_EQ(rgb.pixels.size(), ds.pixels.size() * 3);
    CHECK_EQ(rgb.labels, ds.labels);
}

TEST_CASE("texture pipeline: procedural set, directory loading, image io") {
    namespace fs = std::filesystem;
    auto tex = make_procedural_textures(4, 16, 3);
    CHECK_EQ(tex.count(), 4);
    CHECK_EQ(tex.c, 3);

    const fs::path dir = fs::temp_directory_path() / "bidda_tex_test";
    fs::create_directories(dir);
    for (int i = 0; i < tex.count(); ++i) {
        ImageFile img;
        img.h = img.w = 16;
        img.c = 3;
        img.pixels.assign(tex.image(i), tex.image(i) + tex.image_size());
        save_png(dir / ("t" + std::to_string(i) + ".png"), img);
        save_ppm(dir / ("t" + std::to_string(i) + ".ppm"), img);
    }
    auto loaded = load_image_directory(dir);
    CHECK_EQ(loaded.count(), 8);  // png + ppm copies
    CHECK_EQ(loaded.h, 16);
    // 8-bit quantization through the files
    CHECK_EQ(loaded.image(0)[0], doctest::Approx(tex.image(0)[0]).epsilon(0.51));
    fs::remove_all(dir);
}
