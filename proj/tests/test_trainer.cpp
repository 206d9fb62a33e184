#include <doctest.h>

#include "bidda/harness.hpp"

using namespace bidda;

namespace {

// Tiny end-to-end configuration: 40+40 images, miniature networks.
ExperimentConfig smoke_config() {
    ExperimentConfig cfg;
    cfg.setting = "synthetic";
    cfg.seed = 7;
    cfg.output_dir.clear();
    cfg.data.synth_source = 40;
    cfg.data.synth_target = 40;
    cfg.data.synth_image_size = 12;
    cfg.data.ensemble_val_size = 20;
    cfg.data.seed = cfg.seed;
    cfg.arch.gen_features = 6;
    cfg.arch.gen_blocks = 1;
    cfg.arch.disc_f1 = 6;
    cfg.arch.disc_f2 = 8;
    cfg.arch.clf_conv1 = 6;
    cfg.arch.clf_conv2 = 8;
    cfg.arch.clf_fc1 = 16;
    cfg.arch.clf_fc2 = 16;
    cfg.arch.clf_kernel = 3;
    cfg.sched.epochs = 2;
    cfg.sched.eta_activation_epoch = 1;
    cfg.sched.batch_size = 8;
    cfg.sched.eval_interval = 100;
    cfg.sched.checkpoint_interval = 100;
    return cfg;
}

template <typename Net>
std::vector<float> snapshot(Net& net) {
    std::vector<float> out;
    auto ps = net.params();
    for (auto& r : ps.refs) out.insert(out.end(), r.value->v.begin(), r.value->v.end());
    return out;
}

}  // namespace

TEST_CASE("train_step: zero learning rates leave parameters bit-identical") {
    auto cfg = smoke_config();
    cfg.sched.lr_generator = cfg.sched.lr_discriminator = cfg.sched.lr_classifier = 0.0;
    DomainPair data = load_domain_pair(Setting::synthetic, cfg.data);
    auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                  cfg.arch, cfg.weights, cfg.sched, cfg.seed);
    st.epoch = cfg.sched.eta_activation_epoch;  // eta active, all paths exercised

    BatchStream src(data.source, 8, 1), tgt(data.target, 8, 2);
    Tensor<float> xs, xt;
    LabelBatch ys;
    src.next(xs, &ys);
    tgt.next(xt, nullptr);

    auto before_g = snapshot(st.g_st);
    auto before_d = snapshot(st.d_t);
    auto before_c = snapshot(st.c_s);
    Rng noise(3);
    auto report = train_step(st, xs, ys, xt, noise);
    CHECK(std::isfinite(report.total));
    CHECK_EQ(before_g, snapshot(st.g_st));
    CHECK_EQ(before_d, snapshot(st.d_t));
    CHECK_EQ(before_c, snapshot(st.c_s));
}

TEST_CASE("train_step: update isolation between sub-steps") {
    auto cfg = smoke_config();
    DomainPair data = load_domain_pair(Setting::synthetic, cfg.data);
    BatchStream src(data.source, 8, 1), tgt(data.target, 8, 2);
    Tensor<float> xs, xt;
    LabelBatch ys;
    src.next(xs, &ys);
    tgt.next(xt, nullptr);

    SUBCASE("adversarial-only step leaves both classifiers untouched") {
        auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                      cfg.arch, cfg.weights, cfg.sched, cfg.seed);
        st.weights.beta = st.weights.mu = st.weights.eta = st.weights.nu = 0.0;
        auto cs_before = snapshot(st.c_s);
        auto ct_before = snapshot(st.c_t);
        auto dt_before = snapshot(st.d_t);
        auto ds_before = snapshot(st.d_s);
        Rng noise(3);
        train_step(st, xs, ys, xt, noise);
        CHECK_EQ(cs_before, snapshot(st.c_s));
        CHECK_EQ(ct_before, snapshot(st.c_t));
        CHECK_NE(dt_before, snapshot(st.d_t));
        CHECK_NE(ds_before, snapshot(st.d_s));
    }
    SUBCASE("classifier step leaves both discriminators untouched") {
        auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                      cfg.arch, cfg.weights, cfg.sched, cfg.seed);
        st.weights.alpha = st.weights.gamma = 0.0;
        auto dt_before = snapshot(st.d_t);
        auto ds_before = snapshot(st.d_s);
        auto ct_before = snapshot(st.c_t);
        Rng noise(3);
        train_step(st, xs, ys, xt, noise);
        CHECK_EQ(dt_before, snapshot(st.d_t));
        CHECK_EQ(ds_before, snapshot(st.d_s));
        CHECK_NE(ct_before, snapshot(st.c_t));
    }
}

TEST_CASE("train_step: eta gate excludes the self term before activation") {
    auto cfg = smoke_config();
    DomainPair data = load_domain_pair(Setting::synthetic, cfg.data);
    auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                  cfg.arch, cfg.weights, cfg.sched, cfg.seed);
    BatchStream src(data.source, 8, 1), tgt(data.target, 8, 2);
    Tensor<float> xs, xt;
    LabelBatch ys;
    src.next(xs, &ys);
    tgt.next(xt, nullptr);
    Rng noise(3);

    st.epoch = 0;  // before activation
    auto r0 = train_step(st, xs, ys, xt, noise);
    CHECK_EQ(r0.terms.count("L_self"), 0);

    st.epoch = cfg.sched.eta_activation_epoch;
    auto r1 = train_step(st, xs, ys, xt, noise);
    CHECK_EQ(r1.terms.count("L_self"), 1);
}

TEST_CASE("train: two identical seeded runs produce identical loss sequences") {
    auto cfg = smoke_config();
    DomainPair data = load_domain_pair(Setting::synthetic, cfg.data);

    auto run = [&]() {
        auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                      cfg.arch, cfg.weights, cfg.sched, cfg.seed);
        std::vector<double> totals;
        BatchStream src(data.source, cfg.sched.batch_size, cfg.seed ^ 0x50a1ull);
        BatchStream tgt(data.target, cfg.sched.batch_size, cfg.seed ^ 0x7a21ull);
        Tensor<float> xs, xt;
        LabelBatch ys;
        for (int epoch = 0; epoch < cfg.sched.epochs; ++epoch) {
            st.epoch = epoch;
            Rng noise(cfg.seed, 0x401e0000ull + epoch);
            src.start_epoch(epoch);
            tgt.start_epoch(epoch << 20);
            while (src.next(xs, &ys)) {
                tgt.next_cycling(xt, nullptr);
                totals.push_back(train_step(st, xs, ys, xt, noise).total);
            }
        }
        return totals;
    };
    CHECK_EQ(run(), run());
}

TEST_CASE("train: epochs=0 returns an initialized state with a final evaluation") {
    auto cfg = smoke_config();
    cfg.sched.epochs = 0;
    cfg.sched.eta_activation_epoch = 0;
    DomainPair data = load_domain_pair(Setting::synthetic, cfg.data);
    auto outcome = train<float>(cfg, data);
    CHECK_EQ(outcome.state.step, 0);
    CHECK_GE(outcome.final_eval.acc_ensemble, 0.0);
    CHECK_LE(outcome.final_eval.acc_ensemble, 1.0);
}

TEST_CASE("train: checkpoint resume reproduces the subsequent loss sequence") {
    auto cfg = smoke_config();
    cfg.sched.epochs = 2;
    cfg.sched.eta_activation_epoch = 1;
    cfg.sched.checkpoint_interval = 1;
    cfg.sched.eval_interval = 2;
    DomainPair data = load_domain_pair(Setting::synthetic, cfg.data);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "bidda_resume_test";
    fs::remove_all(dir);

    cfg.output_dir = (dir / "full").string();
    auto full = train<float>(cfg, data);

    // Fresh trainer resumed from the epoch-1 checkpoint must match epoch 2.
    ExperimentConfig cfg2 = cfg;
    cfg2.output_dir = (dir / "resumed").string();
    auto resumed =
        train<float>(cfg2, data, nullptr, fs::path(cfg.output_dir) / "checkpoints" / "epoch_0001");

    auto final_params = [&](TrainerState<float>& st) {
        std::vector<float> out;
        auto pg = st.g_st.params();
        auto pc = st.c_t.params();
        for (auto& r : pg.refs) out.insert(out.end(), r.value->v.begin(), r.value->v.end());
        for (auto& r : pc.refs) out.insert(out.end(), r.value->v.begin(), r.value->v.end());
        return out;
    };
    CHECK_EQ(final_params(full.state), final_params(resumed.state));
    CHECK_EQ(full.final_eval.acc_ensemble, doctest::Approx(resumed.final_eval.acc_ensemble));
    fs::remove_all(dir);
}
