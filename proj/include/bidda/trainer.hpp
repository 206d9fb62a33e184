#pragma once

#include <fstream>
#include <iostream>
#include <optional>

#include "bidda/adam.hpp"
#include "bidda/checkpoint.hpp"
#include "bidda/config.hpp"
#include "bidda/inference.hpp"
#include "bidda/manifest.hpp"

namespace bidda {

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& m) : std::runtime_error(m) {}
};

template <typename S>
struct TrainerState {
    int h = 0, w = 0, c = 0, classes = 0;
    ModelArch arch;
    LossWeights weights;
    TrainingSchedule sched;
    double cycle_weight = 0.0;
    uint64_t seed = 1;

    Generator<S> g_st, g_ts;
    Discriminator<S> d_s, d_t;
    Classifier<S> c_s, c_t;
    Adam<S> opt_g_st, opt_g_ts, opt_d_s, opt_d_t, opt_c_s, opt_c_t;

    int epoch = 0;  // completed epochs
    long step = 0;

    // Self-labeling is off until the activation epoch of the schedule.
    double current_eta() const {
        return epoch < sched.eta_activation_epoch ? 0.0 : weights.eta;
    }

    void set_mode(Mode m) {
        g_st.mode = g_ts.mode = d_s.mode = d_t.mode = c_s.mode = c_t.mode = m;
    }
};

template <typename S>
TrainerState<S> init_trainer(int h, int w, int c, int classes, const ModelArch& arch,
                             const LossWeights& weights, const TrainingSchedule& sched,
                             uint64_t seed, double cycle_weight = 0.0) {
    weights.validate();
    sched.validate();
    TrainerState<S> st;
    st.h = h;
    st.w = w;
    st.c = c;
    st.classes = classes;
    st.arch = arch;
    st.weights = weights;
    st.sched = sched;
    st.seed = seed;
    st.cycle_weight = cycle_weight;

    Rng r_gst(seed, 0x1001), r_gts(seed, 0x1002), r_ds(seed, 0x1003), r_dt(seed, 0x1004),
        r_cs(seed, 0x1005), r_ct(seed, 0x1006);
    st.g_st = build_generator<S>(h, w, c, arch, r_gst);
    st.g_ts = build_generator<S>(h, w, c, arch, r_gts);
    st.d_s = build_discriminator<S>(h, w, c, arch, r_ds);
    st.d_t = build_discriminator<S>(h, w, c, arch, r_dt);
    st.c_s = build_classifier<S>(h, w, c, classes, arch, r_cs);
    st.c_t = build_classifier<S>(h, w, c, classes, arch, r_ct);

    auto adam = [&](auto& net, double lr) {
        return Adam<S>(net.params(), lr, sched.adam_beta1, sched.adam_beta2, sched.adam_eps);
    };
    st.opt_g_st = adam(st.g_st, sched.lr_generator);
    st.opt_g_ts = adam(st.g_ts, sched.lr_generator);
    st.opt_d_s = adam(st.d_s, sched.lr_discriminator);
    st.opt_d_t = adam(st.d_t, sched.lr_discriminator);
    st.opt_c_s = adam(st.c_s, sched.lr_classifier);
    st.opt_c_t = adam(st.c_t, sched.lr_classifier);
    return st;
}

// ---------------------------------------------------------------------------
// One optimization step: discriminator updates first (fakes detached), then a
// joint generator/classifier update on the weighted sum of the remaining
// terms. Noise is drawn fresh for every pass, in a fixed order.
// ---------------------------------------------------------------------------
template <typename S>
LossReport train_step(TrainerState<S>& st, const Tensor<float>& src_raw, const LabelBatch& ys,
                      const Tensor<float>& tgt_raw, Rng& noise) {
    const double eta = st.current_eta();
    const auto& w = st.weights;

    ImageBatchT<S> src{cast_tensor<S>(src_raw), Range{0.0, 255.0}};
    ImageBatchT<S> tgt{cast_tensor<S>(tgt_raw), Range{0.0, 255.0}};
    const Tensor<S> xs_gen = preprocess_generator_input(src).data;
    const Tensor<S> xs_disc = preprocess_discriminative_input(src).data;
    const Tensor<S> xt_gen = preprocess_generator_input(tgt).data;
    const Tensor<S> xt_disc = preprocess_discriminative_input(tgt).data;

    const int bs = src_raw.n, bt = tgt_raw.n, nz = st.arch.noise_dim;
    auto draw = [&](int n) { return noise.normal_tensor<S>(n, nz); };
    const Tensor<S> z1s = draw(bs), z1t = draw(bt);  // discriminator phase
    const Tensor<S> z2s = draw(bs), z2t = draw(bt);  // adversarial/classification
    const Tensor<S> z3s = draw(bs), z3t = draw(bs);  // consistency path
    const Tensor<S> z4s = draw(bs), z4t = draw(bs);  // optional cycle baseline

    std::map<std::string, double> terms;
    auto check_finite = [&](const char* name, double v) {
        if (!std::isfinite(v))
            throw TrainingError(std::string("non-finite loss ") + name + " at step " +
                                std::to_string(st.step));
        return v;
    };

    // --- discriminator phase ---
    if (w.alpha > 0) {
        Tensor<S> fake_t = st.g_st.forward(xs_gen, z1s, nullptr);
        auto dps = st.d_t.params();
        dps.zero_grads();
        terms["L_Dt"] =
            check_finite("L_Dt", lsgan_discriminator_loss(st.d_t, xt_disc, fake_t, w.alpha, true));
        st.opt_d_t.step(dps);
    }
    if (w.gamma > 0) {
        Tensor<S> fake_s = st.g_ts.forward(xt_gen, z1t, nullptr);
        auto dps = st.d_s.params();
        dps.zero_grads();
        terms["L_Ds"] =
            check_finite("L_Ds", lsgan_discriminator_loss(st.d_s, xs_disc, fake_s, w.gamma, true));
        st.opt_d_s.step(dps);
    }

    // --- joint generator/classifier phase ---
    auto ps_gst = st.g_st.params();
    auto ps_gts = st.g_ts.params();
    auto ps_cs = st.c_s.params();
    auto ps_ct = st.c_t.params();
    ps_gst.zero_grads();
    ps_gts.zero_grads();
    ps_cs.zero_grads();
    ps_ct.zero_grads();

    if (w.alpha > 0 || w.beta > 0) {
        typename Generator<S>::Cache cg;
        Tensor<S> x_st = st.g_st.forward(xs_gen, z2s, &cg);
        Tensor<S> dx(x_st.n, x_st.h, x_st.w, x_st.c);
        if (w.alpha > 0) {
            Tensor<S> dfake;
            terms["adv_st"] =
                check_finite("adv_st", lsgan_generator_loss(st.d_t, x_st, &dfake, w.alpha));
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dfake.v[i];
        }
        if (w.beta > 0) {
            typename Classifier<S>::Cache cc;
            Tensor<S> logits = st.c_t.forward(x_st, &cc);
            Tensor<S> dl;
            terms["L_Ct"] = check_finite("L_Ct", softmax_ce(logits, ys, &dl));
            for (auto& v : dl.v) v *= S(w.beta);
            Tensor<S> dci = st.c_t.backward(dl, cc, true);
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dci.v[i];
        }
        st.g_st.backward(dx, cg, true);
    }

    if (w.gamma > 0 || eta > 0) {
        typename Generator<S>::Cache cg;
        Tensor<S> x_ts = st.g_ts.forward(xt_gen, z2t, &cg);
        Tensor<S> dx(x_ts.n, x_ts.h, x_ts.w, x_ts.c);
        if (w.gamma > 0) {
            Tensor<S> dfake;
            terms["adv_ts"] =
                check_finite("adv_ts", lsgan_generator_loss(st.d_s, x_ts, &dfake, w.gamma));
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dfake.v[i];
        }
        if (eta > 0) {
            const LabelBatch y_self = assign_pseudo_labels(st.c_s, st.g_ts, xt_gen, z2t);
            typename Classifier<S>::Cache cc;
            Tensor<S> logits = st.c_s.forward(x_ts, &cc);
            Tensor<S> dl;
            terms["L_self"] = check_finite("L_self", softmax_ce(logits, y_self, &dl));
            for (auto& v : dl.v) v *= S(eta);
            Tensor<S> dci = st.c_s.backward(dl, cc, true);
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dci.v[i];
        }
        st.g_ts.backward(dx, cg, true);
    }

    if (w.mu > 0)
        terms["L_Cs"] = check_finite("L_Cs", loss_Cs(st.c_s, xs_disc, ys, w.mu, true));
    if (w.nu > 0)
        terms["L_cons"] = check_finite(
            "L_cons", loss_consistency(st.g_st, st.g_ts, st.c_s, xs_gen, z3s, z3t, ys, w.nu, true));
    if (st.cycle_weight > 0)
        terms["L_cycle"] = check_finite(
            "L_cycle",
            cycle_reconstruction_loss(st.g_st, st.g_ts, xs_gen, z4s, z4t, st.cycle_weight, true));

    if (w.alpha > 0 || w.beta > 0 || w.nu > 0 || st.cycle_weight > 0) st.opt_g_st.step(ps_gst);
    if (w.gamma > 0 || eta > 0 || w.nu > 0 || st.cycle_weight > 0) st.opt_g_ts.step(ps_gts);
    if (w.mu > 0 || eta > 0 || w.nu > 0) st.opt_c_s.step(ps_cs);
    if (w.beta > 0) st.opt_c_t.step(ps_ct);

    ++st.step;

    LossWeights effective = w;
    effective.eta = eta;
    LossReport report = total_loss(effective, terms);
    if (st.cycle_weight > 0) report.total += st.cycle_weight * terms["L_cycle"];
    check_finite("total", report.total);
    return report;
}

// ---------------------------------------------------------------------------
// Evaluation on the target set (eval mode; running statistics frozen).
// ---------------------------------------------------------------------------
struct EvalResult {
    double acc_ct = 0.0;        // C_t on raw target images
    double acc_cs_gts = 0.0;    // C_s on source-like translations
    double acc_ensemble = 0.0;  // sigma-weighted combination
    double acc_cs_direct = 0.0; // C_s applied to raw target (source-only reference)
    double sigma = 0.0;

    nlohmann::json to_json() const {
        return {{"acc_ct", acc_ct},
                {"acc_cs_gts", acc_cs_gts},
                {"acc_ensemble", acc_ensemble},
                {"acc_cs_direct", acc_cs_direct},
                {"sigma", sigma}};
    }
};

template <typename S>
EvalResult evaluate(TrainerState<S>& st, const DomainPair& data, int chunk = 256) {
    require(!data.target.labels.empty(), "evaluate: target ground truth required");
    EvalResult res;

    ImageBatchT<S> val{cast_tensor<S>(data.target_val.all().data), Range{0.0, 255.0}};
    Tensor<S> z_val = eval_noise<S>(val.data.n, st.arch.noise_dim, st.seed ^ 0x5a5aull);
    auto sel = select_sigma_detailed(st.c_s, st.c_t, st.g_ts, val, data.target_val.labels, z_val);
    res.sigma = sel.weights.sigma;

    ImageBatchT<S> xt{cast_tensor<S>(data.target.all().data), Range{0.0, 255.0}};
    Tensor<S> z = eval_noise<S>(xt.data.n, st.arch.noise_dim, st.seed);
    auto parts = ensemble_parts(st.c_s, st.c_t, st.g_ts, xt, z, chunk);
    res.acc_ct = accuracy(argmax_rows(parts.probs_ct), data.target.labels);
    res.acc_cs_gts = accuracy(argmax_rows(parts.probs_cs), data.target.labels);
    res.acc_ensemble =
        accuracy(argmax_rows(combine_probs(parts, sel.weights)), data.target.labels);

    // direct C_s(x_t): the no-adaptation reference
    const Mode mcs = st.c_s.mode;
    st.c_s.mode = Mode::eval;
    const size_t image_sz = static_cast<size_t>(xt.data.h) * xt.data.w * xt.data.c;
    Tensor<S> probs = Tensor<S>::mat(xt.data.n, st.classes);
    for (int from = 0; from < xt.data.n; from += chunk) {
        const int n = std::min(chunk, xt.data.n - from);
        Tensor<S> part(n, xt.data.h, xt.data.w, xt.data.c);
        std::memcpy(part.data(), xt.data.data() + image_sz * from, part.size() * sizeof(S));
        ImageBatchT<S> b{std::move(part), Range{0.0, 255.0}};
        Tensor<S> p = softmax(st.c_s.forward(preprocess_discriminative_input(b).data, nullptr));
        std::memcpy(probs.data() + static_cast<size_t>(from) * st.classes, p.data(),
                    p.size() * sizeof(S));
    }
    st.c_s.mode = mcs;
    res.acc_cs_direct = accuracy(argmax_rows(probs), data.target.labels);
    return res;
}

// ---------------------------------------------------------------------------
// Checkpointing: one file per network plus optimizer state plus a counters
// file; the run directory also keeps a copy of the config.
// ---------------------------------------------------------------------------
template <typename S>
void save_checkpoint(TrainerState<S>& st, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_model<S>(st.g_st, dir / "g_st.bdac");
    save_model<S>(st.g_ts, dir / "g_ts.bdac");
    save_model<S>(st.d_s, dir / "d_s.bdac");
    save_model<S>(st.d_t, dir / "d_t.bdac");
    save_model<S>(st.c_s, dir / "c_s.bdac");
    save_model<S>(st.c_t, dir / "c_t.bdac");
    save_adam(st.opt_g_st, st.g_st.params(), dir / "adam_g_st.bdac");
    save_adam(st.opt_g_ts, st.g_ts.params(), dir / "adam_g_ts.bdac");
    save_adam(st.opt_d_s, st.d_s.params(), dir / "adam_d_s.bdac");
    save_adam(st.opt_d_t, st.d_t.params(), dir / "adam_d_t.bdac");
    save_adam(st.opt_c_s, st.c_s.params(), dir / "adam_c_s.bdac");
    save_adam(st.opt_c_t, st.c_t.params(), dir / "adam_c_t.bdac");
    std::ofstream out(dir / "state.json");
    out << nlohmann::json{{"epoch", st.epoch}, {"step", st.step}}.dump(2) << "\n";
}

template <typename S>
void load_checkpoint(TrainerState<S>& st, const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "state.json"))
        throw IoError("missing checkpoint: " + (dir / "state.json").string());
    load_model<S>(st.g_st, dir / "g_st.bdac");
    load_model<S>(st.g_ts, dir / "g_ts.bdac");
    load_model<S>(st.d_s, dir / "d_s.bdac");
    load_model<S>(st.d_t, dir / "d_t.bdac");
    load_model<S>(st.c_s, dir / "c_s.bdac");
    load_model<S>(st.c_t, dir / "c_t.bdac");
    load_adam(st.opt_g_st, st.g_st.params(), dir / "adam_g_st.bdac");
    load_adam(st.opt_g_ts, st.g_ts.params(), dir / "adam_g_ts.bdac");
    load_adam(st.opt_d_s, st.d_s.params(), dir / "adam_d_s.bdac");
    load_adam(st.opt_d_t, st.d_t.params(), dir / "adam_d_t.bdac");
    load_adam(st.opt_c_s, st.c_s.params(), dir / "adam_c_s.bdac");
    load_adam(st.opt_c_t, st.c_t.params(), dir / "adam_c_t.bdac");
    std::ifstream in(dir / "state.json");
    nlohmann::json j = nlohmann::json::parse(in);
    st.epoch = j["epoch"].get<int>();
    st.step = j["step"].get<long>();
    st.set_mode(Mode::train);
}

// Guards one experiment per output directory.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
        std::filesystem::create_directories(dir);
        if (std::filesystem::exists(path_))
            throw ConfigError("output directory " + dir.string() +
                              " is locked by another run (delete .lock to override)");
        std::ofstream(path_) << "locked\n";
    }
    ~DirLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Full training loop with the eta schedule, periodic evaluation, metrics log
// and checkpoints. An empty output_dir runs fully in memory.
// ---------------------------------------------------------------------------
template <typename S>
struct TrainOutcome {
    TrainerState<S> state;
    EvalResult final_eval;
};

template <typename S>
TrainOutcome<S> train(const ExperimentConfig& cfg, const DomainPair& data,
                      std::ostream* progress = nullptr,
                      const std::filesystem::path& resume_from = {}) {
    cfg.validate();
    require(data.source.count() > 0, "train: empty source dataset");
    require(data.target.count() > 0, "train: empty target dataset");
    require(!data.source.labels.empty(), "train: source labels required");

    const int h = data.source.h, w2 = data.source.w, c = data.source.c;
    require(h == data.target.h && w2 == data.target.w && c == data.target.c,
            "train: source/target geometry mismatch");

    TrainOutcome<S> out{
        init_trainer<S>(h, w2, c, data.classes, cfg.arch, cfg.weights, cfg.sched, cfg.seed,
                        cfg.cycle_weight),
        {}};
    TrainerState<S>& st = out.state;
    if (!resume_from.empty()) load_checkpoint(st, resume_from);

    const bool persist = !cfg.output_dir.empty();
    std::optional<DirLock> lock;
    std::ofstream metrics;
    std::filesystem::path outdir(cfg.output_dir);
    if (persist) {
        lock.emplace(outdir);
        std::ofstream(outdir / "config.json") << config_to_json(cfg).dump(2) << "\n";
        write_manifest(outdir, config_to_json(cfg), cfg.seed);
        metrics.open(outdir / "metrics.jsonl", st.epoch > 0 ? std::ios::app : std::ios::out);
    }

    BatchStream src_stream(data.source, cfg.sched.batch_size, cfg.seed ^ 0x50a1ull);
    BatchStream tgt_stream(data.target, cfg.sched.batch_size, cfg.seed ^ 0x7a21ull);

    Tensor<float> src_batch, tgt_batch;
    LabelBatch ys, yt_unused;
    bool evaluated = false;
    for (; st.epoch < cfg.sched.epochs;) {
        const int epoch = st.epoch;
        Rng noise(cfg.seed, 0x401e0000ull + static_cast<uint64_t>(epoch));
        src_stream.start_epoch(epoch);
        tgt_stream.start_epoch(epoch << 20);  // per-epoch band; resume-safe cycling
        st.set_mode(Mode::train);
        while (src_stream.next(src_batch, &ys)) {
            tgt_stream.next_cycling(tgt_batch, &yt_unused);
            LossReport report = train_step(st, src_batch, ys, tgt_batch, noise);
            if (persist) {
                nlohmann::json line{{"step", st.step}, {"epoch", epoch}};
                line["terms"] = report.to_json();
                metrics << line.dump() << "\n";
            }
        }
        st.epoch = epoch + 1;

        const bool last = st.epoch == cfg.sched.epochs;
        if ((cfg.sched.eval_interval > 0 && st.epoch % cfg.sched.eval_interval == 0) || last) {
            out.final_eval = evaluate(st, data);
            evaluated = true;
            if (progress)
                (*progress) << "epoch " << st.epoch << "  C_t " << out.final_eval.acc_ct
                            << "  C_s(G_ts) " << out.final_eval.acc_cs_gts << "  ensemble "
                            << out.final_eval.acc_ensemble << "  sigma " << out.final_eval.sigma
                            << "\n";
            if (persist) {
                nlohmann::json line{{"type", "eval"}, {"epoch", st.epoch}};
                line.update(out.final_eval.to_json());
                metrics << line.dump() << "\n";
            }
        }
        if (persist && ((cfg.sched.checkpoint_interval > 0 &&
                         st.epoch % cfg.sched.checkpoint_interval == 0) ||
                        last)) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04d", st.epoch);
            save_checkpoint(st, outdir / "checkpoints" / name);
            save_checkpoint(st, outdir / "checkpoints" / "latest");
        }
    }

    if (!evaluated) out.final_eval = evaluate(st, data);
    if (cfg.sched.epochs == 0 && persist)
        save_checkpoint(st, outdir / "checkpoints" / "latest");

    if (persist) {
        nlohmann::json summary{{"setting", cfg.setting},
                               {"seed", cfg.seed},
                               {"epochs", cfg.sched.epochs},
                               {"accuracy",
                                {{"C_t", out.final_eval.acc_ct},
                                 {"C_s", out.final_eval.acc_cs_gts},
                                 {"ensemble", out.final_eval.acc_ensemble}}},
                               {"sigma", out.final_eval.sigma},
                               {"source_only_reference", out.final_eval.acc_cs_direct}};
        std::ofstream(outdir / "summary.json") << summary.dump(2) << "\n";
    }
    return out;
}

}  // namespace bidda
