// bidda: bi-directional adversarial domain adaptation experiments.
//
// Subcommands: train, evaluate, ablate, sweep, ssim-report, embed,
// echo-config, report. Exit codes: 0 success, 1 configuration error,
// 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "bidda/harness.hpp"
#include "bidda/image_io.hpp"

using namespace bidda;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string setting, data_root, output_dir;
    int epochs = -1;
    long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--set", args.overrides, "override, e.g. --set loss_weights.eta=0");
    cmd->add_option("--setting", args.setting,
                    "dataset pair (mnist-usps, usps-mnist, mnist-mnistm, svhn-mnist, "
                    "mnist-svhn, synthetic)");
    cmd->add_option("--data-root", args.data_root, "dataset root (or $BIDDA_DATA_ROOT)");
    cmd->add_option("--out", args.output_dir, "output directory");
    cmd->add_option("--epochs", args.epochs, "override schedule.epochs");
    cmd->add_option("--seed", args.seed, "override seed");
}

std::pair<ExperimentConfig, nlohmann::json> resolve_config(const CommonArgs& args) {
    std::vector<std::string> overrides;
    if (!args.setting.empty()) overrides.push_back("setting=" + args.setting);
    if (const char* env = std::getenv("BIDDA_DATA_ROOT"))
        overrides.push_back(std::string("data.root=") + env);
    if (!args.data_root.empty()) overrides.push_back("data.root=" + args.data_root);
    if (!args.output_dir.empty()) overrides.push_back("output_dir=" + args.output_dir);
    if (args.epochs >= 0) overrides.push_back("schedule.epochs=" + std::to_string(args.epochs));
    if (args.seed >= 0) overrides.push_back("seed=" + std::to_string(args.seed));
    overrides.insert(overrides.end(), args.overrides.begin(), args.overrides.end());
    return load_config(args.config_path, overrides);
}

void print_summary_table(const EvalResult& ev) {
    std::cout << "\nfinal target accuracy\n";
    std::cout << "  C_t                : " << ev.acc_ct << "\n";
    std::cout << "  C_s (via G_ts)     : " << ev.acc_cs_gts << "\n";
    std::cout << "  ensemble (sigma=" << ev.sigma << "): " << ev.acc_ensemble << "\n";
    std::cout << "  [source-only C_s   : " << ev.acc_cs_direct << "]\n";
}

ImageFile tensor_row_to_image(const Tensor<float>& t, int index, double lo, double hi) {
    ImageFile img;
    img.h = t.h;
    img.w = t.w;
    img.c = t.c;
    const size_t sz = static_cast<size_t>(t.h) * t.w * t.c;
    img.pixels.resize(sz);
    for (size_t i = 0; i < sz; ++i) {
        const double v = t.v[sz * index + i];
        img.pixels[i] = static_cast<float>(255.0 * (v - lo) / (hi - lo));
    }
    return img;
}

// Paired grid: originals on the top row, generated versions underneath.
void write_pair_grid(const std::filesystem::path& path, const Tensor<float>& top,
                     double top_lo, double top_hi, const Tensor<float>& bottom,
                     double bot_lo, double bot_hi, int count) {
    const int n = std::min({count, top.n, bottom.n});
    const int h = top.h, w = top.w, c = std::max(top.c, bottom.c);
    ImageFile grid;
    grid.h = 2 * h + 3;
    grid.w = n * (w + 1) + 1;
    grid.c = c;
    grid.pixels.assign(static_cast<size_t>(grid.h) * grid.w * c, 255.0f);
    auto blit = [&](const Tensor<float>& t, double lo, double hi, int index, int row, int col) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch) {
                    const int sch = t.c == 1 ? 0 : ch;
                    const double v = t.v[((static_cast<size_t>(index) * h + y) * w + x) * t.c + sch];
                    grid.pixels[((static_cast<size_t>(row) + y) * grid.w + col + x) * c + ch] =
                        static_cast<float>(255.0 * (v - lo) / (hi - lo));
                }
    };
    for (int i = 0; i < n; ++i) {
        blit(top, top_lo, top_hi, i, 1, 1 + i * (w + 1));
        blit(bottom, bot_lo, bot_hi, i, h + 2, 1 + i * (w + 1));
    }
    save_png(path, grid);
}

// Rasterize a 2-D embedding into a scatter image, colored by domain tag.
void write_scatter_png(const std::filesystem::path& path,
                       const std::vector<std::array<double, 2>>& points,
                       const std::vector<int>& domain) {
    const int size = 512;
    ImageFile img;
    img.h = img.w = size;
    img.c = 3;
    img.pixels.assign(static_cast<size_t>(size) * size * 3, 255.0f);
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (auto& p : points)
        for (int d = 0; d < 2; ++d) {
            lo[d] = std::min(lo[d], p[d]);
            hi[d] = std::max(hi[d], p[d]);
        }
    const float colors[3][3] = {{220, 60, 60}, {60, 60, 220}, {40, 160, 40}};
    for (size_t i = 0; i < points.size(); ++i) {
        const int x = static_cast<int>((points[i][0] - lo[0]) / (hi[0] - lo[0] + 1e-12) * (size - 7)) + 3;
        const int y = static_cast<int>((points[i][1] - lo[1]) / (hi[1] - lo[1] + 1e-12) * (size - 7)) + 3;
        const auto& col = colors[domain[i] % 3];
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                for (int ch = 0; ch < 3; ++ch)
                    img.pixels[((static_cast<size_t>(y + dy)) * size + x + dx) * 3 + ch] = col[ch];
    }
    save_png(path, img);
}

int cmd_train(const CommonArgs& args) {
    auto [cfg, echoed] = resolve_config(args);
    DomainPair data = load_domain_pair(parse_setting(cfg.setting), cfg.data);
    std::cout << "setting " << cfg.setting << ": source " << data.source.count() << ", target "
              << data.target.count() << ", validation " << data.target_val.count() << "\n";
    auto outcome = train<float>(cfg, data, &std::cout);
    print_summary_table(outcome.final_eval);
    if (!cfg.output_dir.empty())
        std::cout << "\nartifacts in " << cfg.output_dir << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& checkpoint) {
    auto [cfg, echoed] = resolve_config(args);
    DomainPair data = load_domain_pair(parse_setting(cfg.setting), cfg.data);
    auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                  cfg.arch, cfg.weights, cfg.sched, cfg.seed, cfg.cycle_weight);
    load_checkpoint(st, checkpoint);
    auto ev = evaluate(st, data);
    print_summary_table(ev);

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        ImageBatchT<float> xt{data.target.all().data, Range{0.0, 255.0}};
        Tensor<float> z = eval_noise<float>(xt.data.n, st.arch.noise_dim, cfg.seed);
        auto probs = ensemble_predict(st.c_s, st.c_t, st.g_ts, xt, z,
                                      EnsembleWeights{ev.sigma});
        auto preds = argmax_rows(probs);
        std::ofstream out(std::filesystem::path(cfg.output_dir) / "predictions.csv");
        out << "index,predicted";
        for (int k = 0; k < probs.c; ++k) out << ",p" << k;
        out << ",sigma\n";
        for (int i = 0; i < probs.rows(); ++i) {
            out << i << "," << preds[i];
            for (int k = 0; k < probs.c; ++k) out << "," << probs.v[i * probs.c + k];
            out << "," << ev.sigma << "\n";
        }
        std::cout << "predictions written to " << cfg.output_dir << "/predictions.csv\n";
    }
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    auto [cfg, echoed] = resolve_config(args);
    DomainPair data = load_domain_pair(parse_setting(cfg.setting), cfg.data);
    auto rows = ablation_matrix<float>(cfg, data, &std::cout);
    nlohmann::json table = nlohmann::json::array();
    std::cout << "\ncomponent study (" << cfg.setting << ")\n";
    for (auto& row : rows) {
        table.push_back(row.to_json());
        std::printf("  %-24s %.4f\n", row.name.c_str(), row.accuracy);
    }
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        std::ofstream(std::filesystem::path(cfg.output_dir) / "ablation.json")
            << table.dump(2) << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    auto [cfg, echoed] = resolve_config(args);
    DomainPair data = load_domain_pair(parse_setting(cfg.setting), cfg.data);
    auto runs = robustness_sweep<float>(cfg, data, &std::cout);
    nlohmann::json table = nlohmann::json::array();
    bool all_ok = true;
    for (auto& run : runs) {
        table.push_back(run.to_json());
        std::printf("  %-8s = %-5g %s\n", run.parameter.c_str(), run.value,
                    run.completed ? "completed" : run.error.c_str());
        all_ok = all_ok && run.completed;
    }
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        std::ofstream(std::filesystem::path(cfg.output_dir) / "sweep.json")
            << table.dump(2) << "\n";
    }
    if (!all_ok) throw TrainingError("sweep had diverging runs");
    return 0;
}

// SSIM table, image grids and the 2-D embedding export for a checkpoint.
int cmd_report(const CommonArgs& args, const std::string& checkpoint, bool with_ssim,
               bool with_embed, bool with_grids, int embed_cap) {
    auto [cfg, echoed] = resolve_config(args);
    DomainPair data = load_domain_pair(parse_setting(cfg.setting), cfg.data);
    auto st = init_trainer<float>(data.source.h, data.source.w, data.source.c, data.classes,
                                  cfg.arch, cfg.weights, cfg.sched, cfg.seed, cfg.cycle_weight);
    load_checkpoint(st, checkpoint);
    st.set_mode(Mode::eval);
    std::filesystem::path outdir(cfg.output_dir.empty() ? "." : cfg.output_dir);
    std::filesystem::create_directories(outdir);

    // generated datasets: source mapped to target and target mapped to source
    auto translate = [&](Generator<float>& g, const Dataset& ds, int cap) {
        const int n = std::min(cap, ds.count());
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        ImageBatchT<float> raw{ds.gather(idx), Range{0.0, 255.0}};
        Tensor<float> z = eval_noise<float>(n, st.arch.noise_dim, cfg.seed ^ 0x9e);
        Tensor<float> fake(n, ds.h, ds.w, ds.c);
        const int chunk = 256;
        for (int from = 0; from < n; from += chunk) {
            const int m = std::min(chunk, n - from);
            std::vector<int> sub(m);
            for (int i = 0; i < m; ++i) sub[i] = from + i;
            ImageBatchT<float> piece{ds.gather(sub), Range{0.0, 255.0}};
            Tensor<float> zc = Tensor<float>::mat(m, std::max(st.arch.noise_dim, 1));
            zc.c = st.arch.noise_dim;
            for (int i = 0; i < m * st.arch.noise_dim; ++i)
                zc.v[i] = z.v[from * st.arch.noise_dim + i];
            Tensor<float> part =
                g.forward(preprocess_generator_input(piece).data, zc, nullptr);
            std::copy(part.v.begin(), part.v.end(),
                      fake.v.begin() + static_cast<size_t>(from) * ds.image_size());
        }
        Dataset out;
        out.h = ds.h;
        out.w = ds.w;
        out.c = ds.c;
        out.pixels.resize(static_cast<size_t>(n) * ds.image_size());
        for (size_t i = 0; i < out.pixels.size(); ++i)
            out.pixels[i] = fake.v[i] + 127.5f;  // back to raw [0,255]
        out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
        return out;
    };

    const int cap = 2048;
    Dataset s_to_t = translate(st.g_st, data.source, cap);
    Dataset t_to_s = translate(st.g_ts, data.target, cap);

    if (with_ssim) {
        const int pairs = 1000;
        const double v_s = mean_intra_class_ssim(data.source, pairs, cfg.seed, cfg.ssim);
        const double v_ts = mean_intra_class_ssim(t_to_s, pairs, cfg.seed, cfg.ssim);
        const double v_st = mean_intra_class_ssim(s_to_t, pairs, cfg.seed, cfg.ssim);
        const double v_t = mean_intra_class_ssim(data.target, pairs, cfg.seed, cfg.ssim);
        nlohmann::json table{{"setting", cfg.setting},
                             {"ssim_config",
                              {{"window", cfg.ssim.window},
                               {"k1", cfg.ssim.k1},
                               {"k2", cfg.ssim.k2},
                               {"dynamic_range", cfg.ssim.dynamic_range}}},
                             {"columns", {"S", "T_to_S", "S_to_T", "T"}},
                             {"values", {v_s, v_ts, v_st, v_t}}};
        std::ofstream(outdir / "ssim_report.json") << table.dump(2) << "\n";
        std::printf("mean intra-class SSIM   S=%.3f  T->S=%.3f  S->T=%.3f  T=%.3f\n", v_s, v_ts,
                    v_st, v_t);
    }

    if (with_grids) {
        const int n = 12;
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        write_pair_grid(outdir / "grid_source_to_target.png", data.source.gather(idx), 0, 255,
                        [&] {
                            std::vector<int> j(n);
                            for (int i = 0; i < n; ++i) j[i] = i;
                            return s_to_t.gather(j);
                        }(),
                        0, 255, n);
        write_pair_grid(outdir / "grid_target_to_source.png", data.target.gather(idx), 0, 255,
                        [&] {
                            std::vector<int> j(n);
                            for (int i = 0; i < n; ++i) j[i] = i;
                            return t_to_s.gather(j);
                        }(),
                        0, 255, n);
        std::cout << "image grids written\n";
    }

    if (with_embed) {
        const int per_set = std::min({embed_cap, data.source.count(), data.target.count(),
                                      s_to_t.count()});
        std::vector<int> idx(per_set);
        for (int i = 0; i < per_set; ++i) idx[i] = i;
        Tensor<float> all(3 * per_set, data.source.h, data.source.w, data.source.c);
        std::vector<int> domain(3 * per_set), labels(3 * per_set);
        auto pack = [&](const Dataset& ds, int which, int offset) {
            Tensor<float> part = ds.gather(idx);
            std::copy(part.v.begin(), part.v.end(),
                      all.v.begin() + static_cast<size_t>(offset) * ds.image_size());
            for (int i = 0; i < per_set; ++i) {
                domain[offset + i] = which;
                labels[offset + i] = ds.labels.empty() ? -1 : ds.labels[idx[i]];
            }
        };
        pack(data.source, 0, 0);
        pack(data.target, 1, per_set);
        pack(s_to_t, 2, 2 * per_set);
        EmbedConfig ecfg;
        auto points = embed_2d(ImageBatch{all, Range{0.0, 255.0}}, ecfg, cfg.seed);
        std::ofstream csv(outdir / "embedding.csv");
        csv << "x,y,domain,label\n";
        const char* names[3] = {"source", "target", "source_to_target"};
        for (size_t i = 0; i < points.size(); ++i)
            csv << points[i][0] << "," << points[i][1] << "," << names[domain[i]] << ","
                << labels[i] << "\n";
        write_scatter_png(outdir / "embedding.png", points, domain);
        std::cout << "embedding exported (" << points.size() << " points)\n";
    }
    return 0;
}

int cmd_echo_config(const CommonArgs& args) {
    auto [cfg, echoed] = resolve_config(args);
    std::cout << echoed.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bi-directional adversarial domain adaptation"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint;
    bool no_ssim = false, no_embed = false, no_grids = false;
    int embed_cap = 600;

    auto* c_train = app.add_subcommand("train", "train the full model");
    add_common(c_train, args);
    auto* c_eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the target set");
    add_common(c_eval, args);
    c_eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    auto* c_ablate = app.add_subcommand("ablate", "run the five-row component study");
    add_common(c_ablate, args);
    auto* c_sweep = app.add_subcommand("sweep", "loss-weight robustness sweep");
    add_common(c_sweep, args);
    auto* c_ssim = app.add_subcommand("ssim-report", "mean intra-class SSIM table");
    add_common(c_ssim, args);
    c_ssim->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    auto* c_embed = app.add_subcommand("embed", "2-D embedding of raw and translated images");
    add_common(c_embed, args);
    c_embed->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    c_embed->add_option("--max-points", embed_cap, "points per set");
    auto* c_report = app.add_subcommand("report", "SSIM table + grids + embedding");
    add_common(c_report, args);
    c_report->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    c_report->add_flag("--no-ssim", no_ssim);
    c_report->add_flag("--no-embed", no_embed);
    c_report->add_flag("--no-grids", no_grids);
    c_report->add_option("--max-points", embed_cap, "embedding points per set");
    auto* c_echo = app.add_subcommand("echo-config", "print the merged configuration");
    add_common(c_echo, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_train->parsed()) return cmd_train(args);
        if (c_eval->parsed()) return cmd_evaluate(args, checkpoint);
        if (c_ablate->parsed()) return cmd_ablate(args);
        if (c_sweep->parsed()) return cmd_sweep(args);
        if (c_ssim->parsed()) return cmd_report(args, checkpoint, true, false, false, embed_cap);
        if (c_embed->parsed()) return cmd_report(args, checkpoint, false, true, false, embed_cap);
        if (c_report->parsed())
            return cmd_report(args, checkpoint, !no_ssim, !no_embed, !no_grids, embed_cap);
        if (c_echo->parsed()) return cmd_echo_config(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
