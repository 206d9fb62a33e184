#pragma once

#include "bidda/adam.hpp"
#include "bidda/nets.hpp"
#include "bidda/serialize.hpp"

namespace bidda {

// Model checkpoints store the architecture descriptor plus every parameter
// and normalization buffer as named float64 arrays. Loading validates each
// shape against the live network.

template <typename S, typename Net>
void save_model(Net& net, const std::filesystem::path& path) {
    std::vector<NamedArray> arrays;
    auto push = [&](const std::string& name, const Tensor<S>& t) {
        NamedArray a;
        a.name = name;
        a.shape = {t.n, t.h, t.w, t.c};
        a.data.assign(t.v.begin(), t.v.end());
        arrays.push_back(std::move(a));
    };
    auto ps = net.params();
    for (auto& r : ps.refs) push(r.name, *r.value);
    for (auto& r : net.buffers()) push(r.name, *r.value);
    nlohmann::json meta = {{"arch", net.arch()},
                           {"mode", net.mode == Mode::train ? "train" : "eval"}};
    write_array_container(path, meta, arrays);
}

template <typename S, typename Net>
void load_model(Net& net, const std::filesystem::path& path) {
    auto [meta, arrays] = read_array_container(path);
    if (meta["arch"] != net.arch())
        throw IoError("checkpoint architecture mismatch for " + path.string());
    auto assign = [&](ParamRef<S>& r, const NamedArray& a) {
        const std::vector<int> shape{r.value->n, r.value->h, r.value->w, r.value->c};
        if (a.shape != shape)
            throw IoError("checkpoint shape mismatch for array '" + a.name + "' in " +
                          path.string());
        for (size_t i = 0; i < a.data.size(); ++i) r.value->v[i] = static_cast<S>(a.data[i]);
    };
    size_t k = 0;
    auto ps = net.params();
    for (auto& r : ps.refs) {
        if (k >= arrays.size() || arrays[k].name != r.name)
            throw IoError("checkpoint array order mismatch at '" + r.name + "' in " +
                          path.string());
        assign(r, arrays[k++]);
    }
    for (auto& r : net.buffers()) {
        if (k >= arrays.size() || arrays[k].name != r.name)
            throw IoError("checkpoint array order mismatch at '" + r.name + "' in " +
                          path.string());
        assign(r, arrays[k++]);
    }
    net.mode = meta["mode"] == "eval" ? Mode::eval : Mode::train;
}

template <typename S>
void save_adam(Adam<S>& opt, const ParamList<S>& ps, const std::filesystem::path& path) {
    std::vector<NamedArray> arrays;
    for (size_t i = 0; i < ps.refs.size(); ++i) {
        NamedArray m{ps.refs[i].name + ".m",
                     {static_cast<int>(opt.m[i].size())},
                     {opt.m[i].begin(), opt.m[i].end()}};
        NamedArray v{ps.refs[i].name + ".v",
                     {static_cast<int>(opt.v[i].size())},
                     {opt.v[i].begin(), opt.v[i].end()}};
        arrays.push_back(std::move(m));
        arrays.push_back(std::move(v));
    }
    nlohmann::json meta = {{"kind", "adam"},
                           {"step", opt.step_count},
                           {"lr", opt.lr},
                           {"beta1", opt.beta1},
                           {"beta2", opt.beta2},
                           {"eps", opt.eps}};
    write_array_container(path, meta, arrays);
}

template <typename S>
void load_adam(Adam<S>& opt, const ParamList<S>& ps, const std::filesystem::path& path) {
    auto [meta, arrays] = read_array_container(path);
    if (meta["kind"] != "adam") throw IoError("not an optimizer checkpoint: " + path.string());
    if (arrays.size() != ps.refs.size() * 2)
        throw IoError("optimizer checkpoint array count mismatch in " + path.string());
    opt.step_count = meta["step"].get<long>();
    for (size_t i = 0; i < ps.refs.size(); ++i) {
        const auto& m = arrays[i * 2];
        const auto& v = arrays[i * 2 + 1];
        if (m.data.size() != opt.m[i].size() || v.data.size() != opt.v[i].size())
            throw IoError("optimizer checkpoint shape mismatch in " + path.string());
        for (size_t j = 0; j < m.data.size(); ++j) opt.m[i][j] = static_cast<S>(m.data[j]);
        for (size_t j = 0; j < v.data.size(); ++j) opt.v[i][j] = static_cast<S>(v.data[j]);
    }
}

// Reconstruct networks from a checkpoint's stored architecture.
template <typename S>
Generator<S> load_generator(const std::filesystem::path& path) {
    auto [meta, arrays] = read_array_container(path);
    const auto& a = meta["arch"];
    if (a["kind"] != "generator") throw IoError("not a generator checkpoint: " + path.string());
    ModelArch arch;
    arch.gen_features = a["features"].get<int>();
    arch.gen_blocks = a["blocks"].get<int>();
    arch.noise_dim = a["noise_dim"].get<int>();
    Rng rng(0);
    auto net = build_generator<S>(a["image"][0].get<int>(), a["image"][1].get<int>(),
                                  a["image"][2].get<int>(), arch, rng);
    load_model<S>(net, path);
    return net;
}

template <typename S>
Discriminator<S> load_discriminator(const std::filesystem::path& path) {
    auto [meta, arrays] = read_array_container(path);
    const auto& a = meta["arch"];
    if (a["kind"] != "discriminator")
        throw IoError("not a discriminator checkpoint: " + path.string());
    ModelArch arch;
    arch.disc_f1 = a["features"][0].get<int>();
    arch.disc_f2 = a["features"][1].get<int>();
    arch.disc_final_bn = a["final_bn"].get<bool>();
    arch.leaky_slope = a["leaky_slope"].get<double>();
    Rng rng(0);
    auto net = build_discriminator<S>(a["image"][0].get<int>(), a["image"][1].get<int>(),
                                      a["image"][2].get<int>(), arch, rng);
    load_model<S>(net, path);
    return net;
}

template <typename S>
Classifier<S> load_classifier(const std::filesystem::path& path) {
    auto [meta, arrays] = read_array_container(path);
    const auto& a = meta["arch"];
    if (a["kind"] != "classifier") throw IoError("not a classifier checkpoint: " + path.string());
    ModelArch arch;
    arch.clf_conv1 = a["conv"][0].get<int>();
    arch.clf_conv2 = a["conv"][1].get<int>();
    arch.clf_fc1 = a["fc"][0].get<int>();
    arch.clf_fc2 = a["fc"][1].get<int>();
    arch.clf_kernel = a["kernel"].get<int>();
    Rng rng(0);
    auto net = build_classifier<S>(a["image"][0].get<int>(), a["image"][1].get<int>(),
                                   a["image"][2].get<int>(), a["classes"].get<int>(), arch, rng);
    load_model<S>(net, path);
    return net;
}

}  // namespace bidda
