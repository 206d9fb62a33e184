#pragma once

#include <json.hpp>

#include "bidda/layers.hpp"

namespace bidda {

// Pixel range conventions, from the training protocol: generators consume
// [-0.5, 0.5] and emit [-127.5, 127.5]; discriminators and classifiers
// consume [-127.5, 127.5].
struct Range {
    double lo = 0.0, hi = 255.0;
    bool operator==(const Range&) const = default;
};
inline constexpr double kGenInLo = -0.5, kGenInHi = 0.5;
inline constexpr double kDiscLo = -127.5, kDiscHi = 127.5;

struct ModelArch {
    int gen_features = 64;
    int gen_blocks = 4;
    int noise_dim = 5;
    int disc_f1 = 64, disc_f2 = 128;
    int clf_conv1 = 32, clf_conv2 = 48;
    int clf_fc1 = 100, clf_fc2 = 100;
    int clf_kernel = 5;
    bool disc_final_bn = false;
    double init_std = 0.02;
    double bn_momentum = 0.99;
    double leaky_slope = 0.2;
};

template <typename S>
Tensor<S> concat_channel(const Tensor<S>& a, const Tensor<S>& b) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat: spatial shape mismatch");
    Tensor<S> out(a.n, a.h, a.w, a.c + b.c);
    const int R = a.rows();
    for (int r = 0; r < R; ++r) {
        std::memcpy(out.data() + static_cast<size_t>(r) * out.c,
                    a.data() + static_cast<size_t>(r) * a.c, sizeof(S) * a.c);
        std::memcpy(out.data() + static_cast<size_t>(r) * out.c + a.c,
                    b.data() + static_cast<size_t>(r) * b.c, sizeof(S) * b.c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generator: residual network at constant resolution. The noise vector is
// mapped by a dense layer to one extra channel at image resolution and
// concatenated to the input. Output is tanh-bounded to [-127.5, 127.5].
// ---------------------------------------------------------------------------
template <typename S>
struct Generator {
    int h = 0, w = 0, c = 0, nz = 0;
    int features = 0, nblocks = 0;
    Mode mode = Mode::train;

    Dense<S> zfc;
    Conv2d<S> conv_in;
    BatchNorm<S> bn_in;
    struct Block {
        Conv2d<S> c1;
        BatchNorm<S> b1;
        Conv2d<S> c2;
        BatchNorm<S> b2;
    };
    std::vector<Block> blocks;
    Conv2d<S> conv_out;
    ScaledTanh<S> out_act{kDiscHi};

    struct Cache {
        typename Dense<S>::Cache zfc;
        typename Conv2d<S>::Cache conv_in;
        typename BatchNorm<S>::Cache bn_in;
        typename Relu<S>::Cache relu_in;
        struct BlockCache {
            typename Conv2d<S>::Cache c1;
            typename BatchNorm<S>::Cache b1;
            typename Relu<S>::Cache r1;
            typename Conv2d<S>::Cache c2;
            typename BatchNorm<S>::Cache b2;
        };
        std::vector<BlockCache> blocks;
        typename Conv2d<S>::Cache conv_out;
        typename ScaledTanh<S>::Cache out_act;
    };

    Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& z, Cache* cc) {
        require(x.h == h && x.w == w && x.c == c,
                "generator: input " + x.shape_str() + " does not match model");
        Tensor<S> xin;
        if (nz > 0) {
            require(z.rows() == x.n && z.c == nz, "generator: noise shape mismatch");
            Tensor<S> zmap = zfc.forward(z, cc ? &cc->zfc : nullptr);
            zmap.n = x.n;
            zmap.h = h;
            zmap.w = w;
            zmap.c = 1;  // (B, h*w) and (B, h, w, 1) share memory layout
            xin = concat_channel(x, zmap);
        } else {
            xin = x;
        }
        Tensor<S> a = conv_in.forward(xin, cc ? &cc->conv_in : nullptr);
        a = bn_in.forward(a, cc ? &cc->bn_in : nullptr, mode);
        a = Relu<S>::forward(a, cc ? &cc->relu_in : nullptr);
        if (cc) cc->blocks.resize(blocks.size());
        for (size_t i = 0; i < blocks.size(); ++i) {
            auto* bc = cc ? &cc->blocks[i] : nullptr;
            Tensor<S> t = blocks[i].c1.forward(a, bc ? &bc->c1 : nullptr);
            t = blocks[i].b1.forward(t, bc ? &bc->b1 : nullptr, mode);
            t = Relu<S>::forward(t, bc ? &bc->r1 : nullptr);
            t = blocks[i].c2.forward(t, bc ? &bc->c2 : nullptr);
            t = blocks[i].b2.forward(t, bc ? &bc->b2 : nullptr, mode);
            for (size_t k = 0; k < a.size(); ++k) a.v[k] += t.v[k];
        }
        Tensor<S> y = conv_out.forward(a, cc ? &cc->conv_out : nullptr);
        return out_act.forward(y, cc ? &cc->out_act : nullptr);
    }

    // Returns gradient w.r.t. the image input.
    Tensor<S> backward(const Tensor<S>& dy, const Cache& cc, bool acc_grads) {
        Tensor<S> d = out_act.backward(dy, cc.out_act);
        d = conv_out.backward(d, cc.conv_out, acc_grads);
        for (size_t i = blocks.size(); i-- > 0;) {
            const auto& bc = cc.blocks[i];
            Tensor<S> t = blocks[i].b2.backward(d, bc.b2, acc_grads);
            t = blocks[i].c2.backward(t, bc.c2, acc_grads);
            t = Relu<S>::backward(t, bc.r1);
            t = blocks[i].b1.backward(t, bc.b1, acc_grads);
            t = blocks[i].c1.backward(t, bc.c1, acc_grads);
            for (size_t k = 0; k < d.size(); ++k) d.v[k] += t.v[k];
        }
        d = Relu<S>::backward(d, cc.relu_in);
        d = bn_in.backward(d, cc.bn_in, acc_grads);
        d = conv_in.backward(d, cc.conv_in, acc_grads);
        if (nz > 0) {
            Tensor<S> dz_map = Tensor<S>::mat(d.n, h * w);
            Tensor<S> dx(d.n, h, w, c);
            for (int r = 0; r < d.rows(); ++r) {
                std::memcpy(dx.data() + static_cast<size_t>(r) * c,
                            d.data() + static_cast<size_t>(r) * d.c, sizeof(S) * c);
                dz_map.v[r] = d.v[static_cast<size_t>(r) * d.c + c];
            }
            zfc.backward(dz_map, cc.zfc, acc_grads);  // noise gradient unused
            return dx;
        }
        return d;
    }

    ParamList<S> params() {
        ParamList<S> ps;
        if (nz > 0) zfc.collect(ps, "zfc");
        conv_in.collect(ps, "conv_in");
        bn_in.collect(ps, "bn_in");
        for (size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "block" + std::to_string(i);
            blocks[i].c1.collect(ps, p + ".c1");
            blocks[i].b1.collect(ps, p + ".b1");
            blocks[i].c2.collect(ps, p + ".c2");
            blocks[i].b2.collect(ps, p + ".b2");
        }
        conv_out.collect(ps, "conv_out");
        return ps;
    }

    std::vector<ParamRef<S>> buffers() {
        std::vector<ParamRef<S>> bs;
        auto add = [&](const std::string& name, BatchNorm<S>& bn) {
            bs.push_back({name + ".run_mean", &bn.run_mean, nullptr});
            bs.push_back({name + ".run_var", &bn.run_var, nullptr});
        };
        add("bn_in", bn_in);
        for (size_t i = 0; i < blocks.size(); ++i) {
            add("block" + std::to_string(i) + ".b1", blocks[i].b1);
            add("block" + std::to_string(i) + ".b2", blocks[i].b2);
        }
        return bs;
    }

    nlohmann::json arch() const {
        nlohmann::json layers = nlohmann::json::array();
        auto conv = [](int cin, int cout, int k, bool bn, const std::string& act) {
            return nlohmann::json{{"kind", "conv"}, {"cin", cin},   {"cout", cout},
                                  {"k", k},         {"batchnorm", bn}, {"activation", act}};
        };
        if (nz > 0)
            layers.push_back({{"kind", "dense"}, {"in", nz}, {"out", h * w},
                              {"role", "noise_channel"}});
        layers.push_back(conv(c + (nz > 0 ? 1 : 0), features, 3, true, "relu"));
        for (int i = 0; i < nblocks; ++i) {
            layers.push_back(conv(features, features, 3, true, "relu"));
            layers.push_back(conv(features, features, 3, true, "residual_add"));
        }
        layers.push_back(conv(features, c, 3, false, "scaled_tanh"));
        return {{"kind", "generator"},
                {"image", {h, w, c}},
                {"noise_dim", nz},
                {"features", features},
                {"blocks", nblocks},
                {"output_bound", out_act.scale},
                {"layers", layers}};
    }
};

template <typename S>
Generator<S> build_generator(int h, int w, int c, const ModelArch& arch, Rng& rng) {
    require(h >= 3 && w >= 3 && (c == 1 || c == 3),
            "generator: invalid image shape " + std::to_string(h) + "x" +
                std::to_string(w) + "x" + std::to_string(c));
    require(arch.noise_dim >= 0, "generator: noise_dim must be >= 0");
    Generator<S> g;
    g.h = h;
    g.w = w;
    g.c = c;
    g.nz = arch.noise_dim;
    g.features = arch.gen_features;
    g.nblocks = arch.gen_blocks;
    if (g.nz > 0) g.zfc = Dense<S>(g.nz, h * w, rng, arch.init_std);
    g.conv_in = Conv2d<S>(c + (g.nz > 0 ? 1 : 0), g.features, 3, 1, 1, rng, arch.init_std);
    g.bn_in = BatchNorm<S>(g.features, arch.bn_momentum);
    g.blocks.resize(arch.gen_blocks);
    for (auto& b : g.blocks) {
        b.c1 = Conv2d<S>(g.features, g.features, 3, 1, 1, rng, arch.init_std);
        b.b1 = BatchNorm<S>(g.features, arch.bn_momentum);
        b.c2 = Conv2d<S>(g.features, g.features, 3, 1, 1, rng, arch.init_std);
        b.b2 = BatchNorm<S>(g.features, arch.bn_momentum);
    }
    g.conv_out = Conv2d<S>(g.features, c, 3, 1, 1, rng, arch.init_std);
    return g;
}

// ---------------------------------------------------------------------------
// Discriminator: two strided convolutions, average pooling (omitted when the
// map is already 1x1), and a final convolution collapsing to one score per
// image. Scores are unbounded; the least-squares loss needs no sigmoid.
// ---------------------------------------------------------------------------
template <typename S>
struct Discriminator {
    int h = 0, w = 0, c = 0;
    bool use_pool = true;
    bool final_bn = false;
    Mode mode = Mode::train;
    LeakyRelu<S> act;

    Conv2d<S> c1;
    BatchNorm<S> b1;
    Conv2d<S> c2;
    BatchNorm<S> b2;
    Conv2d<S> c3;
    BatchNorm<S> b3;

    struct Cache {
        typename Conv2d<S>::Cache c1, c2, c3;
        typename BatchNorm<S>::Cache b1, b2, b3;
        typename LeakyRelu<S>::Cache a1, a2;
        typename AvgPool2<S>::Cache pool;
    };

    // Returns (B, 1): one score per image.
    Tensor<S> forward(const Tensor<S>& x, Cache* cc) {
        require(x.h == h && x.w == w && x.c == c,
                "discriminator: input " + x.shape_str() + " does not match model");
        Tensor<S> a = c1.forward(x, cc ? &cc->c1 : nullptr);
        a = b1.forward(a, cc ? &cc->b1 : nullptr, mode);
        a = act.forward(a, cc ? &cc->a1 : nullptr);
        a = c2.forward(a, cc ? &cc->c2 : nullptr);
        a = b2.forward(a, cc ? &cc->b2 : nullptr, mode);
        a = act.forward(a, cc ? &cc->a2 : nullptr);
        if (use_pool) a = AvgPool2<S>::forward(a, cc ? &cc->pool : nullptr);
        a = c3.forward(a, cc ? &cc->c3 : nullptr);
        if (final_bn) a = b3.forward(a, cc ? &cc->b3 : nullptr, mode);
        a.h = a.w = 1;  // (B,1,1,1) -> (B,1)
        return a;
    }

    Tensor<S> backward(const Tensor<S>& dscore, const Cache& cc, bool acc_grads) {
        Tensor<S> d = dscore;
        d.h = d.w = 1;
        d.c = 1;
        if (final_bn) d = b3.backward(d, cc.b3, acc_grads);
        d = c3.backward(d, cc.c3, acc_grads);
        if (use_pool) d = AvgPool2<S>::backward(d, cc.pool);
        d = act.backward(d, cc.a2);
        d = b2.backward(d, cc.b2, acc_grads);
        d = c2.backward(d, cc.c2, acc_grads);
        d = act.backward(d, cc.a1);
        d = b1.backward(d, cc.b1, acc_grads);
        d = c1.backward(d, cc.c1, acc_grads);
        return d;
    }

    ParamList<S> params() {
        ParamList<S> ps;
        c1.collect(ps, "c1");
        b1.collect(ps, "b1");
        c2.collect(ps, "c2");
        b2.collect(ps, "b2");
        c3.collect(ps, "c3");
        if (final_bn) b3.collect(ps, "b3");
        return ps;
    }

    std::vector<ParamRef<S>> buffers() {
        std::vector<ParamRef<S>> bs{{"b1.run_mean", &b1.run_mean, nullptr},
                                    {"b1.run_var", &b1.run_var, nullptr},
                                    {"b2.run_mean", &b2.run_mean, nullptr},
                                    {"b2.run_var", &b2.run_var, nullptr}};
        if (final_bn) {
            bs.push_back({"b3.run_mean", &b3.run_mean, nullptr});
            bs.push_back({"b3.run_var", &b3.run_var, nullptr});
        }
        return bs;
    }

    nlohmann::json arch() const {
        return {{"kind", "discriminator"},
                {"image", {h, w, c}},
                {"features", {c1.cout, c2.cout}},
                {"leaky_slope", act.slope},
                {"avg_pool", use_pool},
                {"final_bn", final_bn},
                {"final_kernel", c3.k}};
    }
};

template <typename S>
Discriminator<S> build_discriminator(int h, int w, int c, const ModelArch& arch, Rng& rng) {
    require(h >= 4 && w >= 4 && (c == 1 || c == 3),
            "discriminator: invalid image shape");
    require(h == w, "discriminator: square images expected");
    Discriminator<S> d;
    d.h = h;
    d.w = w;
    d.c = c;
    d.act.slope = arch.leaky_slope;
    d.final_bn = arch.disc_final_bn;
    d.c1 = Conv2d<S>(c, arch.disc_f1, 3, 2, 1, rng, arch.init_std);
    int s = d.c1.out_dim(h);
    d.b1 = BatchNorm<S>(arch.disc_f1, arch.bn_momentum);
    d.c2 = Conv2d<S>(arch.disc_f1, arch.disc_f2, 3, 2, 1, rng, arch.init_std);
    s = d.c2.out_dim(s);
    d.use_pool = s >= 2;
    if (d.use_pool) s /= 2;
    d.b2 = BatchNorm<S>(arch.disc_f2, arch.bn_momentum);
    d.c3 = Conv2d<S>(arch.disc_f2, 1, s, 1, 0, rng, arch.init_std);
    if (d.final_bn) d.b3 = BatchNorm<S>(1, arch.bn_momentum);
    return d;
}

// ---------------------------------------------------------------------------
// Classifier: two conv+maxpool stages and three dense layers emitting K
// logits. Softmax is applied by consumers.
// ---------------------------------------------------------------------------
template <typename S>
struct Classifier {
    int h = 0, w = 0, c = 0, num_classes = 0;
    int flat = 0;
    Mode mode = Mode::train;

    Conv2d<S> c1, c2;
    Dense<S> f1, f2, fout;

    struct Cache {
        typename Conv2d<S>::Cache c1, c2;
        typename Relu<S>::Cache r1, r2, r3, r4;
        typename MaxPool2<S>::Cache p1, p2;
        typename Dense<S>::Cache f1, f2, fout;
        int pooled_h = 0, pooled_w = 0, pooled_c = 0;
    };

    // Returns logits (B, K).
    Tensor<S> forward(const Tensor<S>& x, Cache* cc) {
        require(x.h == h && x.w == w && x.c == c,
                "classifier: input " + x.shape_str() + " does not match model");
        Tensor<S> a = c1.forward(x, cc ? &cc->c1 : nullptr);
        a = Relu<S>::forward(a, cc ? &cc->r1 : nullptr);
        a = MaxPool2<S>::forward(a, cc ? &cc->p1 : nullptr);
        a = c2.forward(a, cc ? &cc->c2 : nullptr);
        a = Relu<S>::forward(a, cc ? &cc->r2 : nullptr);
        a = MaxPool2<S>::forward(a, cc ? &cc->p2 : nullptr);
        if (cc) {
            cc->pooled_h = a.h;
            cc->pooled_w = a.w;
            cc->pooled_c = a.c;
        }
        a.c = a.h * a.w * a.c;  // flatten; NHWC rows are contiguous per image
        a.h = a.w = 1;
        a = f1.forward(a, cc ? &cc->f1 : nullptr);
        a = Relu<S>::forward(a, cc ? &cc->r3 : nullptr);
        a = f2.forward(a, cc ? &cc->f2 : nullptr);
        a = Relu<S>::forward(a, cc ? &cc->r4 : nullptr);
        return fout.forward(a, cc ? &cc->fout : nullptr);
    }

    Tensor<S> backward(const Tensor<S>& dlogits, const Cache& cc, bool acc_grads) {
        Tensor<S> d = fout.backward(dlogits, cc.fout, acc_grads);
        d = Relu<S>::backward(d, cc.r4);
        d = f2.backward(d, cc.f2, acc_grads);
        d = Relu<S>::backward(d, cc.r3);
        d = f1.backward(d, cc.f1, acc_grads);
        d.h = cc.pooled_h;
        d.w = cc.pooled_w;
        d.c = cc.pooled_c;
        d = MaxPool2<S>::backward(d, cc.p2);
        d = Relu<S>::backward(d, cc.r2);
        d = c2.backward(d, cc.c2, acc_grads);
        d = MaxPool2<S>::backward(d, cc.p1);
        d = Relu<S>::backward(d, cc.r1);
        d = c1.backward(d, cc.c1, acc_grads);
        return d;
    }

    ParamList<S> params() {
        ParamList<S> ps;
        c1.collect(ps, "c1");
        c2.collect(ps, "c2");
        f1.collect(ps, "f1");
        f2.collect(ps, "f2");
        fout.collect(ps, "fout");
        return ps;
    }

    std::vector<ParamRef<S>> buffers() { return {}; }

    nlohmann::json arch() const {
        return {{"kind", "classifier"},
                {"image", {h, w, c}},
                {"classes", num_classes},
                {"conv", {c1.cout, c2.cout}},
                {"kernel", c1.k},
                {"fc", {f1.out, f2.out}},
                {"flat", flat}};
    }
};

template <typename S>
Classifier<S> build_classifier(int h, int w, int c, int num_classes, const ModelArch& arch,
                               Rng& rng) {
    require(num_classes >= 2, "classifier: need at least two classes");
    require(h >= 4 && w >= 4 && (c == 1 || c == 3), "classifier: invalid image shape");
    Classifier<S> m;
    m.h = h;
    m.w = w;
    m.c = c;
    m.num_classes = num_classes;
    const int k = arch.clf_kernel, p = (arch.clf_kernel - 1) / 2;
    m.c1 = Conv2d<S>(c, arch.clf_conv1, k, 1, p, rng, arch.init_std);
    m.c2 = Conv2d<S>(arch.clf_conv1, arch.clf_conv2, k, 1, p, rng, arch.init_std);
    const int ph = h / 2 / 2, pw = w / 2 / 2;
    require(ph >= 1 && pw >= 1, "classifier: image too small for two pooling stages");
    m.flat = ph * pw * arch.clf_conv2;
    m.f1 = Dense<S>(m.flat, arch.clf_fc1, rng, arch.init_std);
    m.f2 = Dense<S>(arch.clf_fc1, arch.clf_fc2, rng, arch.init_std);
    m.fout = Dense<S>(arch.clf_fc2, num_classes, rng, arch.init_std);
    return m;
}

// Eval wrappers with the range contracts. Training paths drive the
// forward/backward methods directly.
template <typename S, typename Net>
void set_mode(Net& net, Mode m) {
    net.mode = m;
}

template <typename S>
Tensor<S> generate(Generator<S>& g, const Tensor<S>& x, const Range& range,
                   const Tensor<S>& z) {
    require(range == Range{kGenInLo, kGenInHi},
            "generate: input range must be [-0.5, 0.5]");
    return g.forward(x, z, nullptr);
}

template <typename S>
Tensor<S> discriminate(Discriminator<S>& d, const Tensor<S>& x) {
    return d.forward(x, nullptr);
}

template <typename S>
Tensor<S> classify(Classifier<S>& c, const Tensor<S>& x) {
    return softmax(c.forward(x, nullptr));
}

}  // namespace bidda
