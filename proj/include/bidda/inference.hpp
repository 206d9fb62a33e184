#pragma once

#include <array>

#include "bidda/datasets.hpp"
#include "bidda/losses.hpp"
#include "bidda/metrics.hpp"

namespace bidda {

struct EnsembleWeights {
    double sigma = 0.5;
    double tau() const { return 1.0 - sigma; }
    void validate() const {
        if (sigma < 0.0 || sigma > 1.0) throw ConfigError("sigma must lie in [0,1]");
    }
};

inline constexpr int kSigmaGridSize = 11;  // 0, 0.1, ..., 1

// One seeded standard-normal draw per image; fixed across the sigma grid.
template <typename S>
Tensor<S> eval_noise(int count, int nz, uint64_t seed) {
    Tensor<S> z = Tensor<S>::mat(count, std::max(nz, 1));
    z.c = nz;  // nz == 0 yields an empty but well-shaped tensor
    if (nz > 0) {
        Rng rng(seed, 0xe7a1ull);
        for (int i = 0; i < count * nz; ++i) z.v[i] = static_cast<S>(rng.normal());
    }
    return z;
}

namespace detail {

// Chunked eval-mode softmax probabilities of net(prep(x)).
template <typename S, typename Prep, typename Run>
Tensor<S> chunked_probs(int count, int k, int chunk, Prep prep, Run run) {
    Tensor<S> out = Tensor<S>::mat(count, k);
    for (int from = 0; from < count; from += chunk) {
        const int n = std::min(chunk, count - from);
        Tensor<S> part = run(prep(from, n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j)
                out.v[static_cast<size_t>(from + i) * k + j] =
                    part.v[static_cast<size_t>(i) * k + j];
    }
    return out;
}

}  // namespace detail

// Probability outputs of the two test-time paths, computed once in eval mode:
// rows of C_t(x_t) and of C_s(G_ts(x_t, z_t)).
template <typename S>
struct EnsembleParts {
    Tensor<S> probs_cs;  // source classifier on source-like translations
    Tensor<S> probs_ct;  // target classifier on raw target images
};

template <typename S>
EnsembleParts<S> ensemble_parts(Classifier<S>& c_s, Classifier<S>& c_t, Generator<S>& g_ts,
                                const ImageBatchT<S>& x_raw, const Tensor<S>& z,
                                int chunk = 256) {
    require(x_raw.range == Range{0.0, 255.0}, "ensemble: raw [0,255] images expected");
    const auto& t = x_raw.data;
    require(z.rows() == t.n, "ensemble: noise batch size mismatch");
    const Mode ms = c_s.mode, mt = c_t.mode, mg = g_ts.mode;
    c_s.mode = c_t.mode = g_ts.mode = Mode::eval;

    auto slice = [&](int from, int n) {
        Tensor<S> part(n, t.h, t.w, t.c);
        std::memcpy(part.data(), t.data() + static_cast<size_t>(from) * t.h * t.w * t.c,
                    part.size() * sizeof(S));
        return part;
    };
    auto slice_z = [&](int from, int n) {
        Tensor<S> part = Tensor<S>::mat(n, z.c);
        if (z.c > 0)
            std::memcpy(part.data(), z.data() + static_cast<size_t>(from) * z.c,
                        part.size() * sizeof(S));
        return part;
    };

    EnsembleParts<S> parts;
    parts.probs_ct = detail::chunked_probs<S>(
        t.n, c_t.num_classes, chunk,
        [&](int from, int n) {
            ImageBatchT<S> b{slice(from, n), Range{0.0, 255.0}};
            return preprocess_discriminative_input(b).data;
        },
        [&](Tensor<S> x) { return softmax(c_t.forward(x, nullptr)); });
    parts.probs_cs = detail::chunked_probs<S>(
        t.n, c_s.num_classes, chunk,
        [&](int from, int n) {
            ImageBatchT<S> b{slice(from, n), Range{0.0, 255.0}};
            return g_ts.forward(preprocess_generator_input(b).data, slice_z(from, n), nullptr);
        },
        [&](Tensor<S> fake) { return softmax(c_s.forward(fake, nullptr)); });

    c_s.mode = ms;
    c_t.mode = mt;
    g_ts.mode = mg;
    return parts;
}

// sigma * C_s(G_ts(x_t, z_t)) + tau * C_t(x_t); rows remain distributions.
template <typename S>
Tensor<S> combine_probs(const EnsembleParts<S>& parts, const EnsembleWeights& w) {
    w.validate();
    if (w.sigma == 0.0) return parts.probs_ct;
    if (w.sigma == 1.0) return parts.probs_cs;
    Tensor<S> out = parts.probs_cs;
    for (size_t i = 0; i < out.size(); ++i)
        out.v[i] = S(w.sigma) * parts.probs_cs.v[i] + S(w.tau()) * parts.probs_ct.v[i];
    return out;
}

template <typename S>
Tensor<S> ensemble_predict(Classifier<S>& c_s, Classifier<S>& c_t, Generator<S>& g_ts,
                           const ImageBatchT<S>& x_raw, const Tensor<S>& z,
                           const EnsembleWeights& w) {
    return combine_probs(ensemble_parts(c_s, c_t, g_ts, x_raw, z), w);
}

template <typename S>
LabelBatch argmax_rows(const Tensor<S>& probs) {
    LabelBatch out(probs.rows());
    for (int i = 0; i < probs.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < probs.c; ++j)
            if (probs.v[static_cast<size_t>(i) * probs.c + j] >
                probs.v[static_cast<size_t>(i) * probs.c + best])
                best = j;
        out[i] = best;
    }
    return out;
}

struct SigmaSelection {
    EnsembleWeights weights;
    std::array<double, kSigmaGridSize> grid_accuracy{};
};

// Grid search over sigma in {0, 0.1, ..., 1}; ties break to the smallest.
template <typename S>
SigmaSelection select_sigma_detailed(Classifier<S>& c_s, Classifier<S>& c_t, Generator<S>& g_ts,
                                     const ImageBatchT<S>& val_images, const LabelBatch& val_labels,
                                     const Tensor<S>& z) {
    require(val_images.data.n > 0 && !val_labels.empty(), "select_sigma: empty validation set");
    require(val_images.data.n == static_cast<int>(val_labels.size()),
            "select_sigma: image/label count mismatch");
    auto parts = ensemble_parts(c_s, c_t, g_ts, val_images, z);
    SigmaSelection sel;
    int best = 0;
    for (int i = 0; i < kSigmaGridSize; ++i) {
        EnsembleWeights w{i / 10.0};
        sel.grid_accuracy[i] = accuracy(argmax_rows(combine_probs(parts, w)), val_labels);
        if (sel.grid_accuracy[i] > sel.grid_accuracy[best]) best = i;
    }
    sel.weights.sigma = best / 10.0;
    return sel;
}

template <typename S>
EnsembleWeights select_sigma(Classifier<S>& c_s, Classifier<S>& c_t, Generator<S>& g_ts,
                             const ImageBatchT<S>& val_images, const LabelBatch& val_labels,
                             const Tensor<S>& z) {
    return select_sigma_detailed(c_s, c_t, g_ts, val_images, val_labels, z).weights;
}

}  // namespace bidda
