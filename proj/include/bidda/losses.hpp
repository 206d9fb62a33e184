#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bidda/nets.hpp"

namespace bidda {

using LabelBatch = std::vector<int>;

// Generator outputs live in [-127.5, 127.5]; feeding them to the other
// generator requires rescaling to its [-0.5, 0.5] input range.
inline constexpr double kDiscToGenScale = 1.0 / 255.0;

struct LossWeights {
    double alpha = 1.0;   // target-domain discriminator
    double beta = 10.0;   // target-domain classifier
    double gamma = 1.0;   // source-domain discriminator
    double mu = 10.0;     // source-domain classifier
    double eta = 1.0;     // self-labeling (gated by the schedule)
    double nu = 1.0;      // class consistency

    void validate() const {
        for (double v : {alpha, beta, gamma, mu, eta, nu})
            if (v < 0.0 || !std::isfinite(v))
                throw ConfigError("loss weights must be nonnegative finite values");
    }
};

struct LossReport {
    std::map<std::string, double> terms;
    double total = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"total", total}};
        for (auto& [k, v] : terms) j[k] = v;
        return j;
    }
};

// Weighted sum of the six named terms. Terms absent from the map count as 0.
inline LossReport total_loss(const LossWeights& w, const std::map<std::string, double>& terms) {
    w.validate();
    auto get = [&](const char* k) {
        auto it = terms.find(k);
        return it == terms.end() ? 0.0 : it->second;
    };
    LossReport r;
    r.terms = terms;
    r.total = w.alpha * get("L_Dt") + w.beta * get("L_Ct") + w.gamma * get("L_Ds") +
              w.mu * get("L_Cs") + w.eta * get("L_self") + w.nu * get("L_cons");
    return r;
}

// ---------------------------------------------------------------------------
// Scalar-level primitives.
// ---------------------------------------------------------------------------

// Mean over the batch of -log p[label], with probabilities clipped to
// [1e-7, 1] against log(0).
template <typename S>
double cross_entropy(const Tensor<S>& probs, const LabelBatch& labels) {
    require(probs.rows() == static_cast<int>(labels.size()),
            "cross_entropy: batch size mismatch");
    require(probs.rows() >= 1, "cross_entropy: empty batch");
    auto p = as_mat(probs);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double row_sum = 0.0;
        for (int k = 0; k < probs.c; ++k) {
            require(p(i, k) >= S(-1e-6), "cross_entropy: negative probability");
            row_sum += p(i, k);
        }
        require(std::abs(row_sum - 1.0) < 1e-4, "cross_entropy: row does not sum to 1");
        const int y = labels[i];
        require(y >= 0 && y < probs.c, "cross_entropy: label out of range");
        acc += -std::log(std::clamp(static_cast<double>(p(i, y)), 1e-7, 1.0));
    }
    return acc / static_cast<double>(p.rows());
}

// Fused softmax cross-entropy on logits; fills dlogits with the batch-mean
// gradient (p - onehot)/B when requested.
template <typename S>
double softmax_ce(const Tensor<S>& logits, const LabelBatch& labels, Tensor<S>* dlogits) {
    Tensor<S> p = softmax(logits);
    const double loss = cross_entropy(p, labels);
    if (dlogits) {
        *dlogits = p;
        const S invb = S(1) / S(p.rows());
        for (int i = 0; i < p.rows(); ++i) {
            dlogits->v[static_cast<size_t>(i) * p.c + labels[i]] -= S(1);
        }
        for (auto& v : dlogits->v) v *= invb;
    }
    return loss;
}

// mean[(s_real - 1)^2] + mean[s_fake^2]; minimized by the discriminator.
template <typename S>
double lsgan_discriminator_value(const Tensor<S>& s_real, const Tensor<S>& s_fake,
                                 Tensor<S>* d_real, Tensor<S>* d_fake) {
    require(s_real.c == 1 && s_fake.c == 1, "lsgan: scores must be (B,1)");
    double acc = 0.0;
    for (int i = 0; i < s_real.rows(); ++i) {
        const double d = s_real.v[i] - 1.0;
        acc += d * d;
    }
    acc /= s_real.rows();
    for (int i = 0; i < s_fake.rows(); ++i) acc += double(s_fake.v[i]) * s_fake.v[i] / s_fake.rows();
    if (d_real) {
        *d_real = s_real;
        for (auto& v : d_real->v) v = S(2) * (v - S(1)) / S(s_real.rows());
    }
    if (d_fake) {
        *d_fake = s_fake;
        for (auto& v : d_fake->v) v = S(2) * v / S(s_fake.rows());
    }
    return acc;
}

// mean[(s_fake - 1)^2]; minimized by the generator.
template <typename S>
double lsgan_generator_value(const Tensor<S>& s_fake, Tensor<S>* d_fake) {
    require(s_fake.c == 1, "lsgan: scores must be (B,1)");
    double acc = 0.0;
    for (int i = 0; i < s_fake.rows(); ++i) {
        const double d = s_fake.v[i] - 1.0;
        acc += d * d;
    }
    acc /= s_fake.rows();
    if (d_fake) {
        *d_fake = s_fake;
        for (auto& v : d_fake->v) v = S(2) * (v - S(1)) / S(s_fake.rows());
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Model-level loss terms. Each runs its own forward pass; with backprop=true
// it accumulates weight-scaled gradients into the networks it is defined to
// train. The fused trainer step shares forwards instead but must agree with
// these on values (tested).
// ---------------------------------------------------------------------------

// Classification of generated target-like images: CE(C_t(G_st(x, z)), y).
template <typename S>
double loss_Ct(Generator<S>& g_st, Classifier<S>& c_t, const Tensor<S>& x_gen_in,
               const Tensor<S>& z, const LabelBatch& y, double weight = 1.0,
               bool backprop = false) {
    typename Generator<S>::Cache cg;
    typename Classifier<S>::Cache cc;
    Tensor<S> fake = g_st.forward(x_gen_in, z, backprop ? &cg : nullptr);
    Tensor<S> logits = c_t.forward(fake, backprop ? &cc : nullptr);
    Tensor<S> dlogits;
    const double loss = softmax_ce(logits, y, backprop ? &dlogits : nullptr);
    if (backprop) {
        for (auto& v : dlogits.v) v *= S(weight);
        Tensor<S> dfake = c_t.backward(dlogits, cc, true);
        g_st.backward(dfake, cg, true);
    }
    return loss;
}

// Classification of original source images: CE(C_s(x), y). No generator in
// the path, so no generator gradient can exist.
template <typename S>
double loss_Cs(Classifier<S>& c_s, const Tensor<S>& x_disc_in, const LabelBatch& y,
               double weight = 1.0, bool backprop = false) {
    typename Classifier<S>::Cache cc;
    Tensor<S> logits = c_s.forward(x_disc_in, backprop ? &cc : nullptr);
    Tensor<S> dlogits;
    const double loss = softmax_ce(logits, y, backprop ? &dlogits : nullptr);
    if (backprop) {
        for (auto& v : dlogits.v) v *= S(weight);
        c_s.backward(dlogits, cc, true);
    }
    return loss;
}

// Pseudo-labels: argmax of C_s(G_ts(x, z)), evaluated with frozen statistics
// and detached from any gradient. Ties break to the lowest class index.
template <typename S>
LabelBatch assign_pseudo_labels(Classifier<S>& c_s, Generator<S>& g_ts,
                                const Tensor<S>& x_gen_in, const Tensor<S>& z) {
    const Mode mg = g_ts.mode, mc = c_s.mode;
    g_ts.mode = Mode::eval;
    c_s.mode = Mode::eval;
    Tensor<S> fake = g_ts.forward(x_gen_in, z, nullptr);
    Tensor<S> logits = c_s.forward(fake, nullptr);
    g_ts.mode = mg;
    c_s.mode = mc;
    LabelBatch labels(logits.rows());
    auto m = as_mat(logits);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        int best = 0;
        for (int k = 1; k < logits.c; ++k)
            if (m(i, k) > m(i, best)) best = k;
        labels[i] = best;
    }
    return labels;
}

// Self-labeling loss: CE(C_s(G_ts(x_t, z_t)), y_self); trains C_s and G_ts.
template <typename S>
double loss_self(Generator<S>& g_ts, Classifier<S>& c_s, const Tensor<S>& x_gen_in,
                 const Tensor<S>& z, const LabelBatch& y_self, double weight = 1.0,
                 bool backprop = false) {
    return loss_Ct(g_ts, c_s, x_gen_in, z, y_self, weight, backprop);
}

// Class consistency: CE(C_s(G_ts(G_st(x_s, z_s), z_t)), y_s); trains both
// generators and C_s.
template <typename S>
double loss_consistency(Generator<S>& g_st, Generator<S>& g_ts, Classifier<S>& c_s,
                        const Tensor<S>& x_gen_in, const Tensor<S>& z_s,
                        const Tensor<S>& z_t, const LabelBatch& y, double weight = 1.0,
                        bool backprop = false) {
    typename Generator<S>::Cache cg_st, cg_ts;
    typename Classifier<S>::Cache cc;
    Tensor<S> x_st = g_st.forward(x_gen_in, z_s, backprop ? &cg_st : nullptr);
    Tensor<S> u = x_st;
    for (auto& v : u.v) v *= S(kDiscToGenScale);
    Tensor<S> x_cycle = g_ts.forward(u, z_t, backprop ? &cg_ts : nullptr);
    Tensor<S> logits = c_s.forward(x_cycle, backprop ? &cc : nullptr);
    Tensor<S> dlogits;
    const double loss = softmax_ce(logits, y, backprop ? &dlogits : nullptr);
    if (backprop) {
        for (auto& v : dlogits.v) v *= S(weight);
        Tensor<S> dcycle = c_s.backward(dlogits, cc, true);
        Tensor<S> du = g_ts.backward(dcycle, cg_ts, true);
        for (auto& v : du.v) v *= S(kDiscToGenScale);
        g_st.backward(du, cg_st, true);
    }
    return loss;
}

// Discriminator objective with the fake batch detached from the generator.
template <typename S>
double lsgan_discriminator_loss(Discriminator<S>& d, const Tensor<S>& real,
                                const Tensor<S>& fake, double weight = 1.0,
                                bool backprop = false) {
    require(real.same_shape(fake) || (real.h == fake.h && real.w == fake.w && real.c == fake.c),
            "lsgan_discriminator_loss: shape mismatch");
    typename Discriminator<S>::Cache cr, cf;
    Tensor<S> s_real = d.forward(real, backprop ? &cr : nullptr);
    Tensor<S> s_fake = d.forward(fake, backprop ? &cf : nullptr);
    Tensor<S> d_real, d_fake;
    const double loss = lsgan_discriminator_value(s_real, s_fake,
                                                  backprop ? &d_real : nullptr,
                                                  backprop ? &d_fake : nullptr);
    if (backprop) {
        for (auto& v : d_real.v) v *= S(weight);
        for (auto& v : d_fake.v) v *= S(weight);
        d.backward(d_real, cr, true);
        d.backward(d_fake, cf, true);
    }
    return loss;
}

// Generator adversarial surrogate: mean[(D(fake)-1)^2] with D frozen.
// Returns the gradient w.r.t. the fake images through *dfake so the caller
// can chain it into the generator that produced them.
template <typename S>
double lsgan_generator_loss(Discriminator<S>& d, const Tensor<S>& fake,
                            Tensor<S>* dfake = nullptr, double weight = 1.0) {
    typename Discriminator<S>::Cache cf;
    Tensor<S> s_fake = d.forward(fake, dfake ? &cf : nullptr);
    Tensor<S> ds;
    const double loss = lsgan_generator_value(s_fake, dfake ? &ds : nullptr);
    if (dfake) {
        for (auto& v : ds.v) v *= S(weight);
        *dfake = d.backward(ds, cf, false);  // D parameters stay frozen
    }
    return loss;
}

// Optional image-based cycle baseline: mean |x_s - G_ts(G_st(x_s))| in the
// discriminative pixel scale.
template <typename S>
double cycle_reconstruction_loss(Generator<S>& g_st, Generator<S>& g_ts,
                                 const Tensor<S>& x_gen_in, const Tensor<S>& z_s,
                                 const Tensor<S>& z_t, double weight = 1.0,
                                 bool backprop = false) {
    typename Generator<S>::Cache cg_st, cg_ts;
    Tensor<S> x_st = g_st.forward(x_gen_in, z_s, backprop ? &cg_st : nullptr);
    Tensor<S> u = x_st;
    for (auto& v : u.v) v *= S(kDiscToGenScale);
    Tensor<S> x_cycle = g_ts.forward(u, z_t, backprop ? &cg_ts : nullptr);
    require(x_cycle.same_shape(x_gen_in), "cycle_reconstruction_loss: shape mismatch");
    const double n = static_cast<double>(x_cycle.size());
    double acc = 0.0;
    Tensor<S> dcycle;
    if (backprop) dcycle = Tensor<S>(x_cycle.n, x_cycle.h, x_cycle.w, x_cycle.c);
    for (size_t i = 0; i < x_cycle.size(); ++i) {
        const double target = x_gen_in.v[i] * 255.0;  // same scale as the cycle output
        const double diff = x_cycle.v[i] - target;
        acc += std::abs(diff);
        if (backprop) dcycle.v[i] = S(weight) * S((diff > 0) - (diff < 0)) / S(n);
    }
    if (backprop) {
        Tensor<S> du = g_ts.backward(dcycle, cg_ts, true);
        for (auto& v : du.v) v *= S(kDiscToGenScale);
        g_st.backward(du, cg_st, true);
    }
    return acc / n;
}

}  // namespace bidda
