#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "bidda/rng.hpp"
#include "bidda/tensor.hpp"

namespace bidda {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Parameter bookkeeping. Every parameterized layer keeps a gradient buffer of
// the same shape next to each parameter; optimizers walk the ParamRef list.
// ---------------------------------------------------------------------------
template <typename S>
struct ParamRef {
    std::string name;
    Tensor<S>* value;
    Tensor<S>* grad;
};

template <typename S>
struct ParamList {
    std::vector<ParamRef<S>> refs;
    void add(const std::string& name, Tensor<S>& value, Tensor<S>& grad) {
        refs.push_back({name, &value, &grad});
    }
    void zero_grads() {
        for (auto& r : refs) r.grad->fill(S(0));
    }
    size_t count() const {
        size_t c = 0;
        for (auto& r : refs) c += r.value->size();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Dense: y = x W + b with x of shape (B, in).
// ---------------------------------------------------------------------------
template <typename S>
struct Dense {
    int in = 0, out = 0;
    Tensor<S> W, b, gW, gb;

    struct Cache {
        Tensor<S> x;
    };

    Dense() = default;
    Dense(int in_, int out_, Rng& rng, double init_std) : in(in_), out(out_) {
        W = Tensor<S>::mat(in, out);
        b = Tensor<S>::mat(1, out);
        gW = Tensor<S>::mat(in, out);
        gb = Tensor<S>::mat(1, out);
        for (auto& x : W.v) x = static_cast<S>(rng.truncated_normal(init_std));
    }

    Tensor<S> forward(const Tensor<S>& x, Cache* cc) const {
        require(x.c == in, "dense: input width " + std::to_string(x.c) +
                               " != " + std::to_string(in));
        Tensor<S> y = Tensor<S>::mat(x.rows(), out);
        as_mat(y).noalias() = as_mat(x) * as_mat(const_cast<Tensor<S>&>(W));
        as_mat(y).rowwise() += CMapM<S>(b.data(), 1, out).row(0);
        if (cc) cc->x = x;
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy, const Cache& cc, bool acc_grads) {
        if (acc_grads) {
            as_mat(gW).noalias() += as_mat(cc.x).transpose() * as_mat(dy);
            MapM<S>(gb.data(), 1, out) += as_mat(dy).colwise().sum();
        }
        Tensor<S> dx = Tensor<S>::mat(cc.x.rows(), in);
        as_mat(dx).noalias() = as_mat(dy) * as_mat(W).transpose();
        return dx;
    }

    void collect(ParamList<S>& ps, const std::string& prefix) {
        ps.add(prefix + ".W", W, gW);
        ps.add(prefix + ".b", b, gb);
    }
};

// ---------------------------------------------------------------------------
// Conv2d, NHWC, symmetric zero padding, via whole-batch im2col + GEMM.
// Weights are stored as (kh*kw*cin, cout); the patch column order is
// (ky, kx, ci) to match contiguous input rows.
// ---------------------------------------------------------------------------
template <typename S>
struct Conv2d {
    int cin = 0, cout = 0, k = 0, stride = 1, pad = 0;
    Tensor<S> W, b, gW, gb;

    struct Cache {
        Tensor<S> x;  // pre-pad input; im2col is rebuilt in backward
    };

    Conv2d() = default;
    Conv2d(int cin_, int cout_, int k_, int stride_, int pad_, Rng& rng, double init_std)
        : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_) {
        W = Tensor<S>::mat(k * k * cin, cout);
        b = Tensor<S>::mat(1, cout);
        gW = Tensor<S>::mat(k * k * cin, cout);
        gb = Tensor<S>::mat(1, cout);
        for (auto& x : W.v) x = static_cast<S>(rng.truncated_normal(init_std));
    }

    int out_dim(int d) const { return (d + 2 * pad - k) / stride + 1; }

    void im2col(const Tensor<S>& x, MatR<S>& col) const {
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        const int K = k * k * cin;
        col.setZero(static_cast<Eigen::Index>(x.n) * oh * ow, K);
        for (int b2 = 0; b2 < x.n; ++b2) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    S* row = col.data() +
                             (static_cast<size_t>((b2 * oh + oy) * ow + ox)) * K;
                    const int iy0 = oy * stride - pad, ix0 = ox * stride - pad;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        int kx_lo = std::max(0, -ix0), kx_hi = std::min(k, x.w - ix0);
                        if (kx_lo >= kx_hi) continue;
                        const S* src = x.data() +
                                       (static_cast<size_t>((b2 * x.h + iy) * x.w + ix0 + kx_lo)) * cin;
                        std::memcpy(row + (ky * k + kx_lo) * cin, src,
                                    sizeof(S) * static_cast<size_t>(kx_hi - kx_lo) * cin);
                    }
                }
            }
        }
    }

    void col2im_add(const MatR<S>& col, Tensor<S>& dx) const {
        const int oh = out_dim(dx.h), ow = out_dim(dx.w);
        const int K = k * k * cin;
        for (int b2 = 0; b2 < dx.n; ++b2) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const S* row = col.data() +
                                   (static_cast<size_t>((b2 * oh + oy) * ow + ox)) * K;
                    const int iy0 = oy * stride - pad, ix0 = ox * stride - pad;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= dx.h) continue;
                        int kx_lo = std::max(0, -ix0), kx_hi = std::min(k, dx.w - ix0);
                        for (int kx = kx_lo; kx < kx_hi; ++kx) {
                            S* dst = dx.data() +
                                     (static_cast<size_t>((b2 * dx.h + iy) * dx.w + ix0 + kx)) * cin;
                            const S* src = row + (ky * k + kx) * cin;
                            for (int ci = 0; ci < cin; ++ci) dst[ci] += src[ci];
                        }
                    }
                }
            }
        }
    }

    Tensor<S> forward(const Tensor<S>& x, Cache* cc) const {
        require(x.c == cin, "conv: input channels " + std::to_string(x.c) +
                                " != " + std::to_string(cin));
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        require(oh >= 1 && ow >= 1, "conv: input " + x.shape_str() + " too small for k=" +
                                        std::to_string(k));
        MatR<S> col;
        im2col(x, col);
        Tensor<S> y(x.n, oh, ow, cout);
        as_mat(y).noalias() = col * as_mat(const_cast<Tensor<S>&>(W));
        as_mat(y).rowwise() += CMapM<S>(b.data(), 1, cout).row(0);
        if (cc) cc->x = x;
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy, const Cache& cc, bool acc_grads) {
        if (acc_grads) {
            MatR<S> col;
            im2col(cc.x, col);
            as_mat(gW).noalias() += col.transpose() * as_mat(dy);
            MapM<S>(gb.data(), 1, cout) += as_mat(dy).colwise().sum();
        }
        MatR<S> dcol(dy.rows(), k * k * cin);
        dcol.noalias() = as_mat(dy) * as_mat(W).transpose();
        Tensor<S> dx(cc.x.n, cc.x.h, cc.x.w, cin);
        col2im_add(dcol, dx);
        return dx;
    }

    void collect(ParamList<S>& ps, const std::string& prefix) {
        ps.add(prefix + ".W", W, gW);
        ps.add(prefix + ".b", b, gb);
    }
};

// ---------------------------------------------------------------------------
// Batch normalization over (n, h, w) per channel. Batch statistics use the
// population variance; running statistics follow r = m*r + (1-m)*batch.
// ---------------------------------------------------------------------------
template <typename S>
struct BatchNorm {
    int c = 0;
    double momentum = 0.99, eps = 1e-5;
    Tensor<S> gamma, beta, ggamma, gbeta;
    Tensor<S> run_mean, run_var;  // buffers, not trained

    struct Cache {
        Tensor<S> xhat;
        VecX<S> invstd;
        Mode mode = Mode::train;
    };

    BatchNorm() = default;
    BatchNorm(int c_, double momentum_) : c(c_), momentum(momentum_) {
        gamma = Tensor<S>::mat(1, c);
        beta = Tensor<S>::mat(1, c);
        ggamma = Tensor<S>::mat(1, c);
        gbeta = Tensor<S>::mat(1, c);
        run_mean = Tensor<S>::mat(1, c);
        run_var = Tensor<S>::mat(1, c);
        gamma.fill(S(1));
        run_var.fill(S(1));
    }

    Tensor<S> forward(const Tensor<S>& x, Cache* cc, Mode mode) {
        require(x.c == c, "batchnorm: channels mismatch");
        const Eigen::Index R = x.rows();
        auto xm = as_mat(x);
        VecX<S> mean(c), var(c);
        if (mode == Mode::train) {
            mean = xm.colwise().mean().transpose();
            for (int j = 0; j < c; ++j) {
                var(j) = (xm.col(j).array() - mean(j)).square().sum() / S(R);
            }
            for (int j = 0; j < c; ++j) {
                run_mean.v[j] = S(momentum) * run_mean.v[j] + S(1.0 - momentum) * mean(j);
                run_var.v[j] = S(momentum) * run_var.v[j] + S(1.0 - momentum) * var(j);
            }
        } else {
            for (int j = 0; j < c; ++j) {
                mean(j) = run_mean.v[j];
                var(j) = run_var.v[j];
            }
        }
        VecX<S> invstd(c);
        for (int j = 0; j < c; ++j) invstd(j) = S(1) / std::sqrt(var(j) + S(eps));

        Tensor<S> y(x.n, x.h, x.w, x.c);
        auto ym = as_mat(y);
        for (int j = 0; j < c; ++j) {
            ym.col(j) = (xm.col(j).array() - mean(j)) * invstd(j);
        }
        if (cc) {
            cc->xhat = y;
            cc->invstd = invstd;
            cc->mode = mode;
        }
        for (int j = 0; j < c; ++j) {
            ym.col(j) = ym.col(j).array() * gamma.v[j] + beta.v[j];
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy, const Cache& cc, bool acc_grads) {
        const Eigen::Index R = dy.rows();
        auto dym = as_mat(dy);
        auto xh = as_mat(cc.xhat);
        Tensor<S> dx(dy.n, dy.h, dy.w, dy.c);
        auto dxm = as_mat(dx);
        for (int j = 0; j < c; ++j) {
            const S sum_dy = dym.col(j).sum();
            const S sum_dy_xhat = dym.col(j).dot(xh.col(j));
            if (acc_grads) {
                ggamma.v[j] += sum_dy_xhat;
                gbeta.v[j] += sum_dy;
            }
            const S g = gamma.v[j] * cc.invstd(j);
            if (cc.mode == Mode::train) {
                dxm.col(j) = g * (dym.col(j).array() - sum_dy / S(R) -
                                  xh.col(j).array() * (sum_dy_xhat / S(R)));
            } else {
                dxm.col(j) = g * dym.col(j).array();
            }
        }
        return dx;
    }

    void collect(ParamList<S>& ps, const std::string& prefix) {
        ps.add(prefix + ".gamma", gamma, ggamma);
        ps.add(prefix + ".beta", beta, gbeta);
    }
};

// ---------------------------------------------------------------------------
// Activations and pooling.
// ---------------------------------------------------------------------------
template <typename S>
struct Relu {
    struct Cache {
        Tensor<S> x;
    };
    static Tensor<S> forward(const Tensor<S>& x, Cache* cc) {
        Tensor<S> y = x;
        for (auto& v : y.v)
            if (v < S(0)) v = S(0);
        if (cc) cc->x = x;
        return y;
    }
    static Tensor<S> backward(const Tensor<S>& dy, const Cache& cc) {
        Tensor<S> dx = dy;
        for (size_t i = 0; i < dx.size(); ++i)
            if (cc.x.v[i] <= S(0)) dx.v[i] = S(0);
        return dx;
    }
};

template <typename S>
struct LeakyRelu {
    double slope = 0.2;
    struct Cache {
        Tensor<S> x;
    };
    Tensor<S> forward(const Tensor<S>& x, Cache* cc) const {
        Tensor<S> y = x;
        for (auto& v : y.v)
            if (v < S(0)) v *= S(slope);
        if (cc) cc->x = x;
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy, const Cache& cc) const {
        Tensor<S> dx = dy;
        for (size_t i = 0; i < dx.size(); ++i)
            if (cc.x.v[i] <= S(0)) dx.v[i] *= S(slope);
        return dx;
    }
};

// y = scale * tanh(x); bounds generator outputs to [-scale, scale].
template <typename S>
struct ScaledTanh {
    double scale = 1.0;
    struct Cache {
        Tensor<S> t;  // tanh(x)
    };
    Tensor<S> forward(const Tensor<S>& x, Cache* cc) const {
        Tensor<S> y = x;
        for (auto& v : y.v) v = std::tanh(v);
        if (cc) cc->t = y;
        for (auto& v : y.v) v *= S(scale);
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy, const Cache& cc) const {
        Tensor<S> dx = dy;
        for (size_t i = 0; i < dx.size(); ++i)
            dx.v[i] *= S(scale) * (S(1) - cc.t.v[i] * cc.t.v[i]);
        return dx;
    }
};

template <typename S>
struct MaxPool2 {
    struct Cache {
        std::vector<int> argmax;  // flat input index per output element
        int in_n = 0, in_h = 0, in_w = 0, in_c = 0;
    };
    static Tensor<S> forward(const Tensor<S>& x, Cache* cc) {
        const int oh = x.h / 2, ow = x.w / 2;
        Tensor<S> y(x.n, oh, ow, x.c);
        std::vector<int> arg(y.size());
        for (int b = 0; b < x.n; ++b)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int ch = 0; ch < x.c; ++ch) {
                        S best = x.at(b, oy * 2, ox * 2, ch);
                        int besti = ((b * x.h + oy * 2) * x.w + ox * 2) * x.c + ch;
                        for (int dy2 = 0; dy2 < 2; ++dy2)
                            for (int dx2 = 0; dx2 < 2; ++dx2) {
                                S v = x.at(b, oy * 2 + dy2, ox * 2 + dx2, ch);
                                if (v > best) {
                                    best = v;
                                    besti = ((b * x.h + oy * 2 + dy2) * x.w + ox * 2 + dx2) * x.c + ch;
                                }
                            }
                        y.at(b, oy, ox, ch) = best;
                        arg[((static_cast<size_t>(b) * oh + oy) * ow + ox) * x.c + ch] = besti;
                    }
        if (cc) {
            cc->argmax = std::move(arg);
            cc->in_n = x.n;
            cc->in_h = x.h;
            cc->in_w = x.w;
            cc->in_c = x.c;
        }
        return y;
    }
    static Tensor<S> backward(const Tensor<S>& dy, const Cache& cc) {
        Tensor<S> dx(cc.in_n, cc.in_h, cc.in_w, cc.in_c);
        for (size_t i = 0; i < dy.size(); ++i) dx.v[cc.argmax[i]] += dy.v[i];
        return dx;
    }
};

template <typename S>
struct AvgPool2 {
    struct Cache {
        int in_n = 0, in_h = 0, in_w = 0, in_c = 0;
    };
    static Tensor<S> forward(const Tensor<S>& x, Cache* cc) {
        const int oh = x.h / 2, ow = x.w / 2;
        Tensor<S> y(x.n, oh, ow, x.c);
        for (int b = 0; b < x.n; ++b)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int ch = 0; ch < x.c; ++ch)
                        y.at(b, oy, ox, ch) =
                            (x.at(b, oy * 2, ox * 2, ch) + x.at(b, oy * 2, ox * 2 + 1, ch) +
                             x.at(b, oy * 2 + 1, ox * 2, ch) + x.at(b, oy * 2 + 1, ox * 2 + 1, ch)) /
                            S(4);
        if (cc) {
            cc->in_n = x.n;
            cc->in_h = x.h;
            cc->in_w = x.w;
            cc->in_c = x.c;
        }
        return y;
    }
    static Tensor<S> backward(const Tensor<S>& dy, const Cache& cc) {
        Tensor<S> dx(cc.in_n, cc.in_h, cc.in_w, cc.in_c);
        const int oh = cc.in_h / 2, ow = cc.in_w / 2;
        for (int b = 0; b < cc.in_n; ++b)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int ch = 0; ch < cc.in_c; ++ch) {
                        const S g = dy.at(b, oy, ox, ch) / S(4);
                        dx.at(b, oy * 2, ox * 2, ch) += g;
                        dx.at(b, oy * 2, ox * 2 + 1, ch) += g;
                        dx.at(b, oy * 2 + 1, ox * 2, ch) += g;
                        dx.at(b, oy * 2 + 1, ox * 2 + 1, ch) += g;
                    }
        return dx;
    }
};

// Softmax over the channel axis of a (B, K) tensor.
template <typename S>
Tensor<S> softmax(const Tensor<S>& logits) {
    Tensor<S> p = logits;
    auto m = as_mat(p);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const S mx = m.row(i).maxCoeff();
        m.row(i) = (m.row(i).array() - mx).exp();
        m.row(i) /= m.row(i).sum();
    }
    return p;
}

}  // namespace bidda
