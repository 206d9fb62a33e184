#pragma once

#include <cmath>

#include "bidda/layers.hpp"

namespace bidda {

// One Adam instance per network; moment buffers mirror the parameter list.
template <typename S>
struct Adam {
    double lr = 1e-4, beta1 = 0.5, beta2 = 0.999, eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<S>> m, v;

    Adam() = default;
    Adam(const ParamList<S>& ps, double lr_, double b1, double b2, double eps_)
        : lr(lr_), beta1(b1), beta2(b2), eps(eps_) {
        for (auto& r : ps.refs) {
            m.emplace_back(r.value->size(), S(0));
            v.emplace_back(r.value->size(), S(0));
        }
    }

    void step(ParamList<S>& ps) {
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, step_count);
        const double bc2 = 1.0 - std::pow(beta2, step_count);
        for (size_t i = 0; i < ps.refs.size(); ++i) {
            auto& val = ps.refs[i].value->v;
            auto& grad = ps.refs[i].grad->v;
            for (size_t j = 0; j < val.size(); ++j) {
                const double g = grad[j];
                m[i][j] = S(beta1 * m[i][j] + (1.0 - beta1) * g);
                v[i][j] = S(beta2 * v[i][j] + (1.0 - beta2) * g * g);
                const double mhat = m[i][j] / bc1;
                const double vhat = v[i][j] / bc2;
                val[j] -= S(lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

}  // namespace bidda
