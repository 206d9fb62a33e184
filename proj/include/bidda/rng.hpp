#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "bidda/tensor.hpp"

namespace bidda {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic RNG with hand-rolled distributions so that sequences are
// identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}
    Rng(uint64_t seed, uint64_t stream) : eng_(splitmix64(seed ^ splitmix64(stream))) {}

    uint64_t next_u64() { return eng_(); }

    double uniform() {  // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call, the pair partner is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Resamples draws with |v| > 2*stddev.
    double truncated_normal(double stddev) {
        double v = normal();
        while (std::abs(v) > 2.0) v = normal();
        return v * stddev;
    }

    uint32_t below(uint32_t bound) {  // uniform in [0, bound)
        uint64_t threshold = (~uint64_t(0) / bound) * bound;
        uint64_t r = eng_();
        while (r >= threshold) r = eng_();
        return static_cast<uint32_t>(r % bound);
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            size_t j = below(static_cast<uint32_t>(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    template <typename S>
    Tensor<S> normal_tensor(int rows, int cols) {
        Tensor<S> t = Tensor<S>::mat(rows, cols);
        for (auto& x : t.v) x = static_cast<S>(normal());
        return t;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bidda
