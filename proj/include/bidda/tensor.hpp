#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bidda {

// 64-byte aligned storage keeps Eigen's vectorized kernels on the same code
// path for every allocation, which makes repeated runs bit-identical.
template <typename T, size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    T* allocate(size_t n) {
        const size_t bytes = ((n * sizeof(T) + Align - 1) / Align) * Align;
        void* p = std::aligned_alloc(Align, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, size_t) { std::free(p); }
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

template <typename S>
using AlignedVec = std::vector<S, AlignedAllocator<S>>;

// Rank-4 tensor, NHWC layout. Rank-2 data (dense layers, noise, logits)
// uses n x c with h = w = 1.
template <typename S>
struct Tensor {
    int n = 0, h = 0, w = 0, c = 0;
    AlignedVec<S> v;

    Tensor() = default;
    Tensor(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_), v(static_cast<size_t>(n_) * h_ * w_ * c_, S(0)) {}

    static Tensor mat(int rows, int cols) { return Tensor(rows, 1, 1, cols); }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    int rows() const { return n * h * w; }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }

    S& at(int i, int y, int x, int ch) {
        return v[static_cast<size_t>(((i * h + y) * w + x)) * c + ch];
    }
    S at(int i, int y, int x, int ch) const {
        return v[static_cast<size_t>(((i * h + y) * w + x)) * c + ch];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && h == o.h && w == o.w && c == o.c;
    }
    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(h) + "," +
               std::to_string(w) + "," + std::to_string(c) + ")";
    }

    void fill(S value) { std::fill(v.begin(), v.end(), value); }
};

template <typename S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapM = Eigen::Map<MatR<S>>;
template <typename S>
using CMapM = Eigen::Map<const MatR<S>>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// View of tensor memory as a (n*h*w) x c matrix; for rank-2 tensors this is n x c.
template <typename S>
MapM<S> as_mat(Tensor<S>& t) {
    return MapM<S>(t.data(), t.rows(), t.c);
}
template <typename S>
CMapM<S> as_mat(const Tensor<S>& t) {
    return CMapM<S>(t.data(), t.rows(), t.c);
}

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

}  // namespace bidda
