#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace hmsr {

// Dense C x H x W array, the working currency of the model. Scalar type is
// a template parameter: float for training/inference, double for the
// finite-difference verification models.
template <typename T>
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, T(0)) {}

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    T& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
    const T& at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    void add(const Tensor& o) {
        assert(same_shape(o));
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> r(c, h, w);
        for (size_t i = 0; i < v.size(); ++i) r.v[i] = static_cast<U>(v[i]);
        return r;
    }
};

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double stddev, double mean = 0.0) {
    for (auto& x : t.v) x = static_cast<T>(mean + stddev * rng.normal());
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
    for (auto& x : t.v) x = static_cast<T>(lo + (hi - lo) * rng.uniform());
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i])));
    return m;
}

// A learnable tensor together with its gradient accumulator and a stable
// name used by the checkpoint format and the optimizer state.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, int c, int h, int w) : name(std::move(n)), value(c, h, w), grad(c, h, w) {}

    void zero_grad() { grad.zero(); }
};

}  // namespace hmsr
