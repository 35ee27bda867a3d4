#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace hmsr {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// ---------------------------------------------------------------------------
// im2col / col2im for stride-1, zero-padded "same" convolutions.

template <typename T>
void im2col(const Tensor<T>& x, int k, std::vector<T>& cols) {
    const int pad = (k - 1) / 2;
    const int hw = x.h * x.w;
    cols.assign(static_cast<size_t>(x.c) * k * k * hw, T(0));
    for (int ci = 0; ci < x.c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = cols.data() + (static_cast<size_t>(ci) * k * k + ky * k + kx) * hw;
                for (int y = 0; y < x.h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= x.h) continue;
                    const T* src = &x.at(ci, sy, 0);
                    for (int xx = 0; xx < x.w; ++xx) {
                        const int sx = xx + kx - pad;
                        if (sx < 0 || sx >= x.w) continue;
                        dst[y * x.w + xx] = src[sx];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_accum(const std::vector<T>& cols, int k, Tensor<T>& dx) {
    const int pad = (k - 1) / 2;
    const int hw = dx.h * dx.w;
    for (int ci = 0; ci < dx.c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = cols.data() + (static_cast<size_t>(ci) * k * k + ky * k + kx) * hw;
                for (int y = 0; y < dx.h; ++y) {
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= dx.h) continue;
                    T* dst = &dx.at(ci, sy, 0);
                    for (int xx = 0; xx < dx.w; ++xx) {
                        const int sx = xx + kx - pad;
                        if (sx < 0 || sx >= dx.w) continue;
                        dst[sx] += src[y * dx.w + xx];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Conv2d: stride 1, padding (k-1)/2, optional bias. Weight layout is
// (out_c, in_c, k*k), which maps directly onto the (out_c) x (in_c*k*k)
// GEMM operand. The caller keeps the forward input around and hands it back
// to backward(); with many convolutions sharing one input (the experts) this
// avoids caching the same tensor repeatedly.

template <typename T>
struct Conv2d {
    Param<T> w;
    Param<T> b;
    int in_c = 0, out_c = 0, k = 1;
    bool has_bias = true;

    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, bool bias = true)
        : w(name + ".weight", out_channels, in_channels, kernel * kernel),
          b(name + ".bias", bias ? out_channels : 0, bias ? 1 : 0, bias ? 1 : 0),
          in_c(in_channels),
          out_c(out_channels),
          k(kernel),
          has_bias(bias) {
        if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("Conv2d: kernel must be odd");
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.c != in_c) throw std::invalid_argument("Conv2d: channel mismatch");
        Tensor<T> y(out_c, x.h, x.w);
        const int hw = x.h * x.w;
        if (k == 1) {
            ConstMatMap<T> wm(w.value.data(), out_c, in_c);
            ConstMatMap<T> xm(x.data(), in_c, hw);
            MatMap<T> ym(y.data(), out_c, hw);
            ym.noalias() = wm * xm;
        } else {
            std::vector<T> cols;
            im2col(x, k, cols);
            ConstMatMap<T> wm(w.value.data(), out_c, in_c * k * k);
            ConstMatMap<T> cm(cols.data(), in_c * k * k, hw);
            MatMap<T> ym(y.data(), out_c, hw);
            ym.noalias() = wm * cm;
        }
        if (has_bias) {
            for (int o = 0; o < out_c; ++o) {
                const T bo = b.value.v[o];
                T* row = y.data() + static_cast<size_t>(o) * hw;
                for (int i = 0; i < hw; ++i) row[i] += bo;
            }
        }
        return y;
    }

    // Accumulates into w.grad / b.grad; returns the gradient w.r.t. x.
    Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x) {
        const int hw = x.h * x.w;
        Tensor<T> dx(in_c, x.h, x.w);
        ConstMatMap<T> dym(dy.data(), out_c, hw);
        if (k == 1) {
            ConstMatMap<T> xm(x.data(), in_c, hw);
            MatMap<T> dwm(w.grad.data(), out_c, in_c);
            dwm.noalias() += dym * xm.transpose();
            ConstMatMap<T> wm(w.value.data(), out_c, in_c);
            MatMap<T> dxm(dx.data(), in_c, hw);
            dxm.noalias() = wm.transpose() * dym;
        } else {
            std::vector<T> cols;
            im2col(x, k, cols);
            ConstMatMap<T> cm(cols.data(), in_c * k * k, hw);
            MatMap<T> dwm(w.grad.data(), out_c, in_c * k * k);
            dwm.noalias() += dym * cm.transpose();
            std::vector<T> dcols(cols.size());
            MatMap<T> dcm(dcols.data(), in_c * k * k, hw);
            ConstMatMap<T> wm(w.value.data(), out_c, in_c * k * k);
            dcm.noalias() = wm.transpose() * dym;
            col2im_accum(dcols, k, dx);
        }
        if (has_bias) {
            for (int o = 0; o < out_c; ++o) {
                T s = 0;
                const T* row = dy.data() + static_cast<size_t>(o) * hw;
                for (int i = 0; i < hw; ++i) s += row[i];
                b.grad.v[o] += s;
            }
        }
        return dx;
    }

    // Convolution response at a single spatial position (the sparse dispatch
    // path evaluates selected experts pixel-by-pixel with this).
    void forward_at(const Tensor<T>& x, int y, int xx, T* out /* out_c values */) const {
        const int pad = (k - 1) / 2;
        for (int o = 0; o < out_c; ++o) out[o] = has_bias ? b.value.v[o] : T(0);
        for (int ci = 0; ci < in_c; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
                const int sy = y + ky - pad;
                if (sy < 0 || sy >= x.h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int sx = xx + kx - pad;
                    if (sx < 0 || sx >= x.w) continue;
                    const T xv = x.at(ci, sy, sx);
                    const size_t wbase = (static_cast<size_t>(ci)) * k * k + ky * k + kx;
                    for (int o = 0; o < out_c; ++o)
                        out[o] += w.value.v[(static_cast<size_t>(o) * in_c) * k * k + wbase] * xv;
                }
            }
        }
    }

    void collect_params(std::vector<Param<T>*>& out) {
        out.push_back(&w);
        if (has_bias) out.push_back(&b);
    }
};

// ---------------------------------------------------------------------------
// LeakyReLU. backward() takes the forward input.

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    Tensor<T> y(x.c, x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] >= T(0) ? x.v[i] : slope * x.v[i];
    return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& dy, const Tensor<T>& x, T slope) {
    Tensor<T> dx(dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.v.size(); ++i) dx.v[i] = x.v[i] >= T(0) ? dy.v[i] : slope * dy.v[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Layer normalization over the channel dimension, independently per spatial
// location. Learned per-channel scale (gamma) and shift (beta).

template <typename T>
struct LayerNormCache {
    Tensor<T> xhat;
    std::vector<T> inv_std;  // one per pixel
};

template <typename T>
struct LayerNorm {
    Param<T> gamma;
    Param<T> beta;
    int channels = 0;
    T eps = T(1e-5);

    LayerNorm() = default;
    LayerNorm(const std::string& name, int c)
        : gamma(name + ".gamma", c, 1, 1), beta(name + ".beta", c, 1, 1), channels(c) {
        std::fill(gamma.value.v.begin(), gamma.value.v.end(), T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, LayerNormCache<T>* cache) const {
        if (x.c != channels) throw std::invalid_argument("LayerNorm: channel mismatch");
        Tensor<T> y(x.c, x.h, x.w);
        Tensor<T> xhat(x.c, x.h, x.w);
        const int hw = x.h * x.w;
        std::vector<T> inv_std(hw);
        for (int p = 0; p < hw; ++p) {
            T mean = 0;
            for (int ci = 0; ci < x.c; ++ci) mean += x.v[static_cast<size_t>(ci) * hw + p];
            mean /= static_cast<T>(x.c);
            T var = 0;
            for (int ci = 0; ci < x.c; ++ci) {
                const T d = x.v[static_cast<size_t>(ci) * hw + p] - mean;
                var += d * d;
            }
            var /= static_cast<T>(x.c);
            const T is = T(1) / std::sqrt(var + eps);
            inv_std[p] = is;
            for (int ci = 0; ci < x.c; ++ci) {
                const size_t idx = static_cast<size_t>(ci) * hw + p;
                const T xh = (x.v[idx] - mean) * is;
                xhat.v[idx] = xh;
                y.v[idx] = gamma.value.v[ci] * xh + beta.value.v[ci];
            }
        }
        if (cache) {
            cache->xhat = std::move(xhat);
            cache->inv_std = std::move(inv_std);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const LayerNormCache<T>& cache) {
        const int hw = dy.h * dy.w;
        Tensor<T> dx(dy.c, dy.h, dy.w);
        for (int ci = 0; ci < dy.c; ++ci) {
            T dg = 0, db = 0;
            for (int p = 0; p < hw; ++p) {
                const size_t idx = static_cast<size_t>(ci) * hw + p;
                dg += dy.v[idx] * cache.xhat.v[idx];
                db += dy.v[idx];
            }
            gamma.grad.v[ci] += dg;
            beta.grad.v[ci] += db;
        }
        const T invc = T(1) / static_cast<T>(dy.c);
        for (int p = 0; p < hw; ++p) {
            T mean_g = 0, mean_gx = 0;
            for (int ci = 0; ci < dy.c; ++ci) {
                const size_t idx = static_cast<size_t>(ci) * hw + p;
                const T g = dy.v[idx] * gamma.value.v[ci];
                mean_g += g;
                mean_gx += g * cache.xhat.v[idx];
            }
            mean_g *= invc;
            mean_gx *= invc;
            const T is = cache.inv_std[p];
            for (int ci = 0; ci < dy.c; ++ci) {
                const size_t idx = static_cast<size_t>(ci) * hw + p;
                const T g = dy.v[idx] * gamma.value.v[ci];
                dx.v[idx] = (g - mean_g - cache.xhat.v[idx] * mean_gx) * is;
            }
        }
        return dx;
    }

    void collect_params(std::vector<Param<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// ---------------------------------------------------------------------------
// Per-pixel softmax over the channel dimension.

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
    Tensor<T> p(logits.c, logits.h, logits.w);
    const int hw = logits.h * logits.w;
    for (int px = 0; px < hw; ++px) {
        T mx = logits.v[px];
        for (int ci = 1; ci < logits.c; ++ci)
            mx = std::max(mx, logits.v[static_cast<size_t>(ci) * hw + px]);
        if (!std::isfinite(static_cast<double>(mx)))
            throw std::runtime_error("softmax_channels: non-finite logits");
        T sum = 0;
        for (int ci = 0; ci < logits.c; ++ci) {
            const size_t idx = static_cast<size_t>(ci) * hw + px;
            const T e = std::exp(logits.v[idx] - mx);
            p.v[idx] = e;
            sum += e;
        }
        for (int ci = 0; ci < logits.c; ++ci) p.v[static_cast<size_t>(ci) * hw + px] /= sum;
    }
    return p;
}

// dz = p .* (dp - sum_c(p .* dp)), per pixel
template <typename T>
Tensor<T> softmax_channels_backward(const Tensor<T>& dp, const Tensor<T>& p) {
    Tensor<T> dz(p.c, p.h, p.w);
    const int hw = p.h * p.w;
    for (int px = 0; px < hw; ++px) {
        T dot = 0;
        for (int ci = 0; ci < p.c; ++ci) {
            const size_t idx = static_cast<size_t>(ci) * hw + px;
            dot += p.v[idx] * dp.v[idx];
        }
        for (int ci = 0; ci < p.c; ++ci) {
            const size_t idx = static_cast<size_t>(ci) * hw + px;
            dz.v[idx] = p.v[idx] * (dp.v[idx] - dot);
        }
    }
    return dz;
}

// Per-pixel argmax over channels, lowest index wins ties.
template <typename T>
std::vector<int> argmax_channels(const Tensor<T>& p) {
    const int hw = p.h * p.w;
    std::vector<int> idx(hw, 0);
    for (int px = 0; px < hw; ++px) {
        T best = p.v[px];
        int bi = 0;
        for (int ci = 1; ci < p.c; ++ci) {
            const T val = p.v[static_cast<size_t>(ci) * hw + px];
            if (val > best) {
                best = val;
                bi = ci;
            }
        }
        idx[px] = bi;
    }
    return idx;
}

// ---------------------------------------------------------------------------
// Pixel shuffle: (C*s^2, H, W) -> (C, s*H, s*W).
// Input channel c*s^2 + r*s + t lands on output offset (r, t) inside each
// s x s block, so LR pixel (y, x) owns the HR block [s*y, s*y+s) x [s*x, s*x+s).

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int s) {
    if (x.c % (s * s) != 0) throw std::invalid_argument("pixel_shuffle: channels not divisible by s^2");
    const int oc = x.c / (s * s);
    Tensor<T> y(oc, x.h * s, x.w * s);
    for (int c = 0; c < oc; ++c)
        for (int r = 0; r < s; ++r)
            for (int t = 0; t < s; ++t) {
                const int ic = (c * s + r) * s + t;
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) y.at(c, yy * s + r, xx * s + t) = x.at(ic, yy, xx);
            }
    return y;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& y, int s) {
    if (y.h % s != 0 || y.w % s != 0)
        throw std::invalid_argument("pixel_unshuffle: spatial dims not divisible by s");
    Tensor<T> x(y.c * s * s, y.h / s, y.w / s);
    for (int c = 0; c < y.c; ++c)
        for (int r = 0; r < s; ++r)
            for (int t = 0; t < s; ++t) {
                const int ic = (c * s + r) * s + t;
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) x.at(ic, yy, xx) = y.at(c, yy * s + r, xx * s + t);
            }
    return x;
}

}  // namespace hmsr
