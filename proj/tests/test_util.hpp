// Shared test helpers and the independent oracles the suites check the
// implementation against. Everything here is written from the definitions,
// not by calling into the code paths under test.
#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "image.hpp"
#include "tensor.hpp"

namespace testutil {

using hmsr::Image;
using hmsr::Tensor;

// --- reference bilinear resampler (direct formula, clamped edges) ---------

inline float ref_bilinear_sample(const Image& src, double y, double x, int c) {
    const auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    const int ya = clampi(y0, 0, src.h - 1), yb = clampi(y0 + 1, 0, src.h - 1);
    const int xa = clampi(x0, 0, src.w - 1), xb = clampi(x0 + 1, 0, src.w - 1);
    return static_cast<float>((1 - fy) * ((1 - fx) * src.at(ya, xa, c) + fx * src.at(ya, xb, c)) +
                              fy * ((1 - fx) * src.at(yb, xa, c) + fx * src.at(yb, xb, c)));
}

inline Image ref_bilinear_downsample(const Image& src, int scale) {
    Image out(src.h / scale, src.w / scale);
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j)
            for (int c = 0; c < 3; ++c)
                out.at(i, j, c) =
                    ref_bilinear_sample(src, (i + 0.5) * scale - 0.5, (j + 0.5) * scale - 0.5, c);
    return out;
}

// --- naive direct convolution (stride 1, zero pad (k-1)/2) ----------------

template <typename T>
Tensor<T> ref_conv2d(const Tensor<T>& x, const Tensor<T>& w /* (oc, ic, k*k) */, const Tensor<T>* bias,
                     int k) {
    const int pad = (k - 1) / 2;
    Tensor<T> y(w.c, x.h, x.w);
    for (int o = 0; o < w.c; ++o)
        for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) {
                T acc = bias ? bias->v[o] : T(0);
                for (int ci = 0; ci < x.c; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int sy = yy + ky - pad, sx = xx + kx - pad;
                            if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                            acc += w.at(o, ci, ky * k + kx) * x.at(ci, sy, sx);
                        }
                y.at(o, yy, xx) = acc;
            }
    return y;
}

// --- metric oracles from the definitions -----------------------------------

inline double ref_psnr(const Image& a, const Image& b, int border) {
    double se = 0.0;
    long long n = 0;
    for (int y = border; y < a.h - border; ++y)
        for (int x = border; x < a.w - border; ++x)
            for (int c = 0; c < 3; ++c) {
                const double d = static_cast<double>(a.at(y, x, c)) - b.at(y, x, c);
                se += d * d;
                ++n;
            }
    const double mse = se / n;
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// Brute-force windowed SSIM: explicit weighted statistics per window
// position (no separable filtering), straight from the definition.
inline double ref_ssim(const Image& a, const Image& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    std::vector<double> g2(static_cast<size_t>(win) * win);
    double wsum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - 5.0, dx = j - 5.0;
            g2[static_cast<size_t>(i) * win + j] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
            wsum += g2[static_cast<size_t>(i) * win + j];
        }
    for (auto& v : g2) v /= wsum;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        double chan = 0.0;
        long long count = 0;
        for (int y = 0; y + win <= a.h; ++y)
            for (int x = 0; x + win <= a.w; ++x) {
                double m1 = 0, m2 = 0, e11 = 0, e22 = 0, e12 = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wgt = g2[static_cast<size_t>(i) * win + j];
                        const double va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
                        m1 += wgt * va;
                        m2 += wgt * vb;
                        e11 += wgt * va * va;
                        e22 += wgt * vb * vb;
                        e12 += wgt * va * vb;
                    }
                const double s1 = e11 - m1 * m1, s2 = e22 - m2 * m2, s12 = e12 - m1 * m2;
                chan += ((2 * m1 * m2 + c1) * (2 * s12 + c2)) /
                        ((m1 * m1 + m2 * m2 + c1) * (s1 + s2 + c2));
                ++count;
            }
        total += chan / count;
    }
    return total / 3.0;
}

// --- central finite differences --------------------------------------------

// Perturbs every element of `value` and compares the numeric derivative of
// loss() against `analytic`. Returns the worst relative error
// |fd - an| / max(|fd| + |an|, floor).
inline double fd_worst_rel_error(Tensor<double>& value, const Tensor<double>& analytic,
                                 const std::function<double()>& loss, double eps,
                                 double floor = 1e-8) {
    double worst = 0.0;
    for (size_t i = 0; i < value.v.size(); ++i) {
        const double orig = value.v[i];
        value.v[i] = orig + eps;
        const double up = loss();
        value.v[i] = orig - eps;
        const double down = loss();
        value.v[i] = orig;
        const double fd = (up - down) / (2.0 * eps);
        const double an = analytic.v[i];
        const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), floor);
        worst = std::max(worst, rel);
    }
    return worst;
}

// --- misc -------------------------------------------------------------------

inline Image random_image(uint64_t seed, int h, int w) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> dist(0.f, 1.f);
    Image img(h, w);
    for (auto& v : img.px) v = dist(gen);
    return img;
}

template <typename T>
Tensor<T> random_tensor(uint64_t seed, int c, int h, int w, double scale = 1.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, scale);
    Tensor<T> t(c, h, w);
    for (auto& v : t.v) v = static_cast<T>(dist(gen));
    return t;
}

inline std::string temp_dir(const std::string& tag) {
    auto path = std::filesystem::temp_directory_path() / ("hmsr_test_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path.string();
}

inline uint64_t hash_lines(const std::vector<std::string>& lines) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& l : lines) {
        for (unsigned char c : l) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= '\n';
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace testutil
