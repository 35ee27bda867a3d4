#include "resample.hpp"

#include <cmath>
#include <stdexcept>

#include "errors.hpp"

namespace hmsr {

namespace {
int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

int reflect_index(int i, int n) {
    // symmetric reflection: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}
}  // namespace

Image bilinear_resize(const Image& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: bad output size");
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int i = 0; i < out_h; ++i) {
        const double fy = (i + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = clampi(y0, 0, src.h - 1);
        const int yb = clampi(y0 + 1, 0, src.h - 1);
        for (int j = 0; j < out_w; ++j) {
            const double fx = (j + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = clampi(x0, 0, src.w - 1);
            const int xb = clampi(x0 + 1, 0, src.w - 1);
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * src.at(ya, xa, c) + wx * src.at(ya, xb, c);
                const double bot = (1.0 - wx) * src.at(yb, xa, c) + wx * src.at(yb, xb, c);
                dst.at(i, j, c) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return dst;
}

Image degrade(const Image& hr, int scale) {
    if (scale != 2 && scale != 4) throw ConfigError("degrade: scale must be 2 or 4");
    if (hr.h % scale != 0 || hr.w % scale != 0)
        throw std::invalid_argument("degrade: dimensions not divisible by scale");
    Image lr = bilinear_resize(hr, hr.h / scale, hr.w / scale);
    lr.clamp01();
    return lr;
}

Image crop_to_multiple(const Image& img, int m) {
    const int h = (img.h / m) * m;
    const int w = (img.w / m) * m;
    if (h < m || w < m) throw std::invalid_argument("crop_to_multiple: image smaller than multiple");
    return crop(img, 0, 0, h, w);
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > img.h || x0 + w > img.w)
        throw std::invalid_argument("crop: region out of bounds");
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
    return out;
}

Image flip_vertical(const Image& img) {
    Image out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.h - 1 - y, x, c);
    return out;
}

Image rotate90(const Image& img) {
    Image out(img.w, img.h);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, img.h - 1 - y, c) = img.at(y, x, c);
    return out;
}

Image reflect_pad(const Image& img, int top, int bottom, int left, int right) {
    Image out(img.h + top + bottom, img.w + left + right);
    for (int y = 0; y < out.h; ++y) {
        const int sy = reflect_index(y - top, img.h);
        for (int x = 0; x < out.w; ++x) {
            const int sx = reflect_index(x - left, img.w);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

}  // namespace hmsr
