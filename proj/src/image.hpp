#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace hmsr {

// H x W x 3 image, interleaved RGB, values in [0, 1].
struct Image {
    int h = 0, w = 0;
    std::vector<float> px;

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_ * 3, 0.f) {}

    float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    const float& at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    void clamp01() {
        for (auto& v : px) v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    }
};

// Decodes an 8-bit PNG or JPEG file (detected by magic bytes) to RGB in
// [0, 1]. Grayscale and alpha inputs are converted to plain RGB. Throws
// std::runtime_error on unreadable or non-image files.
Image load_image(const std::string& path);

// Writes an 8-bit RGB PNG; values are clamped to [0, 1] and rounded to the
// nearest of 256 levels.
void save_png(const std::string& path, const Image& img);

// Writes an 8-bit single-channel PNG (used for expert-id maps).
void save_png_gray(const std::string& path, const std::vector<uint8_t>& data, int h, int w);

bool looks_like_image_file(const std::string& path);

// Layout conversions at the model boundary.
Tensor<float> image_to_chw(const Image& img);
Image chw_to_image(const Tensor<float>& t);  // clamps to [0, 1]

}  // namespace hmsr
