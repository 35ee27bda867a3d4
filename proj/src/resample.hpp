#pragma once

#include "image.hpp"

namespace hmsr {

// Bilinear resize with half-pixel-centered sampling (align-corners off) and
// no antialiasing. Output pixel (i, j) samples the input at
// ((i + 0.5) * in/out - 0.5, (j + 0.5) * in/out - 0.5) with edge clamping.
Image bilinear_resize(const Image& src, int out_h, int out_w);

// LR synthesis: divides both dimensions exactly by `scale`. The input must
// already be divisible (see crop_to_multiple). Output is clamped to [0, 1].
// scale must be 2 or 4.
Image degrade(const Image& hr, int scale);

// Largest top-left region whose dimensions are divisible by `m`.
Image crop_to_multiple(const Image& img, int m);

Image crop(const Image& img, int y0, int x0, int h, int w);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image rotate90(const Image& img);  // 90 degrees clockwise

// Symmetric reflection padding (edge pixel included in the mirror).
Image reflect_pad(const Image& img, int top, int bottom, int left, int right);

}  // namespace hmsr
