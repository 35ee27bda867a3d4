#pragma once

#include <cstdint>
#include <string>

#include "image.hpp"

namespace hmsr {

// Synthetic desk-scale stand-in for aerial imagery: a smooth low-frequency
// background with rectangles, disks and stripe texture so patches contain
// both flat regions and edges. Deterministic in the seed.
Image make_toy_image(uint64_t seed, int h, int w);

// Writes `categories` subdirectories of `per_category` PNGs each under root.
void write_toy_dataset(const std::string& root, int categories, int per_category, int size,
                       uint64_t seed);

}  // namespace hmsr
