#include "toydata.hpp"

#include <cmath>
#include <filesystem>

#include "rng.hpp"

namespace fs = std::filesystem;

namespace hmsr {

Image make_toy_image(uint64_t seed, int h, int w) {
    Rng rng(mix_seed(seed, 0x70u));
    Image img(h, w);
    // low-frequency background
    const double fx = 1.0 + 2.0 * rng.uniform();
    const double fy = 1.0 + 2.0 * rng.uniform();
    const double phase = 6.283 * rng.uniform();
    float tint[3] = {static_cast<float>(0.3 + 0.4 * rng.uniform()),
                     static_cast<float>(0.3 + 0.4 * rng.uniform()),
                     static_cast<float>(0.3 + 0.4 * rng.uniform())};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double base =
                0.5 + 0.2 * std::sin(6.283 * fx * x / w + phase) * std::cos(6.283 * fy * y / h);
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(base) * tint[c] + 0.25f;
        }
    // rectangles ("buildings")
    const int n_rect = 3 + static_cast<int>(rng.uniform_int(5));
    for (int r = 0; r < n_rect; ++r) {
        const int rw = 4 + static_cast<int>(rng.uniform_int(std::max(2, w / 4)));
        const int rh = 4 + static_cast<int>(rng.uniform_int(std::max(2, h / 4)));
        const int x0 = static_cast<int>(rng.uniform_int(std::max(1, w - rw)));
        const int y0 = static_cast<int>(rng.uniform_int(std::max(1, h - rh)));
        float col[3] = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                        static_cast<float>(rng.uniform())};
        for (int y = y0; y < std::min(h, y0 + rh); ++y)
            for (int x = x0; x < std::min(w, x0 + rw); ++x)
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
    }
    // disks ("tanks")
    const int n_disk = 1 + static_cast<int>(rng.uniform_int(3));
    for (int d = 0; d < n_disk; ++d) {
        const int radius = 3 + static_cast<int>(rng.uniform_int(std::max(2, std::min(h, w) / 8)));
        const int cx = static_cast<int>(rng.uniform_int(w));
        const int cy = static_cast<int>(rng.uniform_int(h));
        const float shade = static_cast<float>(0.2 + 0.7 * rng.uniform());
        for (int y = std::max(0, cy - radius); y < std::min(h, cy + radius); ++y)
            for (int x = std::max(0, cx - radius); x < std::min(w, cx + radius); ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius)
                    for (int c = 0; c < 3; ++c) img.at(y, x, c) = shade;
    }
    // diagonal stripe texture ("fields")
    const double angle = rng.uniform() * 3.14159;
    const double freq = 0.15 + 0.2 * rng.uniform();
    const float amp = static_cast<float>(0.05 + 0.1 * rng.uniform());
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float m = amp * static_cast<float>(std::sin(freq * (ca * x + sa * y)));
            for (int c = 0; c < 3; ++c) img.at(y, x, c) += m;
        }
    img.clamp01();
    return img;
}

void write_toy_dataset(const std::string& root, int categories, int per_category, int size,
                       uint64_t seed) {
    for (int cat = 0; cat < categories; ++cat) {
        const std::string dir = root + "/cat" + std::to_string(cat);
        fs::create_directories(dir);
        for (int i = 0; i < per_category; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "/img%03d.png", i);
            save_png(dir + name, make_toy_image(mix_seed(seed, cat, i), size, size));
        }
    }
}

}  // namespace hmsr
