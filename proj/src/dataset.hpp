#pragma once

#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "image.hpp"
#include "rng.hpp"

namespace hmsr {

struct DatasetSplit {
    std::vector<std::string> train_paths;
    std::vector<std::string> test_paths;
    uint64_t split_seed = 0;
    std::pair<int, int> split_ratio{3, 1};
    std::vector<std::string> skipped;                          // unreadable files
    std::map<std::string, std::pair<int, int>> per_category;   // name -> {train, test}
};

// Deterministic stratified split. Categories are the immediate
// subdirectories of `root` (files directly under root form their own
// category). Within each category the file list is shuffled with a seed
// derived from (seed, category name) and floor(n * test/(train+test)) files
// go to the test side; both output lists are sorted. Unreadable image files
// are skipped with a warning and recorded. An image-free root is a
// configuration error.
DatasetSplit build_split(const std::string& root, std::pair<int, int> ratio, uint64_t seed);

// Writes train.txt / test.txt (one path per line) plus split_meta.json.
void write_split(const DatasetSplit& split, const std::string& root, const std::string& out_dir);

std::vector<std::string> read_manifest(const std::string& path);

struct PatchPair {
    Image hr;  // (s*p) x (s*p)
    Image lr;  // p x p
    int scale = 2;
};

// Crop-then-degrade patch sampling. `patch` is the LR side; the HR crop is
// (scale*patch)^2. Images smaller than the crop are reflect-padded (with a
// warning). When `augment` is set, horizontal/vertical flips and a 90-degree
// rotation are each applied with probability 1/2, before degradation, so the
// pair stays aligned by construction.
PatchPair sample_patch(const Image& hr, int scale, int patch, Rng& rng, bool augment);

// Small FIFO-evicting decode cache so iteration-heavy training does not
// re-decode the same PNGs every step.
class ImageCache {
public:
    explicit ImageCache(size_t capacity = 128) : cap_(capacity) {}

    const Image& get(const std::string& path);

private:
    size_t cap_;
    std::unordered_map<std::string, Image> map_;
    std::deque<std::string> order_;
};

}  // namespace hmsr
