#include "dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "resample.hpp"

namespace fs = std::filesystem;

namespace hmsr {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

bool readable_image(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    unsigned char magic[4] = {0, 0, 0, 0};
    const size_t n = std::fread(magic, 1, sizeof(magic), f);
    std::fclose(f);
    const bool png = n >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G';
    const bool jpg = n >= 2 && magic[0] == 0xFF && magic[1] == 0xD8;
    return png || jpg;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

}  // namespace

DatasetSplit build_split(const std::string& root, std::pair<int, int> ratio, uint64_t seed) {
    if (!fs::is_directory(root)) throw ConfigError("data root is not a directory: " + root);

    // category name -> sorted file names (relative to category dir)
    std::map<std::string, std::vector<std::string>> cats;
    std::vector<std::string> skipped;
    auto consider = [&](const std::string& cat, const fs::path& p) {
        if (!looks_like_image_file(p.filename().string())) return;
        if (!readable_image(p.string())) {
            std::fprintf(stderr, "warning: skipping unreadable image %s\n", p.string().c_str());
            skipped.push_back(p.string());
            return;
        }
        cats[cat].push_back(p.string());
    };
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) {
            for (const auto& sub : fs::directory_iterator(entry.path()))
                if (sub.is_regular_file()) consider(entry.path().filename().string(), sub.path());
        } else if (entry.is_regular_file()) {
            consider(".", entry.path());
        }
    }

    size_t total = 0;
    for (auto& [name, files] : cats) total += files.size();
    if (total == 0) throw ConfigError("no readable images found under: " + root);

    DatasetSplit split;
    split.split_seed = seed;
    split.split_ratio = ratio;
    split.skipped = std::move(skipped);
    const double test_frac =
        static_cast<double>(ratio.second) / static_cast<double>(ratio.first + ratio.second);
    for (auto& [name, files] : cats) {
        std::sort(files.begin(), files.end());
        Rng rng(mix_seed(seed, fnv1a(name)));
        shuffle_in_place(files, rng);
        const size_t n_test = static_cast<size_t>(static_cast<double>(files.size()) * test_frac);
        for (size_t i = 0; i < files.size(); ++i)
            (i < n_test ? split.test_paths : split.train_paths).push_back(files[i]);
        split.per_category[name] = {static_cast<int>(files.size() - n_test), static_cast<int>(n_test)};
    }
    std::sort(split.train_paths.begin(), split.train_paths.end());
    std::sort(split.test_paths.begin(), split.test_paths.end());
    return split;
}

void write_split(const DatasetSplit& split, const std::string& root, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto write_list = [](const std::string& path, const std::vector<std::string>& lines) {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write manifest: " + path);
        for (const auto& l : lines) f << l << "\n";
    };
    write_list(out_dir + "/train.txt", split.train_paths);
    write_list(out_dir + "/test.txt", split.test_paths);

    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [name, tc] : split.per_category)
        cats[name] = {{"train", tc.first}, {"test", tc.second}};
    nlohmann::json meta{
        {"tool", "hmsr"},
        {"version", kVersion},
        {"root", root},
        {"seed", split.split_seed},
        {"ratio", std::to_string(split.split_ratio.first) + ":" + std::to_string(split.split_ratio.second)},
        {"train_count", split.train_paths.size()},
        {"test_count", split.test_paths.size()},
        {"categories", cats},
        {"skipped", split.skipped}};
    std::ofstream f(out_dir + "/split_meta.json");
    if (!f) throw std::runtime_error("cannot write split metadata in " + out_dir);
    f << meta.dump(2) << "\n";
}

std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open manifest: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

PatchPair sample_patch(const Image& hr, int scale, int patch, Rng& rng, bool augment) {
    const int hp = scale * patch;
    const Image* src = &hr;
    Image padded;
    if (hr.h < hp || hr.w < hp) {
        std::fprintf(stderr, "warning: image %dx%d smaller than %dx%d crop, reflect-padding\n", hr.h,
                     hr.w, hp, hp);
        const int pad_y = std::max(0, hp - hr.h);
        const int pad_x = std::max(0, hp - hr.w);
        padded = reflect_pad(hr, pad_y / 2, pad_y - pad_y / 2, pad_x / 2, pad_x - pad_x / 2);
        src = &padded;
    }
    const int y0 = static_cast<int>(rng.uniform_int(src->h - hp + 1));
    const int x0 = static_cast<int>(rng.uniform_int(src->w - hp + 1));
    Image hr_patch = crop(*src, y0, x0, hp, hp);
    if (augment) {
        if (rng.uniform() < 0.5) hr_patch = flip_horizontal(hr_patch);
        if (rng.uniform() < 0.5) hr_patch = flip_vertical(hr_patch);
        if (rng.uniform() < 0.5) hr_patch = rotate90(hr_patch);
    }
    PatchPair pair;
    pair.scale = scale;
    pair.lr = degrade(hr_patch, scale);
    pair.hr = std::move(hr_patch);
    return pair;
}

const Image& ImageCache::get(const std::string& path) {
    auto it = map_.find(path);
    if (it != map_.end()) return it->second;
    if (cap_ > 0 && map_.size() >= cap_) {
        map_.erase(order_.front());
        order_.pop_front();
    }
    auto [ins, ok] = map_.emplace(path, load_image(path));
    order_.push_back(path);
    return ins->second;
}

}  // namespace hmsr
