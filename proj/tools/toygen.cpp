// Generates a synthetic desk-scale image dataset (category subdirectories
// of PNGs) for smoke tests and quickstart runs when no real dataset is at
// hand.

#include <CLI11.hpp>
#include <cstdio>

#include "toydata.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic toy dataset generator"};
    std::string out;
    int categories = 4, per_category = 16, size = 96;
    unsigned long long seed = 0;
    app.add_option("--out", out, "output root directory")->required();
    app.add_option("--categories", categories, "number of category subdirectories");
    app.add_option("--per-category", per_category, "images per category");
    app.add_option("--size", size, "image side length in pixels");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);
    try {
        hmsr::write_toy_dataset(out, categories, per_category, size, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    std::printf("wrote %d x %d images of %dx%d px under %s\n", categories, per_category, size, size,
                out.c_str());
    return 0;
}
