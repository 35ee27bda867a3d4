#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dataset.hpp"
#include "errors.hpp"
#include "resample.hpp"
#include "test_util.hpp"
#include "toydata.hpp"

using namespace hmsr;
namespace fs = std::filesystem;

namespace {

// Split construction only sniffs magic bytes, so a stub with a PNG header is
// enough for counting tests and keeps the 2100-file case fast.
void write_png_stub(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    const unsigned char magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(magic), sizeof(magic));
    f << "stub";
}

void make_stub_tree(const std::string& root, int categories, int per_category) {
    for (int c = 0; c < categories; ++c) {
        const std::string dir = root + "/cat" + std::to_string(c);
        fs::create_directories(dir);
        for (int i = 0; i < per_category; ++i)
            write_png_stub(dir + "/img" + std::to_string(i) + ".png");
    }
}

}  // namespace

TEST_CASE("build_split: 21 categories x 100 images at 3:1 gives 1575/525") {
    const std::string root = testutil::temp_dir("split_ucm_shape");
    make_stub_tree(root, 21, 100);
    DatasetSplit split = build_split(root, {3, 1}, 42);
    CHECK(split.train_paths.size() == 1575);
    CHECK(split.test_paths.size() == 525);
    for (const auto& [cat, counts] : split.per_category) {
        CHECK(counts.first == 75);
        CHECK(counts.second == 25);
    }
}

TEST_CASE("build_split: small exact ratios") {
    const std::string root = testutil::temp_dir("split_small");
    make_stub_tree(root, 1, 4);
    DatasetSplit s = build_split(root, {3, 1}, 0);
    CHECK(s.train_paths.size() == 3);
    CHECK(s.test_paths.size() == 1);

    const std::string root2 = testutil::temp_dir("split_small2");
    make_stub_tree(root2, 1, 10);
    DatasetSplit s2 = build_split(root2, {4, 1}, 7);
    CHECK(s2.train_paths.size() == 8);
    CHECK(s2.test_paths.size() == 2);
}

TEST_CASE("build_split: deterministic, disjoint, sorted") {
    const std::string root = testutil::temp_dir("split_det");
    make_stub_tree(root, 3, 10);
    DatasetSplit a = build_split(root, {4, 1}, 123);
    DatasetSplit b = build_split(root, {4, 1}, 123);
    CHECK(testutil::hash_lines(a.train_paths) == testutil::hash_lines(b.train_paths));
    CHECK(testutil::hash_lines(a.test_paths) == testutil::hash_lines(b.test_paths));
    CHECK(std::is_sorted(a.train_paths.begin(), a.train_paths.end()));
    CHECK(std::is_sorted(a.test_paths.begin(), a.test_paths.end()));
    for (const auto& t : a.test_paths)
        CHECK(std::find(a.train_paths.begin(), a.train_paths.end(), t) == a.train_paths.end());
    // a different seed almost surely partitions differently
    DatasetSplit c = build_split(root, {4, 1}, 124);
    CHECK(testutil::hash_lines(a.test_paths) != testutil::hash_lines(c.test_paths));
}

TEST_CASE("build_split: empty root is a config error, junk files are recorded") {
    const std::string root = testutil::temp_dir("split_empty");
    CHECK_THROWS_AS(build_split(root, {3, 1}, 0), ConfigError);

    const std::string root2 = testutil::temp_dir("split_junk");
    fs::create_directories(root2 + "/cat0");
    write_png_stub(root2 + "/cat0/good.png");
    std::ofstream(root2 + "/cat0/bad.png") << "not an image";
    DatasetSplit s = build_split(root2, {3, 1}, 0);
    CHECK(s.train_paths.size() + s.test_paths.size() == 1);
    REQUIRE(s.skipped.size() == 1);
    CHECK(s.skipped[0].find("bad.png") != std::string::npos);
}

TEST_CASE("write_split/read_manifest round trip") {
    const std::string root = testutil::temp_dir("split_io");
    make_stub_tree(root, 2, 6);
    DatasetSplit s = build_split(root, {2, 1}, 5);
    const std::string out = testutil::temp_dir("split_io_out");
    write_split(s, root, out);
    CHECK(read_manifest(out + "/train.txt") == s.train_paths);
    CHECK(read_manifest(out + "/test.txt") == s.test_paths);
    std::ifstream meta(out + "/split_meta.json");
    REQUIRE(meta.good());
    nlohmann::json j = nlohmann::json::parse(meta);
    CHECK(j.at("train_count").get<size_t>() == s.train_paths.size());
    CHECK(j.at("seed").get<uint64_t>() == 5);
}

TEST_CASE("degrade: constant image stays constant at half size") {
    Image img(8, 8);
    for (auto& v : img.px) v = 0.5f;
    Image lr = degrade(img, 2);
    CHECK(lr.h == 4);
    CHECK(lr.w == 4);
    for (float v : lr.px) CHECK(v == doctest::Approx(0.5f).epsilon(1e-6));
}

TEST_CASE("degrade: 4x4 checkerboard at scale 4 matches hand-evaluated bilinear") {
    Image img(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>((y + x) % 2);
    Image lr = degrade(img, 4);
    REQUIRE(lr.h == 1);
    REQUIRE(lr.w == 1);
    // the output pixel samples (1.5, 1.5): the mean of the central 2x2
    // block {(1,1)=0,(1,2)=1,(2,1)=1,(2,2)=0} = 0.5
    Image oracle = testutil::ref_bilinear_downsample(img, 4);
    for (int c = 0; c < 3; ++c) {
        CHECK(lr.at(0, 0, c) == doctest::Approx(oracle.at(0, 0, c)).epsilon(1e-7));
        CHECK(lr.at(0, 0, c) == doctest::Approx(0.5f).epsilon(1e-7));
    }
}

TEST_CASE("degrade: shape law and oracle equivalence on random images") {
    for (int scale : {2, 4}) {
        Image img = testutil::random_image(99 + scale, 32, 48);
        Image lr = degrade(img, scale);
        CHECK(lr.h == 32 / scale);
        CHECK(lr.w == 48 / scale);
        Image oracle = testutil::ref_bilinear_downsample(img, scale);
        for (size_t i = 0; i < lr.px.size(); ++i)
            CHECK(lr.px[i] == doctest::Approx(oracle.px[i]).epsilon(1e-6));
        for (float v : lr.px) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
    }
}

TEST_CASE("degrade: 256x256 at scale 4 gives 64x64; bad scale rejected") {
    Image img(256, 256);
    Image lr = degrade(img, 4);
    CHECK(lr.h == 64);
    CHECK(lr.w == 64);
    CHECK_THROWS_AS(degrade(img, 3), ConfigError);
}

TEST_CASE("degrade commutes with axis flips") {
    Image img = testutil::random_image(7, 24, 24);
    for (int scale : {2, 4}) {
        Image a = degrade(flip_horizontal(img), scale);
        Image b = flip_horizontal(degrade(img, scale));
        for (size_t i = 0; i < a.px.size(); ++i)
            CHECK(a.px[i] == doctest::Approx(b.px[i]).epsilon(1e-6));
        Image c = degrade(flip_vertical(img), scale);
        Image d = flip_vertical(degrade(img, scale));
        for (size_t i = 0; i < c.px.size(); ++i)
            CHECK(c.px[i] == doctest::Approx(d.px[i]).epsilon(1e-6));
    }
}

TEST_CASE("crop-degrade consistency on grid-aligned offsets") {
    Image img = testutil::random_image(11, 64, 64);
    for (int scale : {2, 4}) {
        Image full_lr = degrade(img, scale);
        const int y0 = 2 * scale, x0 = 4 * scale, hs = 24 * (scale == 2 ? 1 : 1);
        const int crop_side = scale * 8;
        Image hr_crop = crop(img, y0, x0, crop_side, crop_side);
        Image lr_crop = degrade(hr_crop, scale);
        for (int y = 0; y < lr_crop.h; ++y)
            for (int x = 0; x < lr_crop.w; ++x)
                for (int c = 0; c < 3; ++c)
                    CHECK(lr_crop.at(y, x, c) ==
                          doctest::Approx(full_lr.at(y0 / scale + y, x0 / scale + x, c))
                              .epsilon(1e-5));
        (void)hs;
    }
}

TEST_CASE("sample_patch: shapes, determinism, pair invariant") {
    Image img = testutil::random_image(3, 300, 300);
    Rng rng1(77), rng2(77);
    PatchPair a = sample_patch(img, 4, 64, rng1, false);
    PatchPair b = sample_patch(img, 4, 64, rng2, false);
    CHECK(a.hr.h == 256);
    CHECK(a.hr.w == 256);
    CHECK(a.lr.h == 64);
    CHECK(a.lr.w == 64);
    CHECK(a.hr.px == b.hr.px);
    CHECK(a.lr.px == b.lr.px);
    // lr is the degraded hr crop by construction
    Image lr_ref = degrade(a.hr, 4);
    for (size_t i = 0; i < lr_ref.px.size(); ++i)
        CHECK(a.lr.px[i] == doctest::Approx(lr_ref.px[i]).epsilon(1e-7));
}

TEST_CASE("sample_patch: augmentation changes the crop but keeps the pair aligned") {
    Image img = testutil::random_image(5, 128, 128);
    Rng rng(1234);
    PatchPair p = sample_patch(img, 2, 32, rng, true);
    Image lr_ref = degrade(p.hr, 2);
    for (size_t i = 0; i < lr_ref.px.size(); ++i)
        CHECK(p.lr.px[i] == doctest::Approx(lr_ref.px[i]).epsilon(1e-7));
}

TEST_CASE("sample_patch: undersized image is reflect-padded") {
    Image img = testutil::random_image(6, 20, 20);
    Rng rng(9);
    PatchPair p = sample_patch(img, 2, 16, rng, false);  // needs 32x32
    CHECK(p.hr.h == 32);
    CHECK(p.lr.h == 16);
}

TEST_CASE("PNG write/read round trip within 8-bit quantization") {
    Image img = testutil::random_image(8, 9, 13);
    const std::string dir = testutil::temp_dir("png_rt");
    save_png(dir + "/x.png", img);
    Image back = load_image(dir + "/x.png");
    REQUIRE(back.h == img.h);
    REQUIRE(back.w == img.w);
    for (size_t i = 0; i < img.px.size(); ++i)
        CHECK(std::abs(back.px[i] - img.px[i]) <= 0.5f / 255.f + 1e-6f);
    for (float v : back.px) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("load_image rejects non-images") {
    const std::string dir = testutil::temp_dir("img_err");
    std::ofstream(dir + "/f.png") << "plain text";
    CHECK_THROWS(load_image(dir + "/f.png"));
    CHECK_THROWS(load_image(dir + "/missing.png"));
}

TEST_CASE("toy dataset generator writes decodable PNGs") {
    const std::string root = testutil::temp_dir("toygen");
    write_toy_dataset(root, 2, 3, 48, 1);
    DatasetSplit s = build_split(root, {2, 1}, 0);
    CHECK(s.train_paths.size() + s.test_paths.size() == 6);
    Image img = load_image(s.train_paths.front());
    CHECK(img.h == 48);
    CHECK(img.w == 48);
}
