#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "image.hpp"
#include "model.hpp"

namespace hmsr {

// 10*log10(1 / MSE) on [0,1]-scaled values, RGB channels jointly, after
// cropping `border` pixels from every side. Identical inputs give +inf
// (serialized as the string "inf").
double psnr(const Image& a, const Image& b, int border = 0);

// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0; computed per channel over valid window positions and
// averaged across channels. Inputs smaller than the window are an error.
double ssim(const Image& a, const Image& b);

// BT.601 luma plane as a 1-channel "image" stand-in (h*w values).
std::vector<float> luma(const Image& img);

// Metric variants on the luma channel, for cross-paper comparisons.
double psnr_y(const Image& a, const Image& b, int border = 0);
double ssim_y(const Image& a, const Image& b);

struct MetricRecord {
    std::string path;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<MetricRecord> records;
    std::vector<std::string> skipped;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    int scale = 0;
    int border = 0;
    std::string color_space = "rgb";
    std::string checkpoint_hash;
};

// Whole-image protocol: crop HR to a multiple of the scale, degrade,
// run the model, clamp, compare against the cropped HR. Unreadable images
// are skipped and recorded.
MetricReport evaluate(const SrModel<float>& model, const std::vector<std::string>& test_paths,
                      int scale, int border, const std::string& color_space = "rgb",
                      int max_images = 0);

nlohmann::json report_to_json(const MetricReport& report);
std::string report_to_table(const MetricReport& report);

}  // namespace hmsr
