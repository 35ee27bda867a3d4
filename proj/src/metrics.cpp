#include "metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "config.hpp"
#include "resample.hpp"

namespace hmsr {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_window() {
    std::vector<double> g(kWin);
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
}

// Valid-mode separable Gaussian filter of an h x w plane.
std::vector<double> gauss_valid(const std::vector<double>& plane, int h, int w) {
    static const std::vector<double> g = gaussian_window();
    const int oh = h - kWin + 1, ow = w - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += g[i] * plane[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += g[i] * tmp[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
    if (h < kWin || w < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double c1 = kK1 * kK1;  // dynamic range 1.0
    const double c2 = kK2 * kK2;
    const size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu1 = gauss_valid(a, h, w);
    const auto mu2 = gauss_valid(b, h, w);
    const auto e_aa = gauss_valid(aa, h, w);
    const auto e_bb = gauss_valid(bb, h, w);
    const auto e_ab = gauss_valid(ab, h, w);
    double total = 0.0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double s1 = e_aa[i] - m1 * m1;
        const double s2 = e_bb[i] - m2 * m2;
        const double s12 = e_ab[i] - m1 * m2;
        total += ((2.0 * m1 * m2 + c1) * (2.0 * s12 + c2)) /
                 ((m1 * m1 + m2 * m2 + c1) * (s1 + s2 + c2));
    }
    return total / static_cast<double>(mu1.size());
}

void check_same_shape(const Image& a, const Image& b, const char* op) {
    if (a.h != b.h || a.w != b.w)
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

double mse_region(const float* a, const float* b, int h, int w, int channels, int border) {
    if (2 * border >= h || 2 * border >= w)
        throw std::invalid_argument("psnr: border crop leaves no pixels");
    double sum = 0.0;
    size_t count = 0;
    for (int y = border; y < h - border; ++y)
        for (int x = border; x < w - border; ++x)
            for (int c = 0; c < channels; ++c) {
                const size_t i = (static_cast<size_t>(y) * w + x) * channels + c;
                const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
                sum += d * d;
                ++count;
            }
    return sum / static_cast<double>(count);
}

double mse_to_db(double mse) {
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

nlohmann::json json_metric(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

}  // namespace

double psnr(const Image& a, const Image& b, int border) {
    check_same_shape(a, b, "psnr");
    return mse_to_db(mse_region(a.px.data(), b.px.data(), a.h, a.w, 3, border));
}

std::vector<float> luma(const Image& img) {
    std::vector<float> y(static_cast<size_t>(img.h) * img.w);
    for (int i = 0; i < img.h; ++i)
        for (int j = 0; j < img.w; ++j)
            y[static_cast<size_t>(i) * img.w + j] = 0.299f * img.at(i, j, 0) +
                                                    0.587f * img.at(i, j, 1) +
                                                    0.114f * img.at(i, j, 2);
    return y;
}

double psnr_y(const Image& a, const Image& b, int border) {
    check_same_shape(a, b, "psnr");
    const auto ya = luma(a), yb = luma(b);
    return mse_to_db(mse_region(ya.data(), yb.data(), a.h, a.w, 1, border));
}

double ssim(const Image& a, const Image& b) {
    check_same_shape(a, b, "ssim");
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> pa(static_cast<size_t>(a.h) * a.w), pb(pa.size());
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                pa[static_cast<size_t>(y) * a.w + x] = a.at(y, x, c);
                pb[static_cast<size_t>(y) * a.w + x] = b.at(y, x, c);
            }
        total += ssim_plane(pa, pb, a.h, a.w);
    }
    return total / 3.0;
}

double ssim_y(const Image& a, const Image& b) {
    check_same_shape(a, b, "ssim");
    const auto ya = luma(a), yb = luma(b);
    std::vector<double> pa(ya.begin(), ya.end()), pb(yb.begin(), yb.end());
    return ssim_plane(pa, pb, a.h, a.w);
}

MetricReport evaluate(const SrModel<float>& model, const std::vector<std::string>& test_paths,
                      int scale, int border, const std::string& color_space, int max_images) {
    MetricReport report;
    report.scale = scale;
    report.border = border;
    report.color_space = color_space;
    const bool use_y = color_space == "y";
    int used = 0;
    for (const auto& path : test_paths) {
        if (max_images > 0 && used >= max_images) break;
        Image hr;
        try {
            hr = load_image(path);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: skipping %s (%s)\n", path.c_str(), e.what());
            report.skipped.push_back(path);
            continue;
        }
        Image hr_cropped = crop_to_multiple(hr, scale);
        Image lr = degrade(hr_cropped, scale);
        Tensor<float> sr_chw = model.forward(image_to_chw(lr), nullptr);
        Image sr = chw_to_image(sr_chw);
        MetricRecord rec;
        rec.path = path;
        rec.psnr_db = use_y ? psnr_y(sr, hr_cropped, border) : psnr(sr, hr_cropped, border);
        rec.ssim = use_y ? ssim_y(sr, hr_cropped) : ssim(sr, hr_cropped);
        report.records.push_back(std::move(rec));
        ++used;
    }
    if (!report.records.empty()) {
        double sp = 0.0, ss = 0.0;
        for (const auto& r : report.records) {
            sp += r.psnr_db;
            ss += r.ssim;
        }
        report.mean_psnr = sp / static_cast<double>(report.records.size());
        report.mean_ssim = ss / static_cast<double>(report.records.size());
    }
    return report;
}

nlohmann::json report_to_json(const MetricReport& report) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : report.records)
        records.push_back({{"path", r.path}, {"psnr_db", json_metric(r.psnr_db)}, {"ssim", r.ssim}});
    return nlohmann::json{{"tool", "hmsr"},
                          {"version", kVersion},
                          {"scale", report.scale},
                          {"border", report.border},
                          {"color_space", report.color_space},
                          {"value_range", "[0,1]"},
                          {"checkpoint_hash", report.checkpoint_hash},
                          {"count", report.records.size()},
                          {"mean_psnr_db", json_metric(report.mean_psnr)},
                          {"mean_ssim", report.mean_ssim},
                          {"records", records},
                          {"skipped", report.skipped}};
}

std::string report_to_table(const MetricReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-48s %12s %8s\n", "image", "PSNR (dB)", "SSIM");
    os << line;
    for (const auto& r : report.records) {
        std::snprintf(line, sizeof(line), "%-48s %12.4f %8.4f\n", r.path.c_str(), r.psnr_db, r.ssim);
        os << line;
    }
    std::snprintf(line, sizeof(line), "%-48s %12.4f %8.4f\n", "mean", report.mean_psnr,
                  report.mean_ssim);
    os << line;
    return os.str();
}

}  // namespace hmsr
