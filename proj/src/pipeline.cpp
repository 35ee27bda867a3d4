#include "pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "config.hpp"

namespace fs = std::filesystem;

namespace hmsr {

Image super_resolve(const SrModel<float>& model, const Image& lr, RoutingDecision<float>* decision) {
    Tensor<float> sr = model.forward(image_to_chw(lr), nullptr, decision);
    return chw_to_image(sr);
}

void palette_color(int id, uint8_t rgb[3]) {
    // HSV with hue stepped by the golden-ratio conjugate, converted to RGB
    const double h = std::fmod(static_cast<double>(id) * 0.61803398875, 1.0) * 6.0;
    const double s = 0.68, v = 0.95;
    const int i = static_cast<int>(h);
    const double f = h - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r, g, b;
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = static_cast<uint8_t>(std::lround(r * 255.0));
    rgb[1] = static_cast<uint8_t>(std::lround(g * 255.0));
    rgb[2] = static_cast<uint8_t>(std::lround(b * 255.0));
}

RoutingExport export_routing_map(const RoutingDecision<float>& decision, const MoeConfig& moe) {
    const int total = decision.total_experts();
    if (total > 256)
        throw std::runtime_error("routing map export supports at most 256 experts, got " +
                                 std::to_string(total));
    RoutingExport exp;
    exp.h = decision.h;
    exp.w = decision.w;
    exp.ids.resize(static_cast<size_t>(decision.h) * decision.w);
    exp.colorized = Image(decision.h, decision.w);
    for (int p = 0; p < decision.h * decision.w; ++p) {
        const int id = decision.global_id(p, 0);  // top-1
        exp.ids[p] = static_cast<uint8_t>(id);
        uint8_t rgb[3];
        palette_color(id, rgb);
        for (int c = 0; c < 3; ++c)
            exp.colorized.px[static_cast<size_t>(p) * 3 + c] = rgb[c] / 255.f;
    }
    nlohmann::json kernels = nlohmann::json::array();
    for (const auto& g : moe.groups) kernels.push_back(g.kernel);
    exp.metadata = nlohmann::json{
        {"tool", "hmsr"},
        {"version", kVersion},
        {"group_offsets", decision.group_offsets},
        {"group_kernels", kernels},
        {"top_k", decision.top_k},
        {"exported", decision.top_k > 1 ? "top-1 of top-K" : "top-1"},
        {"palette", "golden-angle-hsv-v1"},
        {"total_experts", total}};
    return exp;
}

void write_routing_export(const RoutingExport& exp, const std::string& out_dir) {
    fs::create_directories(out_dir);
    save_png_gray(out_dir + "/expert_ids.png", exp.ids, exp.h, exp.w);
    save_png(out_dir + "/expert_ids_color.png", exp.colorized);
    std::ofstream f(out_dir + "/routing_meta.json");
    if (!f) throw std::runtime_error("cannot write routing metadata in " + out_dir);
    f << exp.metadata.dump(2) << "\n";
}

}  // namespace hmsr
