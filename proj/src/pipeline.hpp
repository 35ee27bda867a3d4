#pragma once

#include <json.hpp>
#include <string>

#include "image.hpp"
#include "model.hpp"

namespace hmsr {

// Whole-image inference: LR image in, clamped SR image out (s times larger).
Image super_resolve(const SrModel<float>& model, const Image& lr,
                    RoutingDecision<float>* decision = nullptr);

struct RoutingExport {
    int h = 0, w = 0;
    std::vector<uint8_t> ids;  // global expert id per LR pixel
    Image colorized;
    nlohmann::json metadata;
};

// Flattens a K=1 routing decision into a global expert-id image
// (id = group offset + within-group index) plus a colorized rendering with
// a fixed palette. With K>1 the top-1 expert is exported and the metadata
// says so. Requires sum(M_i) <= 256 for the 8-bit id image.
RoutingExport export_routing_map(const RoutingDecision<float>& decision, const MoeConfig& moe);

// expert_ids.png, expert_ids_color.png, routing_meta.json
void write_routing_export(const RoutingExport& exp, const std::string& out_dir);

// Fixed palette: golden-angle hue spacing, full saturation ramp. Documented
// as "golden-angle-hsv-v1" in the metadata.
void palette_color(int id, uint8_t rgb[3]);

}  // namespace hmsr
