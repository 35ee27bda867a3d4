#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace hmsr {

inline constexpr const char* kVersion = "0.2.0";

struct GroupSpec {
    int kernel = 3;
    int experts = 1;
};

struct MoeConfig {
    int scale = 4;
    std::vector<GroupSpec> groups{{1, 8}, {3, 8}};
    int top_k = 1;
    std::string pe_kind = "learned";  // learned | sinusoidal
    bool renormalize_topk = false;
    double balance_coeff = 0.0;
    bool soft_group_mix = false;        // experimental: mix all groups by p_i instead of hard top-1
    std::string exec = "dense";         // dense | sparse (inference-only gather path)
};

struct BackboneConfig {
    int channels = 64;
    int blocks = 6;
    std::string block_kind = "lightweight_residual";  // lightweight_residual | pluggable
};

struct MfaConfig {
    int level_kernel = 3;
    int fuse_kernel = 1;
    double leaky_slope = 0.01;
    bool detach_router_input = false;
};

struct DataConfig {
    std::string root;
    std::string train_manifest;
    std::string test_manifest;
    std::string split_ratio = "3:1";
    uint64_t split_seed = 0;
    int patch_size = 64;  // LR patch side
    bool augment = true;
    int cache_images = 128;
};

struct TrainSection {
    int64_t iterations = 100000;
    int batch_size = 8;
    double lr = 2e-4;
    std::string lr_schedule = "multistep";  // constant | multistep | cosine
    uint64_t seed = 0;
    std::string loss = "l1";
    int64_t eval_every = 1000;
    int64_t checkpoint_every = 1000;
    bool deterministic = false;
    std::string resume = "auto";  // auto | never
};

struct EvalSection {
    int border = -1;  // -1: use the scale factor
    std::string color_space = "rgb";  // rgb | y
    int max_images = 0;               // 0: all
};

struct ExperimentConfig {
    DataConfig data;
    BackboneConfig backbone;
    MfaConfig mfa;
    MoeConfig moe;
    TrainSection train;
    EvalSection eval;
};

// Full schema with defaults, as JSON.
nlohmann::json config_defaults_json();

// Parses a user JSON document against the schema. Unknown keys are rejected
// with the offending dotted key path; missing keys take defaults. Value
// constraints (scale in {2,4}, K <= min experts, odd kernels, enums) are
// checked here.
ExperimentConfig config_from_json(const nlohmann::json& user);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config_file(const std::string& path);

// Applies {"a.b.c": value} style overrides on top of a JSON document.
void apply_dotted_overrides(nlohmann::json& doc, const nlohmann::json& overrides);

// "3:1" -> {3, 1}
std::pair<int, int> parse_ratio(const std::string& ratio);

}  // namespace hmsr
