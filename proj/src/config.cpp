#include "config.hpp"

#include <fstream>
#include <set>

#include "errors.hpp"

namespace hmsr {

using nlohmann::json;

json config_defaults_json() { return config_to_json(ExperimentConfig{}); }

json config_to_json(const ExperimentConfig& c) {
    json groups = json::array();
    for (const auto& g : c.moe.groups) groups.push_back({{"kernel", g.kernel}, {"experts", g.experts}});
    return json{
        {"data",
         {{"root", c.data.root},
          {"train_manifest", c.data.train_manifest},
          {"test_manifest", c.data.test_manifest},
          {"split_ratio", c.data.split_ratio},
          {"split_seed", c.data.split_seed},
          {"patch_size", c.data.patch_size},
          {"augment", c.data.augment},
          {"cache_images", c.data.cache_images}}},
        {"backbone",
         {{"channels", c.backbone.channels},
          {"blocks", c.backbone.blocks},
          {"block_kind", c.backbone.block_kind}}},
        {"mfa",
         {{"level_kernel", c.mfa.level_kernel},
          {"fuse_kernel", c.mfa.fuse_kernel},
          {"leaky_slope", c.mfa.leaky_slope},
          {"detach_router_input", c.mfa.detach_router_input}}},
        {"moe",
         {{"scale", c.moe.scale},
          {"groups", groups},
          {"top_k", c.moe.top_k},
          {"pe_kind", c.moe.pe_kind},
          {"renormalize_topk", c.moe.renormalize_topk},
          {"balance_coeff", c.moe.balance_coeff},
          {"soft_group_mix", c.moe.soft_group_mix},
          {"exec", c.moe.exec}}},
        {"train",
         {{"iterations", c.train.iterations},
          {"batch_size", c.train.batch_size},
          {"lr", c.train.lr},
          {"lr_schedule", c.train.lr_schedule},
          {"seed", c.train.seed},
          {"loss", c.train.loss},
          {"eval_every", c.train.eval_every},
          {"checkpoint_every", c.train.checkpoint_every},
          {"deterministic", c.train.deterministic},
          {"resume", c.train.resume}}},
        {"eval",
         {{"border", c.eval.border},
          {"color_space", c.eval.color_space},
          {"max_images", c.eval.max_images}}}};
}

namespace {

void reject_unknown_keys(const json& user, const json& schema, const std::string& prefix) {
    if (!user.is_object()) throw ConfigError("config: expected object at '" + prefix + "'");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key())) throw ConfigError("unknown config key: " + path);
        const json& sv = schema.at(it.key());
        if (sv.is_object()) {
            reject_unknown_keys(it.value(), sv, path);
        } else if (sv.is_array() && it.key() == "groups") {
            if (!it.value().is_array()) throw ConfigError("config: '" + path + "' must be an array");
            static const std::set<std::string> group_keys = {"kernel", "experts"};
            int idx = 0;
            for (const auto& g : it.value()) {
                if (!g.is_object())
                    throw ConfigError("config: '" + path + "[" + std::to_string(idx) + "]' must be an object");
                for (auto git = g.begin(); git != g.end(); ++git)
                    if (!group_keys.count(git.key()))
                        throw ConfigError("unknown config key: " + path + "[" + std::to_string(idx) +
                                          "]." + git.key());
                ++idx;
            }
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void check_enum(const std::string& value, std::initializer_list<const char*> allowed,
                const std::string& key) {
    for (const char* a : allowed)
        if (value == a) return;
    std::string msg = "config: invalid value '" + value + "' for " + key + " (allowed:";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw ConfigError(msg + ")");
}

}  // namespace

ExperimentConfig config_from_json(const json& user) {
    const json schema = config_defaults_json();
    reject_unknown_keys(user, schema, "");

    ExperimentConfig c;
    if (user.contains("data")) {
        const json& j = user.at("data");
        read(j, "root", c.data.root);
        read(j, "train_manifest", c.data.train_manifest);
        read(j, "test_manifest", c.data.test_manifest);
        read(j, "split_ratio", c.data.split_ratio);
        read(j, "split_seed", c.data.split_seed);
        read(j, "patch_size", c.data.patch_size);
        read(j, "augment", c.data.augment);
        read(j, "cache_images", c.data.cache_images);
    }
    if (user.contains("backbone")) {
        const json& j = user.at("backbone");
        read(j, "channels", c.backbone.channels);
        read(j, "blocks", c.backbone.blocks);
        read(j, "block_kind", c.backbone.block_kind);
    }
    if (user.contains("mfa")) {
        const json& j = user.at("mfa");
        read(j, "level_kernel", c.mfa.level_kernel);
        read(j, "fuse_kernel", c.mfa.fuse_kernel);
        read(j, "leaky_slope", c.mfa.leaky_slope);
        read(j, "detach_router_input", c.mfa.detach_router_input);
    }
    if (user.contains("moe")) {
        const json& j = user.at("moe");
        read(j, "scale", c.moe.scale);
        read(j, "top_k", c.moe.top_k);
        read(j, "pe_kind", c.moe.pe_kind);
        read(j, "renormalize_topk", c.moe.renormalize_topk);
        read(j, "balance_coeff", c.moe.balance_coeff);
        read(j, "soft_group_mix", c.moe.soft_group_mix);
        read(j, "exec", c.moe.exec);
        if (j.contains("groups")) {
            c.moe.groups.clear();
            for (const auto& g : j.at("groups")) {
                GroupSpec spec;
                read(g, "kernel", spec.kernel);
                read(g, "experts", spec.experts);
                c.moe.groups.push_back(spec);
            }
        }
    }
    if (user.contains("train")) {
        const json& j = user.at("train");
        read(j, "iterations", c.train.iterations);
        read(j, "batch_size", c.train.batch_size);
        read(j, "lr", c.train.lr);
        read(j, "lr_schedule", c.train.lr_schedule);
        read(j, "seed", c.train.seed);
        read(j, "loss", c.train.loss);
        read(j, "eval_every", c.train.eval_every);
        read(j, "checkpoint_every", c.train.checkpoint_every);
        read(j, "deterministic", c.train.deterministic);
        read(j, "resume", c.train.resume);
    }
    if (user.contains("eval")) {
        const json& j = user.at("eval");
        read(j, "border", c.eval.border);
        read(j, "color_space", c.eval.color_space);
        read(j, "max_images", c.eval.max_images);
    }

    // value constraints
    if (c.moe.scale != 2 && c.moe.scale != 4) throw ConfigError("config: moe.scale must be 2 or 4");
    if (c.moe.groups.empty()) throw ConfigError("config: moe.groups must contain at least one group");
    int min_experts = c.moe.groups.front().experts;
    for (size_t i = 0; i < c.moe.groups.size(); ++i) {
        const auto& g = c.moe.groups[i];
        if (g.experts < 1)
            throw ConfigError("config: moe.groups[" + std::to_string(i) + "].experts must be >= 1");
        if (g.kernel < 1 || g.kernel % 2 == 0)
            throw ConfigError("config: moe.groups[" + std::to_string(i) + "].kernel must be odd and positive");
        min_experts = std::min(min_experts, g.experts);
    }
    if (c.moe.top_k < 1 || c.moe.top_k > min_experts)
        throw ConfigError("config: moe.top_k must satisfy 1 <= K <= min group experts");
    check_enum(c.moe.pe_kind, {"learned", "sinusoidal"}, "moe.pe_kind");
    check_enum(c.moe.exec, {"dense", "sparse"}, "moe.exec");
    if (c.backbone.channels < 1) throw ConfigError("config: backbone.channels must be >= 1");
    if (c.backbone.blocks < 1) throw ConfigError("config: backbone.blocks must be >= 1");
    check_enum(c.backbone.block_kind, {"lightweight_residual", "pluggable"}, "backbone.block_kind");
    if (c.mfa.level_kernel < 1 || c.mfa.level_kernel % 2 == 0)
        throw ConfigError("config: mfa.level_kernel must be odd and positive");
    if (c.mfa.fuse_kernel < 1 || c.mfa.fuse_kernel % 2 == 0)
        throw ConfigError("config: mfa.fuse_kernel must be odd and positive");
    if (c.train.iterations < 1) throw ConfigError("config: train.iterations must be >= 1");
    if (c.train.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
    if (!(c.train.lr > 0)) throw ConfigError("config: train.lr must be > 0");
    check_enum(c.train.lr_schedule, {"constant", "multistep", "cosine"}, "train.lr_schedule");
    check_enum(c.train.loss, {"l1"}, "train.loss");
    check_enum(c.train.resume, {"auto", "never"}, "train.resume");
    if (c.train.eval_every < 1) throw ConfigError("config: train.eval_every must be >= 1");
    if (c.train.checkpoint_every < 1) throw ConfigError("config: train.checkpoint_every must be >= 1");
    if (c.data.patch_size < 1) throw ConfigError("config: data.patch_size must be >= 1");
    check_enum(c.eval.color_space, {"rgb", "y"}, "eval.color_space");
    parse_ratio(c.data.split_ratio);
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(doc);
}

void apply_dotted_overrides(json& doc, const json& overrides) {
    if (overrides.is_null()) return;
    if (!overrides.is_object()) throw ConfigError("overrides must be a JSON object");
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        json* node = &doc;
        std::string key = it.key();
        size_t pos;
        while ((pos = key.find('.')) != std::string::npos) {
            const std::string head = key.substr(0, pos);
            if (!node->contains(head)) (*node)[head] = json::object();
            node = &(*node)[head];
            key = key.substr(pos + 1);
        }
        (*node)[key] = it.value();
    }
}

std::pair<int, int> parse_ratio(const std::string& ratio) {
    const auto colon = ratio.find(':');
    if (colon == std::string::npos) throw ConfigError("ratio must look like '3:1', got '" + ratio + "'");
    int a = 0, b = 0;
    try {
        a = std::stoi(ratio.substr(0, colon));
        b = std::stoi(ratio.substr(colon + 1));
    } catch (...) {
        throw ConfigError("ratio must look like '3:1', got '" + ratio + "'");
    }
    if (a < 1 || b < 1) throw ConfigError("ratio parts must be positive, got '" + ratio + "'");
    return {a, b};
}

}  // namespace hmsr
