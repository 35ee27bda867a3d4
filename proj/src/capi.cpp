#include "hmsr.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "train.hpp"

namespace fs = std::filesystem;

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return HMSR_OK;
    } catch (const hmsr::ConfigError& e) {
        return fail(HMSR_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(HMSR_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(HMSR_ERR_RUNTIME, "unknown error");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw hmsr::ConfigError(what);
}

}  // namespace

struct hmsr_model {
    hmsr::LoadedCheckpoint ckpt;
    std::string path;
    std::string config_json;
};

extern "C" {

const char* hmsr_version(void) { return hmsr::kVersion; }

const char* hmsr_last_error(void) { return g_last_error.c_str(); }

int hmsr_prepare_data(const char* root, int ratio_train, int ratio_test, unsigned long long seed,
                      const char* out_dir, long long* train_count, long long* test_count) {
    return guarded([&] {
        require(root && out_dir, "root and out_dir are required");
        require(ratio_train >= 1 && ratio_test >= 1, "ratio parts must be positive");
        hmsr::DatasetSplit split = hmsr::build_split(root, {ratio_train, ratio_test}, seed);
        hmsr::write_split(split, root, out_dir);
        if (train_count) *train_count = static_cast<long long>(split.train_paths.size());
        if (test_count) *test_count = static_cast<long long>(split.test_paths.size());
    });
}

int hmsr_train(const char* config_path, const char* out_dir, const char* overrides_json) {
    return guarded([&] {
        require(config_path && out_dir, "config_path and out_dir are required");
        std::ifstream f(config_path);
        if (!f) throw hmsr::ConfigError(std::string("cannot open config file: ") + config_path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(f);
        } catch (const nlohmann::json::parse_error& e) {
            throw hmsr::ConfigError(std::string("config parse error: ") + e.what());
        }
        if (overrides_json && overrides_json[0] != '\0') {
            nlohmann::json overrides;
            try {
                overrides = nlohmann::json::parse(overrides_json);
            } catch (const nlohmann::json::parse_error& e) {
                throw hmsr::ConfigError(std::string("overrides parse error: ") + e.what());
            }
            hmsr::apply_dotted_overrides(doc, overrides);
        }
        hmsr::ExperimentConfig cfg = hmsr::config_from_json(doc);

        const std::string latest = std::string(out_dir) + "/ckpt_latest.bin";
        std::unique_ptr<hmsr::Trainer> trainer;
        if (cfg.train.resume == "auto" && fs::exists(latest)) {
            hmsr::LoadedCheckpoint ckpt = hmsr::load_checkpoint(latest);
            const nlohmann::json a = hmsr::config_to_json(ckpt.cfg);
            const nlohmann::json b = hmsr::config_to_json(cfg);
            for (const char* section : {"backbone", "mfa", "moe"})
                if (a.at(section) != b.at(section))
                    throw hmsr::ConfigError(
                        std::string("cannot resume: checkpoint '") + section +
                        "' section differs from the requested config (use train.resume=never)");
            trainer = std::make_unique<hmsr::Trainer>(cfg, std::move(ckpt));
        } else {
            trainer = std::make_unique<hmsr::Trainer>(cfg);
        }
        trainer->fit(out_dir);
    });
}

hmsr_model* hmsr_model_open(const char* checkpoint_path) {
    hmsr_model* out = nullptr;
    const int rc = guarded([&] {
        require(checkpoint_path, "checkpoint_path is required");
        auto m = std::make_unique<hmsr_model>();
        m->ckpt = hmsr::load_checkpoint(checkpoint_path);
        m->path = checkpoint_path;
        m->config_json = hmsr::config_to_json(m->ckpt.cfg).dump(2);
        out = m.release();
    });
    return rc == HMSR_OK ? out : nullptr;
}

void hmsr_model_close(hmsr_model* model) { delete model; }

int hmsr_model_scale(const hmsr_model* model) {
    return model ? model->ckpt.cfg.moe.scale : 0;
}

const char* hmsr_model_config_json(const hmsr_model* model) {
    return model ? model->config_json.c_str() : "";
}

int hmsr_eval(hmsr_model* model, const char* test_manifest, int expected_scale, int border,
              const char* out_dir) {
    return guarded([&] {
        require(model && test_manifest && out_dir, "model, test_manifest and out_dir are required");
        const int scale = model->ckpt.cfg.moe.scale;
        if (expected_scale > 0 && expected_scale != scale)
            throw hmsr::ConfigError("scale mismatch: checkpoint was trained for x" +
                                    std::to_string(scale) + ", requested x" +
                                    std::to_string(expected_scale));
        const int use_border = border >= 0 ? border : scale;
        auto paths = hmsr::read_manifest(test_manifest);
        hmsr::MetricReport report =
            hmsr::evaluate(*model->ckpt.model, paths, scale, use_border,
                           model->ckpt.cfg.eval.color_space, model->ckpt.cfg.eval.max_images);
        report.checkpoint_hash = hmsr::file_hash(model->path);
        fs::create_directories(out_dir);
        {
            std::ofstream f(std::string(out_dir) + "/report.json");
            f << hmsr::report_to_json(report).dump(2) << "\n";
        }
        {
            std::ofstream f(std::string(out_dir) + "/report.txt");
            f << hmsr::report_to_table(report);
        }
        {
            std::ofstream f(std::string(out_dir) + "/config_resolved.json");
            f << model->config_json << "\n";
        }
    });
}

int hmsr_infer(hmsr_model* model, const char* image_in, const char* image_out) {
    return guarded([&] {
        require(model && image_in && image_out, "model, image_in and image_out are required");
        hmsr::Image lr = hmsr::load_image(image_in);
        hmsr::Image sr = hmsr::super_resolve(*model->ckpt.model, lr);
        hmsr::save_png(image_out, sr);
    });
}

int hmsr_infer_buffer(hmsr_model* model, const float* lr, int h, int w, float* sr) {
    return guarded([&] {
        require(model && lr && sr, "model and buffers are required");
        require(h >= 1 && w >= 1, "image dimensions must be positive");
        hmsr::Image img(h, w);
        std::copy(lr, lr + static_cast<size_t>(h) * w * 3, img.px.begin());
        hmsr::Image out = hmsr::super_resolve(*model->ckpt.model, img);
        std::copy(out.px.begin(), out.px.end(), sr);
    });
}

int hmsr_viz_routing(hmsr_model* model, const char* image_in, const char* out_dir) {
    return guarded([&] {
        require(model && image_in && out_dir, "model, image_in and out_dir are required");
        hmsr::Image lr = hmsr::load_image(image_in);
        hmsr::RoutingDecision<float> decision;
        hmsr::super_resolve(*model->ckpt.model, lr, &decision);
        hmsr::RoutingExport exp = hmsr::export_routing_map(decision, model->ckpt.cfg.moe);
        hmsr::write_routing_export(exp, out_dir);
        std::ofstream f(std::string(out_dir) + "/config_resolved.json");
        f << model->config_json << "\n";
    });
}

}  // extern "C"
