// hmsr command line: prepare-data / train / eval / infer / viz-routing.
// Talks to the core exclusively through the C API in hmsr.h.
// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "hmsr.h"

namespace {

int report(int rc) {
    if (rc != HMSR_OK) std::fprintf(stderr, "error: %s\n", hmsr_last_error());
    return rc;
}

struct ModelHandle {
    hmsr_model* m = nullptr;
    explicit ModelHandle(const std::string& path) : m(hmsr_model_open(path.c_str())) {}
    ~ModelHandle() { hmsr_model_close(m); }
    ModelHandle(const ModelHandle&) = delete;
    ModelHandle& operator=(const ModelHandle&) = delete;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heterogeneous mixture-of-experts super-resolution"};
    app.set_version_flag("--version", std::string(hmsr_version()));
    app.require_subcommand(1);

    // prepare-data
    std::string pd_root, pd_ratio = "3:1", pd_out;
    unsigned long long pd_seed = 0;
    auto* prep = app.add_subcommand("prepare-data", "build a deterministic train/test split");
    prep->add_option("--root", pd_root, "directory of HR images (per-category subdirs supported)")
        ->required();
    prep->add_option("--ratio", pd_ratio, "train:test ratio, e.g. 3:1");
    prep->add_option("--seed", pd_seed, "split seed");
    prep->add_option("--out", pd_out, "output directory for manifests")->required();

    // train
    std::string tr_config, tr_out;
    long long tr_seed = -1;
    bool tr_deterministic = false;
    auto* train = app.add_subcommand("train", "train a model from a JSON config");
    train->add_option("--config", tr_config, "experiment config file")->required();
    train->add_option("--out", tr_out, "output directory (checkpoints, logs)")->required();
    train->add_option("--seed", tr_seed, "override train.seed");
    train->add_flag("--deterministic", tr_deterministic, "force deterministic mode");

    // eval
    std::string ev_checkpoint, ev_split, ev_out;
    int ev_scale = -1, ev_border = -1;
    auto* eval = app.add_subcommand("eval", "evaluate PSNR/SSIM on a test manifest");
    eval->add_option("--checkpoint", ev_checkpoint, "checkpoint file")->required();
    eval->add_option("--split", ev_split, "manifest of HR test images (one path per line)")
        ->required();
    eval->add_option("--scale", ev_scale, "expected scale factor (cross-checked)");
    eval->add_option("--border", ev_border, "border crop in pixels (default: scale)");
    eval->add_option("--out", ev_out, "output directory for the report")->required();

    // infer
    std::string in_checkpoint, in_image, in_out;
    auto* infer = app.add_subcommand("infer", "super-resolve one image");
    infer->add_option("--checkpoint", in_checkpoint, "checkpoint file")->required();
    infer->add_option("--in", in_image, "input LR image (PNG/JPEG)")->required();
    infer->add_option("--out", in_out, "output PNG path")->required();

    // viz-routing
    std::string vz_checkpoint, vz_image, vz_out;
    auto* viz = app.add_subcommand("viz-routing", "export the per-pixel expert selection map");
    viz->add_option("--checkpoint", vz_checkpoint, "checkpoint file")->required();
    viz->add_option("--in", vz_image, "input LR image")->required();
    viz->add_option("--out", vz_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : HMSR_ERR_CONFIG;
    }

    if (prep->parsed()) {
        int a = 0, b = 0;
        if (std::sscanf(pd_ratio.c_str(), "%d:%d", &a, &b) != 2 || a < 1 || b < 1) {
            std::fprintf(stderr, "error: --ratio must look like 3:1\n");
            return HMSR_ERR_CONFIG;
        }
        long long n_train = 0, n_test = 0;
        const int rc =
            report(hmsr_prepare_data(pd_root.c_str(), a, b, pd_seed, pd_out.c_str(), &n_train, &n_test));
        if (rc == HMSR_OK)
            std::printf("wrote %s/train.txt (%lld) and %s/test.txt (%lld)\n", pd_out.c_str(), n_train,
                        pd_out.c_str(), n_test);
        return rc;
    }

    if (train->parsed()) {
        std::string overrides = "{";
        bool first = true;
        if (tr_seed >= 0) {
            overrides += "\"train.seed\": " + std::to_string(tr_seed);
            first = false;
        }
        if (tr_deterministic) {
            overrides += std::string(first ? "" : ", ") + "\"train.deterministic\": true";
            first = false;
        }
        overrides += "}";
        const int rc =
            report(hmsr_train(tr_config.c_str(), tr_out.c_str(), first ? nullptr : overrides.c_str()));
        if (rc == HMSR_OK) std::printf("training finished; artifacts in %s\n", tr_out.c_str());
        return rc;
    }

    if (eval->parsed()) {
        ModelHandle model(ev_checkpoint);
        if (!model.m) return report(HMSR_ERR_RUNTIME);
        const int rc =
            report(hmsr_eval(model.m, ev_split.c_str(), ev_scale, ev_border, ev_out.c_str()));
        if (rc == HMSR_OK) std::printf("report written to %s\n", ev_out.c_str());
        return rc;
    }

    if (infer->parsed()) {
        ModelHandle model(in_checkpoint);
        if (!model.m) return report(HMSR_ERR_RUNTIME);
        const int rc = report(hmsr_infer(model.m, in_image.c_str(), in_out.c_str()));
        if (rc == HMSR_OK) std::printf("wrote %s (x%d)\n", in_out.c_str(), hmsr_model_scale(model.m));
        return rc;
    }

    if (viz->parsed()) {
        ModelHandle model(vz_checkpoint);
        if (!model.m) return report(HMSR_ERR_RUNTIME);
        const int rc = report(hmsr_viz_routing(model.m, vz_image.c_str(), vz_out.c_str()));
        if (rc == HMSR_OK) std::printf("routing maps written to %s\n", vz_out.c_str());
        return rc;
    }
    return HMSR_ERR_CONFIG;
}
