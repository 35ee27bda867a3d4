#include "train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "errors.hpp"
#include "metrics.hpp"

namespace fs = std::filesystem;

namespace hmsr {

double usage_entropy(const std::vector<int64_t>& usage) {
    int64_t total = 0;
    for (auto c : usage) total += c;
    if (total == 0) return 0.0;
    double h = 0.0;
    for (auto c : usage) {
        if (c == 0) continue;
        const double q = static_cast<double>(c) / static_cast<double>(total);
        h -= q * std::log(q);
    }
    return h;
}

Trainer::Trainer(const ExperimentConfig& cfg)
    : cfg_(cfg), cache_(static_cast<size_t>(std::max(0, cfg.data.cache_images))) {
    model_ = std::make_unique<SrModel<float>>(cfg_);
    Rng init_rng(mix_seed(cfg_.train.seed, 0));
    model_->init_weights(init_rng);
    opt_ = std::make_unique<Adam<float>>(model_->params());
    state_.rng = Rng(mix_seed(cfg_.train.seed, 1));
    sched_ = lr_schedule_from_string(cfg_.train.lr_schedule);
}

Trainer::Trainer(const ExperimentConfig& cfg, LoadedCheckpoint&& ckpt)
    : cfg_(cfg), cache_(static_cast<size_t>(std::max(0, cfg.data.cache_images))) {
    model_ = std::move(ckpt.model);
    if (ckpt.opt) {
        opt_ = std::move(ckpt.opt);
    } else {
        opt_ = std::make_unique<Adam<float>>(model_->params());
    }
    state_ = ckpt.state;
    sched_ = lr_schedule_from_string(cfg_.train.lr_schedule);
}

void Trainer::set_data(std::vector<std::string> train_paths, std::vector<std::string> test_paths) {
    train_paths_ = std::move(train_paths);
    test_paths_ = std::move(test_paths);
}

void Trainer::load_data_from_config() {
    if (!cfg_.data.train_manifest.empty()) {
        train_paths_ = read_manifest(cfg_.data.train_manifest);
        if (!cfg_.data.test_manifest.empty()) test_paths_ = read_manifest(cfg_.data.test_manifest);
    } else if (!cfg_.data.root.empty()) {
        DatasetSplit split =
            build_split(cfg_.data.root, parse_ratio(cfg_.data.split_ratio), cfg_.data.split_seed);
        train_paths_ = std::move(split.train_paths);
        test_paths_ = std::move(split.test_paths);
    } else {
        throw ConfigError("config: either data.train_manifest or data.root is required for training");
    }
    if (train_paths_.empty()) throw ConfigError("training set is empty");
}

StepStats Trainer::train_step(int64_t iter) {
    const int batch = cfg_.train.batch_size;
    const int scale = cfg_.moe.scale;
    StepStats stats;
    stats.lr = scheduled_lr(cfg_.train.lr, sched_, iter, cfg_.train.iterations);
    model_->zero_grads();

    double loss_sum = 0.0, aux_sum = 0.0;
    const float inv_batch = 1.0f / static_cast<float>(batch);
    for (int slot = 0; slot < batch; ++slot) {
        Rng rng(mix_seed(cfg_.train.seed, static_cast<uint64_t>(iter), static_cast<uint64_t>(slot)));
        const size_t img_idx = rng.uniform_int(train_paths_.size());
        const Image& hr_img = cache_.get(train_paths_[img_idx]);
        PatchPair pair = sample_patch(hr_img, scale, cfg_.data.patch_size, rng, cfg_.data.augment);

        typename SrModel<float>::Cache cache;
        RoutingDecision<float> decision;
        Tensor<float> lr_chw = image_to_chw(pair.lr);
        Tensor<float> hr_chw = image_to_chw(pair.hr);
        Tensor<float> sr = model_->forward(lr_chw, &cache, &decision);
        const double sample_loss = l1_loss(sr, hr_chw);
        loss_sum += sample_loss;
        aux_sum += cache.head.aux_loss;

        Tensor<float> d_out = l1_loss_backward(sr, hr_chw);
        for (auto& g : d_out.v) g *= inv_batch;
        model_->backward(d_out, cache, cfg_.moe.balance_coeff * inv_batch);

        auto usage = usage_histogram(decision);
        if (stats.usage.empty()) stats.usage.assign(usage.size(), 0);
        for (size_t i = 0; i < usage.size(); ++i) stats.usage[i] += usage[i];
    }
    stats.loss = loss_sum / batch + cfg_.moe.balance_coeff * (aux_sum / batch);

    if (!std::isfinite(stats.loss)) {
        double grad_norm = 0.0;
        for (auto* p : model_->params())
            for (float g : p->grad.v) grad_norm += static_cast<double>(g) * g;
        std::fprintf(stderr,
                     "fatal: non-finite loss at iteration %lld (lr %.3g, grad_norm %.6g)\n",
                     static_cast<long long>(iter), stats.lr, std::sqrt(grad_norm));
        throw std::runtime_error("non-finite training loss at iteration " + std::to_string(iter));
    }
    opt_->step(model_->params(), stats.lr);
    return stats;
}

FitResult Trainer::fit(const std::string& out_dir,
                       const std::function<void(int64_t, const StepStats&)>& on_step) {
    if (train_paths_.empty()) load_data_from_config();
    fs::create_directories(out_dir);
    {
        nlohmann::json snapshot = config_to_json(cfg_);
        snapshot["tool"] = "hmsr";
        snapshot["tool_version"] = kVersion;
        std::ofstream f(out_dir + "/config_resolved.json");
        f << snapshot.dump(2) << "\n";
    }
    std::ofstream log(out_dir + "/log.jsonl", std::ios::app);
    if (!log) throw std::runtime_error("cannot open training log in " + out_dir);

    FitResult result;
    result.best_psnr = state_.best_psnr;
    const int border = cfg_.eval.border >= 0 ? cfg_.eval.border : cfg_.moe.scale;
    const std::string latest = out_dir + "/ckpt_latest.bin";
    const std::string best = out_dir + "/ckpt_best.bin";

    for (int64_t iter = state_.iteration + 1; iter <= cfg_.train.iterations; ++iter) {
        StepStats stats = train_step(iter);
        state_.iteration = iter;
        log << nlohmann::json{{"type", "step"},
                              {"iter", iter},
                              {"loss", stats.loss},
                              {"lr", stats.lr},
                              {"usage_entropy", usage_entropy(stats.usage)}}
                   .dump()
            << "\n";
        if (on_step) on_step(iter, stats);

        if (iter % cfg_.train.eval_every == 0 && !test_paths_.empty()) {
            MetricReport report = evaluate(*model_, test_paths_, cfg_.moe.scale, border,
                                           cfg_.eval.color_space, cfg_.eval.max_images);
            log << nlohmann::json{{"type", "eval"},
                                  {"iter", iter},
                                  {"psnr_db", std::isinf(report.mean_psnr) ? 1e9 : report.mean_psnr},
                                  {"ssim", report.mean_ssim}}
                       .dump()
                << "\n";
            log.flush();
            result.evals.push_back({iter, report.mean_psnr, report.mean_ssim});
            if (report.mean_psnr > state_.best_psnr) {
                state_.best_psnr = report.mean_psnr;
                result.best_psnr = report.mean_psnr;
                result.best_iteration = iter;
                save_checkpoint(best, cfg_, *model_, opt_.get(), state_);
                result.best_checkpoint = best;
            }
        }
        if (iter % cfg_.train.checkpoint_every == 0) {
            save_checkpoint(latest, cfg_, *model_, opt_.get(), state_);
            result.latest_checkpoint = latest;
        }
    }
    save_checkpoint(latest, cfg_, *model_, opt_.get(), state_);
    result.latest_checkpoint = latest;
    if (result.best_checkpoint.empty()) {
        // no eval ran (or no test data): final weights double as "best"
        save_checkpoint(best, cfg_, *model_, opt_.get(), state_);
        result.best_checkpoint = best;
        result.best_iteration = state_.iteration;
    }
    result.best_psnr = state_.best_psnr;
    return result;
}

}  // namespace hmsr
