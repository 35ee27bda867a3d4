#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "model.hpp"
#include "optimizer.hpp"

namespace hmsr {

struct StepStats {
    double loss = 0.0;      // reconstruction + weighted balance term
    double lr = 0.0;
    std::vector<int64_t> usage;  // pixels per global expert id, this step
};

struct EvalPoint {
    int64_t iteration = 0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct FitResult {
    double best_psnr = -1.0;
    int64_t best_iteration = -1;
    std::vector<EvalPoint> evals;
    std::string best_checkpoint;
    std::string latest_checkpoint;
};

// One training stream: model + optimizer + iteration counter. Batches are
// sampled statelessly from (seed, iteration, slot), so a run resumed from a
// checkpoint at step t sees exactly the batches the uninterrupted run saw.
class Trainer {
public:
    // Fresh model, weights initialized from train.seed.
    explicit Trainer(const ExperimentConfig& cfg);

    // Continue from a checkpoint (weights, Adam moments, iteration).
    Trainer(const ExperimentConfig& cfg, LoadedCheckpoint&& ckpt);

    void set_data(std::vector<std::string> train_paths, std::vector<std::string> test_paths);

    // Loads manifests / builds the split according to cfg.data.
    void load_data_from_config();

    StepStats train_step(int64_t iter);

    // Runs from the current iteration to cfg.train.iterations, evaluating
    // every eval_every and checkpointing every checkpoint_every. Writes
    // config_resolved.json and log.jsonl into out_dir. on_step (if set) is
    // called after every iteration.
    FitResult fit(const std::string& out_dir,
                  const std::function<void(int64_t, const StepStats&)>& on_step = {});

    SrModel<float>& model() { return *model_; }
    const ExperimentConfig& config() const { return cfg_; }
    int64_t iteration() const { return state_.iteration; }
    const std::vector<std::string>& train_paths() const { return train_paths_; }
    const std::vector<std::string>& test_paths() const { return test_paths_; }

    void save(const std::string& path) { save_checkpoint(path, cfg_, *model_, opt_.get(), state_); }

private:
    ExperimentConfig cfg_;
    std::unique_ptr<SrModel<float>> model_;
    std::unique_ptr<Adam<float>> opt_;
    TrainState state_;
    std::vector<std::string> train_paths_, test_paths_;
    ImageCache cache_;
    LrSchedule sched_;
};

// Shannon entropy (nats) of the normalized usage histogram.
double usage_entropy(const std::vector<int64_t>& usage);

}  // namespace hmsr
