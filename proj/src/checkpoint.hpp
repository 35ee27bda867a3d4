#pragma once

#include <memory>
#include <string>

#include "config.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "rng.hpp"

namespace hmsr {

struct TrainState {
    int64_t iteration = 0;
    double best_psnr = -1.0;
    Rng rng;
};

// Single-file binary archive: magic + format version, the resolved config
// as JSON, the iteration counter and RNG state, every named parameter as
// raw float32, and (optionally) the Adam moments. Weights round-trip
// bit-exactly.
void save_checkpoint(const std::string& path, const ExperimentConfig& cfg, SrModel<float>& model,
                     const Adam<float>* opt, const TrainState& state);

struct LoadedCheckpoint {
    ExperimentConfig cfg;
    std::unique_ptr<SrModel<float>> model;
    std::unique_ptr<Adam<float>> opt;  // null if the archive has no optimizer state
    TrainState state;
};

// Rejects wrong magic or mismatched format versions with a clear error.
LoadedCheckpoint load_checkpoint(const std::string& path);

// FNV-1a over the file bytes, hex-encoded; embedded into metric reports so
// results are traceable to the exact weights.
std::string file_hash(const std::string& path);

}  // namespace hmsr
