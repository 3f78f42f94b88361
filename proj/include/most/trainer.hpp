#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "most/encoder.hpp"
#include "most/losses.hpp"

namespace most {

enum class Objective { Contrastive, Mse, MseContrastive };

std::string to_string(Objective o);
Objective objective_from_string(const std::string& s);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.0;
};

struct TrainConfig {
    size_t epochs = 20;
    size_t batch_size = 8;
    AdamConfig adam;
    uint64_t seed = 1;
    LossWeights loss;
    Objective objective = Objective::Contrastive;
    size_t horizon = 0;           // T_f, required for the mse objectives
    size_t min_overlap = 0;       // 0 -> max(1, w/8)
    size_t checkpoint_every = 0;  // epochs between snapshots; 0 = final only
    std::string checkpoint_dir;   // empty = keep the model in memory only
};

struct EpochStats {
    double total = 0, instance = 0, mode1 = 0, mode2 = 0;
    double seconds = 0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::string final_checkpoint;
};

/// Adam over a fixed parameter set. weight_decay adds an L2 pull to the
/// gradient, so a zero-gradient step still moves parameters when it is on.
class Adam {
public:
    Adam(std::vector<Param*> params, AdamConfig cfg);
    void step();

private:
    std::vector<Param*> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    uint64_t t_ = 0;
};

/// Self-supervised (or, for the mse objectives, supervised) optimization of
/// the encoder. One crop pair is drawn per batch step, shared by the batch
/// so the overlap length is common; every window sees a fresh crop each
/// epoch. Identical (seed, config, data) reproduce the trajectory exactly.
TrainReport train(MostModel& model, const std::vector<TtsWindow>& windows, const TrainConfig& cfg);

void write_train_report_csv(const std::string& path, const TrainReport& report);

}  // namespace most
