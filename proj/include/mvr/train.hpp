#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvr/fusion.hpp"
#include "mvr/loss.hpp"
#include "mvr/nn/model.hpp"
#include "mvr/optim.hpp"

// Student distillation: per step, sample a batch of training clouds, run the
// student over each cached teacher view, fuse both towers' features onto the
// points, apply the hard-mining global cosine loss, and take one optimizer
// step. The teacher is frozen throughout.

namespace mvr {

struct TrainConfig {
    int iterations = 300;
    int batch_size = 2;        // clouds per step
    int checkpoint_every = 0;  // steps between snapshots; 0 = final only
    std::uint64_t seed = 0;
    std::string log_path;        // per-step CSV (step,loss,lr,wall_ms); "" = none
    std::string checkpoint_dir;  // "" = no snapshots, final archive only returned

    void validate() const {
        if (iterations < 0) throw ConfigError("training: iterations must be >= 0");
        if (batch_size < 1) throw ConfigError("training: batch size must be >= 1");
        if (checkpoint_every < 0) throw ConfigError("training: checkpoint interval must be >= 0");
    }
};

// Inputs for one training cloud: the frozen teacher's aggregated token grid
// for every view, plus the z-buffer winners of the renders that produced
// them (pixel coordinates at render resolution).
struct CloudTrainData {
    int n_points = 0;
    std::vector<MatXf> teacher_tokens;
    std::vector<CorrespondenceSet> correspondences;
};

struct TrainResult {
    WeightArchive checkpoint;  // teacher tensors untouched, student trained
    std::vector<double> step_losses;
};

// `init` must hold the full checkpoint schema (teacher.* and student.*).
TrainResult train_student(const WeightArchive& init, const EncoderConfig& enc,
                          int render_resolution, const LossConfig& loss_cfg,
                          const OptimizerConfig& opt_cfg, const TrainConfig& train_cfg,
                          const std::vector<CloudTrainData>& clouds);

// Fixed optimizer traversal order (the checkpoint schema order).
std::vector<TensorView> student_tensor_views(StudentParams<float>& params);

}  // namespace mvr
