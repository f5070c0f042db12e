// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "tubesal/dataset.hpp"
#include "tubesal/metrics.hpp"
#include "tubesal/model.hpp"
#include "tubesal/optim.hpp"

namespace tubesal::train {

enum class EvalMode { GtPrior, Recursive };

std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 2;
    double lr_max = 1e-5;
    double lr_min = 1e-7;
    std::size_t horizon = 10000;
    double p_drop = 0.6;
    bool variable_depth = false;
    std::uint64_t seed = 1;
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
    EvalMode eval_mode = EvalMode::GtPrior;
    // harness knobs for iteration-bounded runs and temporal train/eval splits
    std::size_t max_iterations = 0;  // 0: run all epochs
    std::size_t t_last_min = 0;
    std::size_t t_last_max = SIZE_MAX;
    std::filesystem::path log_path;  // empty: no per-iteration log file

    void validate() const;
};

/// BCE on the last output frame only (fused logit form); earlier maps carry
/// no loss.
template <typename T>
Tensor<T> loss_last_frame(const Tensor<T>& logits, const Tensor<T>& target);

struct TrainResult {
    std::vector<double> loss_trace;  // one entry per optimizer step
    std::vector<double> lr_trace;
    std::size_t iterations = 0;
    std::filesystem::path checkpoint;  // final checkpoint, if written
};

/// Deterministic single-threaded training: sample batch -> frame dropout on
/// priors -> optional variable depth -> forward -> last-frame BCE ->
/// backward -> Adam with the cosine schedule. Aborts on non-finite loss.
TrainResult train(model::Model<float>& m, const data::Dataset& dataset, const TrainConfig& cfg);

struct EvalOptions {
    std::size_t t_last_min = 0;
    std::size_t t_last_max = SIZE_MAX;
};

/// Evaluates every stride-spaced position per video. GtPrior feeds ground
/// truth priors; Recursive feeds the model's own past last-frame
/// predictions (ground truth only where no prediction exists yet).
/// Resampled ground truth is binarized at 0.5 for the metrics.
metrics::MetricReport evaluate_dataset(const model::Model<float>& m, const data::Dataset& dataset,
                                       EvalMode mode, const EvalOptions& opts = {});

/// Recursive roll-out over one video: predicts the last-frame map at every
/// stride-spaced position, feeding past predictions back as priors. Returns
/// (t_last, predicted (1,H,W) map) pairs in ascending order.
std::vector<std::pair<std::size_t, Tensor<float>>> recursive_infer(const model::Model<float>& m,
                                                                   const data::Video& video);

extern template Tensor<float> loss_last_frame<float>(const Tensor<float>&, const Tensor<float>&);
extern template Tensor<double> loss_last_frame<double>(const Tensor<double>&,
                                                       const Tensor<double>&);

}  // namespace tubesal::train
