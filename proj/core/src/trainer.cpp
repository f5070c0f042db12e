// SPDX-License-Identifier: Apache-2.0
#include "tubesal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "tubesal/checkpoint.hpp"
#include "tubesal/ops.hpp"

namespace tubesal::train {

std::string to_string(EvalMode m) {
    return m == EvalMode::GtPrior ? "gt_prior" : "recursive";
}

EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "gt_prior") return EvalMode::GtPrior;
    if (s == "recursive") return EvalMode::Recursive;
    throw ConfigError("unknown eval mode \"" + s + "\" (expected gt_prior or recursive)");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr_max > 0.0) || !(lr_min > 0.0) || lr_min > lr_max)
        throw ConfigError("train: need 0 < lr_min <= lr_max");
    if (horizon == 0) throw ConfigError("train: horizon must be >= 1");
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw ConfigError("train: p_drop outside [0,1]");
}

template <typename T>
Tensor<T> loss_last_frame(const Tensor<T>& logits, const Tensor<T>& target) {
    if (logits.ndim() != 4 || logits.shape()[1] != 1)
        throw DimensionError("loss_last_frame: logits must be (d,1,H,W), got " +
                             shape_str(logits.shape()));
    if (target.ndim() != 3 || target.shape()[0] != 1 ||
        target.shape()[1] != logits.shape()[2] || target.shape()[2] != logits.shape()[3])
        throw DimensionError("loss_last_frame: target " + shape_str(target.shape()) +
                             " does not match logits " + shape_str(logits.shape()));
    const std::size_t d = logits.shape()[0];
    auto last = ops::reshape(ops::slice(logits, 0, d - 1, 1),
                             {std::size_t(1), logits.shape()[2], logits.shape()[3]});
    return ops::sigmoid_bce(last, target);
}

namespace {

// seed-derivation tags for the independent random streams
constexpr std::uint64_t kShuffleTag = 0x5A0FF1E;
constexpr std::uint64_t kDropoutTag = 0xD20F0;
constexpr std::uint64_t kDepthTag = 0xDE971;

std::ofstream open_log(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("train: cannot open log file " + path.string());
    out << "# iteration lr loss\n";
    return out;
}

}  // namespace

TrainResult train(model::Model<float>& m, const data::Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw Error("train: dataset is empty");
    const auto& mc = m.config();
    auto positions =
        data::enumerate_positions(dataset, mc.d_f, mc.stride, cfg.t_last_min, cfg.t_last_max);
    if (positions.empty())
        throw RangeError("train: no valid clip positions for d_f=" + std::to_string(mc.d_f) +
                         ", stride=" + std::to_string(mc.stride));

    auto params = m.parameters();
    Adam<float> opt(params);
    CosineSchedule sched{cfg.lr_max, cfg.lr_min, cfg.horizon};

    std::ofstream log;
    if (!cfg.log_path.empty()) log = open_log(cfg.log_path);

    TrainResult result;
    std::size_t iteration = 0;
    bool done = false;
    const bool want_ckpt = !cfg.checkpoint_dir.empty();
    const std::filesystem::path ckpt_path = cfg.checkpoint_dir / "checkpoint.tsal";
    if (want_ckpt) std::filesystem::create_directories(cfg.checkpoint_dir);

    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        // per-epoch shuffle fixed by (seed, epoch)
        auto order = positions;
        Rng shuffle_rng(mix_seed({cfg.seed, kShuffleTag, epoch}));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        for (std::size_t start = 0; start < order.size() && !done; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            const double lr = cosine_lr(opt.state().step, sched);

            Tape<float> tape;
            Tensor<float> total;
            double loss_value = 0.0;
            {
                Tape<float>::Scope scope(tape);
                for (std::size_t j = 0; j < count; ++j) {
                    const auto ref = order[start + j];
                    auto clip =
                        data::sample_clip(dataset.videos[ref.video], ref.t_last, mc.d_f, mc.stride);
                    clip.prior_maps = data::frame_dropout(
                        clip.prior_maps, cfg.p_drop,
                        mix_seed({cfg.seed, kDropoutTag, epoch, start + j}));
                    if (cfg.variable_depth) {
                        Rng vd_rng(mix_seed({cfg.seed, kDepthTag, epoch, start + j}));
                        const std::size_t dp =
                            data::sample_variable_depth(mc.d_f, mc.d_t, true, vd_rng);
                        clip = data::truncate_clip(clip, dp);
                    }
                    auto fwd = m.forward(clip);
                    auto li = loss_last_frame(fwd.logits, clip.target_map);
                    total = total.defined() ? ops::add(total, li) : li;
                }
                if (count > 1) total = ops::scale(total, 1.0f / float(count));
                loss_value = double(total.item());
                if (!std::isfinite(loss_value))
                    throw Error("train: non-finite loss at iteration " + std::to_string(iteration) +
                                " (epoch " + std::to_string(epoch) + ", lr " + std::to_string(lr) +
                                ")");
                tape.backward(total);
            }
            opt.step(float(lr));
            opt.zero_grad();

            result.loss_trace.push_back(loss_value);
            result.lr_trace.push_back(lr);
            if (log) {
                char line[96];
                std::snprintf(line, sizeof(line), "%zu %.17g %.17g\n", iteration, lr, loss_value);
                log << line;
            }
            ++iteration;
            if (cfg.max_iterations > 0 && iteration >= cfg.max_iterations) done = true;
        }
        if (want_ckpt) {
            ckpt::save_checkpoint(ckpt_path, params, opt.state());
            result.checkpoint = ckpt_path;
        }
    }
    if (want_ckpt) {
        ckpt::save_checkpoint(ckpt_path, params, opt.state());
        result.checkpoint = ckpt_path;
    }
    result.iterations = iteration;
    return result;
}

namespace {

metrics::Map binary_gt(const Tensor<float>& t) {
    auto m = metrics::to_map(t);
    return metrics::is_binary(m) ? m : metrics::binarize(m);
}

// last-frame probability map of a forward pass as a (1,H,W) tensor
Tensor<float> last_frame_probs(const model::ForwardResult<float>& fwd) {
    const auto& s = fwd.probs.shape();
    Tensor<float> out{Shape{1, s[2], s[3]}};
    auto src = fwd.probs.values();
    auto dst = out.values();
    const std::size_t map_sz = s[2] * s[3];
    std::copy(src.end() - long(map_sz), src.end(), dst.begin());
    return out;
}

}  // namespace

std::vector<std::pair<std::size_t, Tensor<float>>> recursive_infer(const model::Model<float>& m,
                                                                   const data::Video& video) {
    const auto& mc = m.config();
    const std::size_t lead = (mc.d_f - 1) * mc.stride;
    std::vector<std::pair<std::size_t, Tensor<float>>> out;
    if (video.num_frames() <= lead) return out;

    std::map<long, Tensor<float>> predicted;  // by absolute frame index
    const std::size_t map_sz = mc.input_height * mc.input_width;
    for (std::size_t t_last = lead; t_last < video.num_frames(); t_last += mc.stride) {
        auto clip = data::sample_clip(video, t_last, mc.d_f, mc.stride);
        // splice past predictions over the ground-truth priors where available
        auto pv = clip.prior_maps.values();
        for (std::size_t i = 0; i < clip.frame_indices.size(); ++i) {
            const long prior_idx = clip.frame_indices[i] - long(mc.stride);
            auto it = predicted.find(prior_idx);
            if (it == predicted.end()) continue;
            auto src = it->second.values();
            std::copy(src.begin(), src.end(), pv.begin() + long(i * map_sz));
        }
        auto pred = last_frame_probs(m.forward(clip));
        predicted[long(t_last)] = pred;
        out.push_back({t_last, std::move(pred)});
    }
    return out;
}

metrics::MetricReport evaluate_dataset(const model::Model<float>& m, const data::Dataset& dataset,
                                       EvalMode mode, const EvalOptions& opts) {
    if (dataset.empty()) throw Error("evaluate_dataset: dataset is empty");
    const auto& mc = m.config();
    const std::size_t lead = (mc.d_f - 1) * mc.stride;

    std::vector<metrics::LabeledPair> pairs;
    for (const auto& video : dataset.videos) {
        if (video.num_frames() <= lead) continue;
        const std::string subset = data::to_string(video.difficulty);
        if (mode == EvalMode::Recursive) {
            for (auto& [t_last, pred] : recursive_infer(m, video)) {
                if (t_last < opts.t_last_min || t_last > opts.t_last_max) continue;
                pairs.push_back({metrics::to_map(pred), binary_gt(video.gt[t_last]), subset});
            }
        } else {
            for (std::size_t t_last = lead; t_last < video.num_frames(); t_last += mc.stride) {
                if (t_last < opts.t_last_min || t_last > opts.t_last_max) continue;
                auto clip = data::sample_clip(video, t_last, mc.d_f, mc.stride);
                auto pred = last_frame_probs(m.forward(clip));
                pairs.push_back({metrics::to_map(pred), binary_gt(clip.target_map), subset});
            }
        }
    }
    if (pairs.empty()) throw RangeError("evaluate_dataset: no clips inside the evaluation window");
    return metrics::evaluate_report(pairs);
}

template Tensor<float> loss_last_frame<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> loss_last_frame<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace tubesal::train
