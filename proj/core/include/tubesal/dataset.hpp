// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tubesal/tensor.hpp"

namespace tubesal::data {

enum class Difficulty { Easy, Normal, Difficult, Synthetic };

std::string to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

/// One training/eval item: frames paired with the prior saliency maps that
/// precede them by one stride step, plus the target map at the last frame.
template <typename T>
struct ClipSample {
    Tensor<T> frames;      // (d, 3, H, W) in [0,1]
    Tensor<T> prior_maps;  // (d, 1, H, W) in [0,1]
    Tensor<T> target_map;  // (1, H, W) in [0,1]
    std::string video_id;
    std::vector<long> frame_indices;  // absolute, strictly increasing, constant stride
    Difficulty difficulty = Difficulty::Synthetic;

    template <typename U>
    ClipSample<U> cast() const {
        ClipSample<U> out;
        out.frames = frames.template cast<U>();
        out.prior_maps = prior_maps.template cast<U>();
        out.target_map = target_map.template cast<U>();
        out.video_id = video_id;
        out.frame_indices = frame_indices;
        out.difficulty = difficulty;
        return out;
    }
};

struct Video {
    std::string id;
    Difficulty difficulty = Difficulty::Synthetic;
    std::vector<Tensor<float>> frames;  // each (3, H, W)
    std::vector<Tensor<float>> gt;      // each (1, H, W)

    std::size_t num_frames() const { return frames.size(); }
};

struct Dataset {
    std::vector<Video> videos;

    bool empty() const { return videos.empty(); }
};

/// Loads a DAVSOD-like tree: <root>/<subset>/<video>/frames/NNNNN.ppm and
/// <root>/<subset>/<video>/gt/NNNNN.pgm (5-digit zero-padded indices). The
/// subset directory name is the difficulty label. Frames and maps are
/// resized to (height, width) when they differ.
Dataset load_dataset(const std::filesystem::path& root, const std::vector<std::string>& subsets,
                     std::size_t height, std::size_t width);

/// Writes one video in the same layout under <dir>/frames and <dir>/gt.
void write_video_tree(const std::filesystem::path& dir, const Video& video);

/// Clip at frame indices { t_last - (d_f-1-i)*stride : i in [0, d_f) } with
/// ground-truth priors taken one stride step before each frame (all-zero map
/// where that index falls before the video start). Target is the ground
/// truth at t_last.
ClipSample<float> sample_clip(const Video& video, std::size_t t_last, std::size_t d_f,
                              std::size_t stride);

/// Each prior map is independently replaced by an all-zero map with
/// probability p_drop; deterministic given seed.
template <typename T>
Tensor<T> frame_dropout(const Tensor<T>& prior_maps, double p_drop, std::uint64_t seed);

/// Effective frame depth d' = k*d_t with k uniform over {1, .., d_f/d_t}
/// when enabled, else d_f.
std::size_t sample_variable_depth(std::size_t d_f, std::size_t d_t, bool enabled, Rng& rng);

/// Keeps the most recent d' frames (and matching priors/indices) of a clip.
template <typename T>
ClipSample<T> truncate_clip(const ClipSample<T>& clip, std::size_t d_prime);

struct ClipRef {
    std::size_t video = 0;
    std::size_t t_last = 0;
};

/// All (video, t_last) positions with full history, t_last in
/// [max(min_t_last, (d_f-1)*stride), min(max_t_last, num_frames-1)].
std::vector<ClipRef> enumerate_positions(const Dataset& ds, std::size_t d_f, std::size_t stride,
                                         std::size_t min_t_last = 0,
                                         std::size_t max_t_last = SIZE_MAX);

extern template struct ClipSample<float>;
extern template struct ClipSample<double>;
extern template Tensor<float> frame_dropout<float>(const Tensor<float>&, double, std::uint64_t);
extern template Tensor<double> frame_dropout<double>(const Tensor<double>&, double, std::uint64_t);
extern template ClipSample<float> truncate_clip<float>(const ClipSample<float>&, std::size_t);
extern template ClipSample<double> truncate_clip<double>(const ClipSample<double>&, std::size_t);

}  // namespace tubesal::data
