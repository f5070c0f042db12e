// SPDX-License-Identifier: Apache-2.0
#include "tubesal/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "tubesal/image.hpp"

namespace tubesal::data {

namespace fs = std::filesystem;

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "Easy";
        case Difficulty::Normal: return "Normal";
        case Difficulty::Difficult: return "Difficult";
        case Difficulty::Synthetic: return "Synthetic";
    }
    return "Unknown";
}

Difficulty difficulty_from_string(const std::string& s) {
    if (s == "Easy") return Difficulty::Easy;
    if (s == "Normal") return Difficulty::Normal;
    if (s == "Difficult") return Difficulty::Difficult;
    if (s == "Synthetic") return Difficulty::Synthetic;
    throw ConfigError("unknown difficulty subset \"" + s +
                      "\" (expected Easy, Normal, Difficult or Synthetic)");
}

namespace {

std::string frame_name(std::size_t index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05zu%s", index, ext);
    return buf;
}

Tensor<float> load_resized(const fs::path& path, std::size_t h, std::size_t w) {
    auto img = image::read_image(path);
    if (img.shape()[1] != h || img.shape()[2] != w) img = image::resize_bilinear(img, h, w);
    return img;
}

}  // namespace

Dataset load_dataset(const fs::path& root, const std::vector<std::string>& subsets,
                     std::size_t height, std::size_t width) {
    if (!fs::is_directory(root)) throw IoError("load_dataset: not a directory: " + root.string());
    Dataset ds;
    for (const auto& subset : subsets) {
        const Difficulty diff = difficulty_from_string(subset);
        const fs::path subset_dir = root / subset;
        if (!fs::is_directory(subset_dir))
            throw IoError("load_dataset: missing subset directory " + subset_dir.string());
        std::vector<fs::path> video_dirs;
        for (const auto& entry : fs::directory_iterator(subset_dir))
            if (entry.is_directory()) video_dirs.push_back(entry.path());
        std::sort(video_dirs.begin(), video_dirs.end());
        for (const auto& vd : video_dirs) {
            Video video;
            video.id = vd.filename().string();
            video.difficulty = diff;
            // collect frame files sorted by index
            std::map<std::size_t, fs::path> frame_files;
            const fs::path frames_dir = vd / "frames";
            if (!fs::is_directory(frames_dir))
                throw IoError("load_dataset: missing " + frames_dir.string());
            for (const auto& f : fs::directory_iterator(frames_dir)) {
                if (!f.is_regular_file()) continue;
                const std::string stem = f.path().stem().string();
                frame_files[std::size_t(std::stoul(stem))] = f.path();
            }
            for (const auto& [idx, path] : frame_files) {
                const fs::path gt_path = vd / "gt" / frame_name(idx, ".pgm");
                if (!fs::exists(gt_path))
                    throw IoError("load_dataset: missing ground truth " + gt_path.string());
                auto frame = load_resized(path, height, width);
                if (frame.shape()[0] != 3)
                    throw DimensionError("load_dataset: frame " + path.string() +
                                         " is not 3-channel");
                auto gt = load_resized(gt_path, height, width);
                if (gt.shape()[0] != 1)
                    throw DimensionError("load_dataset: map " + gt_path.string() +
                                         " is not 1-channel");
                video.frames.push_back(std::move(frame));
                video.gt.push_back(std::move(gt));
            }
            if (video.frames.empty())
                throw IoError("load_dataset: video " + vd.string() + " has no frames");
            ds.videos.push_back(std::move(video));
        }
    }
    return ds;
}

void write_video_tree(const fs::path& dir, const Video& video) {
    fs::create_directories(dir / "frames");
    fs::create_directories(dir / "gt");
    for (std::size_t i = 0; i < video.num_frames(); ++i) {
        image::write_image(dir / "frames" / frame_name(i, ".ppm"), video.frames[i]);
        image::write_image(dir / "gt" / frame_name(i, ".pgm"), video.gt[i]);
    }
}

ClipSample<float> sample_clip(const Video& video, std::size_t t_last, std::size_t d_f,
                              std::size_t stride) {
    if (d_f == 0) throw DomainError("sample_clip: d_f must be >= 1");
    if (t_last >= video.num_frames())
        throw RangeError("sample_clip: t_last " + std::to_string(t_last) + " beyond video \"" +
                         video.id + "\" with " + std::to_string(video.num_frames()) + " frames");
    const long first = long(t_last) - long(d_f - 1) * long(stride);
    if (first < 0)
        throw RangeError("sample_clip: insufficient history: t_last=" + std::to_string(t_last) +
                         ", d_f=" + std::to_string(d_f) + ", stride=" + std::to_string(stride));

    const auto& shape0 = video.frames[0].shape();
    const std::size_t h = shape0[1], w = shape0[2];
    ClipSample<float> clip;
    clip.video_id = video.id;
    clip.difficulty = video.difficulty;
    clip.frames = Tensor<float>{Shape{d_f, 3, h, w}};
    clip.prior_maps = Tensor<float>{Shape{d_f, 1, h, w}};
    auto fv = clip.frames.values();
    auto pv = clip.prior_maps.values();
    const std::size_t frame_sz = 3 * h * w;
    const std::size_t map_sz = h * w;
    for (std::size_t i = 0; i < d_f; ++i) {
        const long idx = long(t_last) - long(d_f - 1 - i) * long(stride);
        clip.frame_indices.push_back(idx);
        auto src = video.frames[std::size_t(idx)].values();
        std::copy(src.begin(), src.end(), fv.begin() + long(i * frame_sz));
        const long prior_idx = idx - long(stride);
        if (prior_idx >= 0) {
            auto ps = video.gt[std::size_t(prior_idx)].values();
            std::copy(ps.begin(), ps.end(), pv.begin() + long(i * map_sz));
        }  // else: no predecessor exists yet; prior stays all-zero
    }
    clip.target_map = video.gt[t_last].clone();
    return clip;
}

template <typename T>
Tensor<T> frame_dropout(const Tensor<T>& prior_maps, double p_drop, std::uint64_t seed) {
    if (!(p_drop >= 0.0 && p_drop <= 1.0))
        throw DomainError("frame_dropout: p_drop " + std::to_string(p_drop) + " outside [0,1]");
    if (prior_maps.ndim() != 4)
        throw DimensionError("frame_dropout: expected (d,1,h,w), got " +
                             shape_str(prior_maps.shape()));
    Tensor<T> out = prior_maps.clone();
    const std::size_t d = out.shape()[0];
    const std::size_t map_sz = out.numel() / d;
    Rng rng(seed);
    auto ov = out.values();
    for (std::size_t i = 0; i < d; ++i)
        if (rng.uniform() < p_drop)
            std::fill(ov.begin() + long(i * map_sz), ov.begin() + long((i + 1) * map_sz), T(0));
    return out;
}

std::size_t sample_variable_depth(std::size_t d_f, std::size_t d_t, bool enabled, Rng& rng) {
    if (d_t == 0 || d_f % d_t != 0)
        throw ConfigError("sample_variable_depth: d_t=" + std::to_string(d_t) +
                          " does not divide d_f=" + std::to_string(d_f));
    if (!enabled) return d_f;
    const std::size_t kmax = d_f / d_t;
    return (1 + rng.uniform_int(kmax)) * d_t;
}

template <typename T>
ClipSample<T> truncate_clip(const ClipSample<T>& clip, std::size_t d_prime) {
    const std::size_t d = clip.frames.shape()[0];
    if (d_prime == 0 || d_prime > d)
        throw RangeError("truncate_clip: d'=" + std::to_string(d_prime) + " outside [1, " +
                         std::to_string(d) + "]");
    if (d_prime == d) return clip;
    ClipSample<T> out;
    out.video_id = clip.video_id;
    out.difficulty = clip.difficulty;
    out.target_map = clip.target_map;
    const std::size_t skip = d - d_prime;
    out.frame_indices.assign(clip.frame_indices.begin() + long(skip), clip.frame_indices.end());
    const std::size_t frame_sz = clip.frames.numel() / d;
    const std::size_t map_sz = clip.prior_maps.numel() / d;
    Shape fshape = clip.frames.shape();
    fshape[0] = d_prime;
    Shape pshape = clip.prior_maps.shape();
    pshape[0] = d_prime;
    out.frames = Tensor<T>{std::move(fshape)};
    out.prior_maps = Tensor<T>{std::move(pshape)};
    auto fsrc = clip.frames.values();
    auto psrc = clip.prior_maps.values();
    std::copy(fsrc.begin() + long(skip * frame_sz), fsrc.end(), out.frames.values().begin());
    std::copy(psrc.begin() + long(skip * map_sz), psrc.end(), out.prior_maps.values().begin());
    return out;
}

std::vector<ClipRef> enumerate_positions(const Dataset& ds, std::size_t d_f, std::size_t stride,
                                         std::size_t min_t_last, std::size_t max_t_last) {
    std::vector<ClipRef> refs;
    const std::size_t lead = (d_f - 1) * stride;
    for (std::size_t v = 0; v < ds.videos.size(); ++v) {
        const std::size_t n = ds.videos[v].num_frames();
        if (n == 0) continue;
        for (std::size_t t = std::max(lead, min_t_last); t < n && t <= max_t_last; ++t)
            refs.push_back({v, t});
    }
    return refs;
}

template struct ClipSample<float>;
template struct ClipSample<double>;
template Tensor<float> frame_dropout<float>(const Tensor<float>&, double, std::uint64_t);
template Tensor<double> frame_dropout<double>(const Tensor<double>&, double, std::uint64_t);
template ClipSample<float> truncate_clip<float>(const ClipSample<float>&, std::size_t);
template ClipSample<double> truncate_clip<double>(const ClipSample<double>&, std::size_t);

}  // namespace tubesal::data
