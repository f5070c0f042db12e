// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "tubesal/dataset.hpp"

namespace tubesal::data {

enum class ObjectShape { Disk, Square };

/// Configuration of one synthetic saliency-shift video. The salient object
/// identity advances at every entry of shift_times; exactly one object is
/// salient per frame.
struct SyntheticConfig {
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t num_frames = 100;
    std::size_t num_objects = 2;               // 1..3
    std::vector<ObjectShape> shapes = {ObjectShape::Disk, ObjectShape::Square};
    double object_size = 9.0;                  // disk radius / square half-side, pixels
    double velocity = 1.0;                     // speed, pixels/frame
    std::vector<std::size_t> shift_times = {50};
    double camera_drift = 0.25;                // background translation, pixels/frame
    double noise_level = 0.1;                  // background texture amplitude
    std::uint64_t seed = 1;

    void validate() const;
};

struct ObjectState {
    ObjectShape shape = ObjectShape::Disk;
    double cx = 0.0, cy = 0.0;  // center, pixel units
    double size = 0.0;
};

struct FrameState {
    std::size_t salient_id = 0;
    std::vector<ObjectState> objects;
};

/// Generated video plus the exact geometry it was rasterized from, so tests
/// can re-rasterize independently.
struct SyntheticVideo {
    Video video;
    std::vector<FrameState> states;  // one per frame
};

/// Deterministic given cfg.seed: same config produces bitwise-identical
/// frames, masks and states.
SyntheticVideo generate_synthetic(const SyntheticConfig& cfg);

/// Fills (1,h,w) mask values for one object: 1 inside the region, 0 outside.
/// Pixels are tested at integer centers.
void rasterize_object(const ObjectState& obj, std::size_t h, std::size_t w,
                      std::span<float> mask_out);

}  // namespace tubesal::data
