// SPDX-License-Identifier: Apache-2.0
#include "tubesal/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace tubesal::data {

void SyntheticConfig::validate() const {
    if (height == 0 || width == 0) throw ConfigError("synthetic: zero canvas extent");
    if (num_frames == 0) throw ConfigError("synthetic: num_frames must be >= 1");
    if (num_objects < 1 || num_objects > 3)
        throw ConfigError("synthetic: num_objects must be in 1..3, got " +
                          std::to_string(num_objects));
    if (shapes.empty()) throw ConfigError("synthetic: shapes list is empty");
    if (!(object_size > 0.0) || object_size >= double(std::min(height, width)) / 2.0)
        throw ConfigError("synthetic: object_size " + std::to_string(object_size) +
                          " must be positive and below min(H,W)/2");
    for (std::size_t i = 1; i < shift_times.size(); ++i)
        if (shift_times[i] <= shift_times[i - 1])
            throw ConfigError("synthetic: shift_times must be strictly increasing");
    if (!(noise_level >= 0.0) || !(velocity >= 0.0) || !(camera_drift >= 0.0))
        throw ConfigError("synthetic: velocity, camera_drift and noise_level must be >= 0");
}

void rasterize_object(const ObjectState& obj, std::size_t h, std::size_t w,
                      std::span<float> mask_out) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = double(x) - obj.cx;
            const double dy = double(y) - obj.cy;
            bool inside = false;
            if (obj.shape == ObjectShape::Disk)
                inside = dx * dx + dy * dy <= obj.size * obj.size;
            else
                inside = std::abs(dx) <= obj.size && std::abs(dy) <= obj.size;
            mask_out[y * w + x] = inside ? 1.0f : 0.0f;
        }
    }
}

namespace {

struct MovingObject {
    ObjectState state;
    double vx = 0.0, vy = 0.0;
    float color[3] = {0, 0, 0};
};

// Reflecting advance keeping the center at least `margin` from every border.
void advance(MovingObject& obj, double margin, double h, double w) {
    obj.state.cx += obj.vx;
    obj.state.cy += obj.vy;
    const double xmax = w - 1.0 - margin, ymax = h - 1.0 - margin;
    if (obj.state.cx < margin) {
        obj.state.cx = 2.0 * margin - obj.state.cx;
        obj.vx = -obj.vx;
    } else if (obj.state.cx > xmax) {
        obj.state.cx = 2.0 * xmax - obj.state.cx;
        obj.vx = -obj.vx;
    }
    if (obj.state.cy < margin) {
        obj.state.cy = 2.0 * margin - obj.state.cy;
        obj.vy = -obj.vy;
    } else if (obj.state.cy > ymax) {
        obj.state.cy = 2.0 * ymax - obj.state.cy;
        obj.vy = -obj.vy;
    }
}

// Smooth value-noise background: a coarse random lattice per channel,
// bilinearly sampled with a wrap-around drift offset.
struct BackgroundTexture {
    static constexpr std::size_t kCells = 16;
    float lattice[3][kCells * kCells];

    explicit BackgroundTexture(Rng& rng) {
        for (auto& chan : lattice)
            for (auto& v : chan) v = float(rng.uniform());
    }

    float sample(std::size_t chan, double u, double v) const {
        // u, v in lattice units, wrapped
        const double fu = u - std::floor(u / kCells) * kCells;
        const double fv = v - std::floor(v / kCells) * kCells;
        const std::size_t u0 = std::size_t(fu) % kCells, v0 = std::size_t(fv) % kCells;
        const std::size_t u1 = (u0 + 1) % kCells, v1 = (v0 + 1) % kCells;
        const double au = fu - std::floor(fu), av = fv - std::floor(fv);
        const auto at = [&](std::size_t uu, std::size_t vv) {
            return double(lattice[chan][vv * kCells + uu]);
        };
        const double top = at(u0, v0) * (1 - au) + at(u1, v0) * au;
        const double bot = at(u0, v1) * (1 - au) + at(u1, v1) * au;
        return float(top * (1 - av) + bot * av);
    }
};

}  // namespace

SyntheticVideo generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t h = cfg.height, w = cfg.width;
    const double margin = cfg.object_size + 1.0;

    BackgroundTexture texture(rng);
    std::vector<MovingObject> objects(cfg.num_objects);
    for (std::size_t i = 0; i < cfg.num_objects; ++i) {
        auto& o = objects[i];
        o.state.shape = cfg.shapes[i % cfg.shapes.size()];
        o.state.size = cfg.object_size;
        o.state.cx = rng.uniform(margin, double(w) - 1.0 - margin);
        o.state.cy = rng.uniform(margin, double(h) - 1.0 - margin);
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        o.vx = cfg.velocity * std::cos(angle);
        o.vy = cfg.velocity * std::sin(angle);
        for (auto& c : o.color) c = float(rng.uniform(0.25, 1.0));
    }

    SyntheticVideo out;
    out.video.id = "synthetic";
    out.video.difficulty = Difficulty::Synthetic;

    const double cells_per_px = double(BackgroundTexture::kCells) / double(std::max(h, w)) * 2.0;
    std::size_t salient = 0;
    std::size_t next_shift = 0;
    std::vector<float> obj_mask(h * w);

    for (std::size_t t = 0; t < cfg.num_frames; ++t) {
        if (next_shift < cfg.shift_times.size() && t == cfg.shift_times[next_shift]) {
            salient = (salient + 1) % cfg.num_objects;
            ++next_shift;
        }

        Tensor<float> frame{Shape{3, h, w}};
        auto fv = frame.values();
        const double drift = cfg.camera_drift * double(t);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    const double u = (double(x) + drift) * cells_per_px;
                    const double v = (double(y) + drift * 0.5) * cells_per_px;
                    fv[(c * h + y) * w + x] =
                        float(0.5 + cfg.noise_level * (texture.sample(c, u, v) - 0.5) * 2.0);
                }

        // draw non-salient objects first so the salient one is unobscured
        FrameState fs;
        fs.salient_id = salient;
        for (const auto& o : objects) fs.objects.push_back(o.state);
        for (std::size_t pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < objects.size(); ++i) {
                const bool is_salient = (i == salient);
                if ((pass == 0 && is_salient) || (pass == 1 && !is_salient)) continue;
                rasterize_object(objects[i].state, h, w, obj_mask);
                for (std::size_t p = 0; p < h * w; ++p) {
                    if (obj_mask[p] == 0.0f) continue;
                    for (std::size_t c = 0; c < 3; ++c) fv[c * h * w + p] = objects[i].color[c];
                }
            }
        }
        for (auto& v : fv) v = std::clamp(v, 0.0f, 1.0f);

        Tensor<float> mask{Shape{1, h, w}};
        rasterize_object(objects[salient].state, h, w, mask.values());

        out.video.frames.push_back(std::move(frame));
        out.video.gt.push_back(std::move(mask));
        out.states.push_back(std::move(fs));

        for (auto& o : objects) advance(o, margin, double(h), double(w));
    }
    return out;
}

}  // namespace tubesal::data
