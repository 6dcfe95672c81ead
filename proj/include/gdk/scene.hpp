#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "gdk/field.hpp"
#include "gdk/geometry.hpp"
#include "gdk/rng.hpp"

namespace gdk {

// Closed-form scenes: depth = base * exp(tilted plane + smooth radial bumps),
// so depth is strictly positive for any relief and the ground-truth normals
// come from the exact analytic gradient (grad d = d * grad exponent). The
// multiplicative form gives the near/far spread of real depth maps. The
// condition image is a Lambertian shading of the same surface modulated by a
// seeded texture, which makes condition -> depth learnable but not a
// pointwise function of intensity.
struct SceneConfig {
    int bumps = 1;
    double bump_amp = 0.25;         // max |log-amplitude|
    double bump_sigma_min = 0.16;   // fraction of min(h, w)
    double bump_sigma_max = 0.16;
    double plane_amp = 1.0;         // max |log offset| per axis at the border
    double base_depth = 2.5;        // depth where the exponent crosses zero
    double light_jitter = 0.0;      // max |x/y tilt| of the light direction
    double speckle_fraction = 0.02; // invalid-pixel rate
    double texture_strength = 0.12;
    double texture_freq_x = 2.0;    // cycles across the image; phase is seeded
    double texture_freq_y = 1.3;
};

struct GeoSample {
    Field condition;      // h x w
    DepthMap depth_gt;    // raw depth, strictly positive
    NormalMap normals_gt; // unit vectors from the analytic gradient
    uint64_t scene_seed = 0;
};

// Alternate "driving-like" family: strong ground-plane tilt, no bumps, longer
// depth range. Datasets can mix a fraction of these in (see make_dataset).
inline SceneConfig scene_family_alt() {
    SceneConfig cfg;
    cfg.bumps = 0;
    cfg.plane_amp = 1.4;
    cfg.base_depth = 4.0;
    cfg.texture_strength = 0.25;
    return cfg;
}

inline GeoSample gen_scene(uint64_t seed, int h, int w, const SceneConfig& cfg = {}) {
    if (h < 8 || w < 8) throw std::invalid_argument("gen_scene: fields must be at least 8x8");
    if (!(cfg.base_depth > 0.0)) throw std::invalid_argument("gen_scene: base_depth must be positive");

    Rng rng(seed);
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);

    const double px = cfg.plane_amp / cx * (2.0 * rng.uniform() - 1.0);
    const double py = cfg.plane_amp / cy * (2.0 * rng.uniform() - 1.0);

    struct Bump {
        double x, y, amp, inv_two_sigma2, inv_sigma2;
    };
    std::vector<Bump> bumps(cfg.bumps);
    const double extent = static_cast<double>(std::min(h, w));
    for (auto& b : bumps) {
        b.x = (0.15 + 0.7 * rng.uniform()) * (w - 1);
        b.y = (0.15 + 0.7 * rng.uniform()) * (h - 1);
        b.amp = cfg.bump_amp * (2.0 * rng.uniform() - 1.0);
        double sigma = (cfg.bump_sigma_min + (cfg.bump_sigma_max - cfg.bump_sigma_min) * rng.uniform()) * extent;
        b.inv_sigma2 = 1.0 / (sigma * sigma);
        b.inv_two_sigma2 = 0.5 * b.inv_sigma2;
    }

    // seeded light direction (toward camera) and texture parameters
    double lx = cfg.light_jitter * (2.0 * rng.uniform() - 1.0);
    double ly = cfg.light_jitter * (2.0 * rng.uniform() - 1.0);
    double lnorm = std::sqrt(lx * lx + ly * ly + 1.0);
    lx /= lnorm;
    ly /= lnorm;
    const double lz = 1.0 / lnorm;

    const double tfx = cfg.texture_freq_x;
    const double tfy = cfg.texture_freq_y;
    const double tphase = 2.0 * std::numbers::pi * rng.uniform();

    GeoSample s;
    s.scene_seed = seed;
    s.condition = Field(h, w, 1);
    s.depth_gt = DepthMap(h, w);
    s.normals_gt = NormalMap(h, w);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double expo = px * (x - cx) + py * (y - cy);
            double ex = px, ey = py;
            for (const auto& b : bumps) {
                double dx = x - b.x;
                double dy = y - b.y;
                double e = b.amp * std::exp(-(dx * dx + dy * dy) * b.inv_two_sigma2);
                expo += e;
                ex += -dx * b.inv_sigma2 * e;
                ey += -dy * b.inv_sigma2 * e;
            }
            double d = cfg.base_depth * std::exp(expo);
            double gx = d * ex;  // grad of base*exp(expo)
            double gy = d * ey;
            double norm = std::sqrt(gx * gx + gy * gy + 1.0);
            double nx = -gx / norm;
            double ny = -gy / norm;
            double nz = 1.0 / norm;

            size_t i = static_cast<size_t>(y) * w + x;
            s.depth_gt.values[i] = d;
            s.normals_gt.vectors[i * 3 + 0] = nx;
            s.normals_gt.vectors[i * 3 + 1] = ny;
            s.normals_gt.vectors[i * 3 + 2] = nz;

            double shade = std::max(0.0, nx * lx + ny * ly + nz * lz);
            double texture = 1.0 + cfg.texture_strength *
                                       std::sin(2.0 * std::numbers::pi * (tfx * x / w + tfy * y / h) + tphase);
            s.condition.v[i] = shade * texture;
        }
    }

    // seeded speckle of invalid pixels, shared by depth and normals
    for (size_t i = 0; i < s.depth_gt.pixels(); ++i) {
        if (rng.uniform() < cfg.speckle_fraction) {
            s.depth_gt.mask[i] = 0;
            s.normals_gt.mask[i] = 0;
        }
    }
    return s;
}

}  // namespace gdk
