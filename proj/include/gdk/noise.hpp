#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "gdk/field.hpp"
#include "gdk/rng.hpp"

namespace gdk {

enum class NoiseKind { Gaussian, Pyramid, Zeros };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    int pyramid_levels = 4;
    double pyramid_decay = 0.5;
    uint64_t seed = 0;
};

namespace detail {

inline Field gaussian_field(int h, int w, int c, uint64_t seed) {
    Field out(h, w, c);
    Rng rng(seed);
    for (auto& x : out.v) x = rng.normal();
    return out;
}

// Bilinear upsample with half-pixel centers and edge clamping.
inline Field upsample_bilinear(const Field& src, int h, int w) {
    Field out(h, w, src.c);
    const double sy = static_cast<double>(src.h) / h;
    const double sx = static_cast<double>(src.w) / w;
    for (int y = 0; y < h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.h - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.h - 1);
        double wy = fy - y0;
        for (int x = 0; x < w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.w - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.w - 1);
            double wx = fx - x0;
            for (int ch = 0; ch < src.c; ++ch) {
                double top = (1.0 - wx) * src.at(y0, x0, ch) + wx * src.at(y0, x1, ch);
                double bot = (1.0 - wx) * src.at(y1, x0, ch) + wx * src.at(y1, x1, ch);
                out.at(y, x, ch) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

inline double sample_std(const Field& f) {
    if (f.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : f.v) mean += x;
    mean /= static_cast<double>(f.size());
    double ss = 0.0;
    for (double x : f.v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(f.size() - 1));
}

}  // namespace detail

// Gaussian: i.i.d. standard normal from the seeded stream.
// Pyramid: sum over levels l of decay^l * upsample(gaussian at ceil(H/2^l) x ceil(W/2^l)),
//          rescaled to unit sample std; level l draws from seed XOR l.
// Zeros: all-zero field, independent of the seed.
inline Field sample_noise(const NoiseSpec& spec, int h, int w, int c = 1) {
    if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("sample_noise: bad shape");

    switch (spec.kind) {
        case NoiseKind::Zeros:
            return Field(h, w, c, 0.0);
        case NoiseKind::Gaussian:
            return detail::gaussian_field(h, w, c, spec.seed);
        case NoiseKind::Pyramid: {
            if (spec.pyramid_levels < 1) throw std::invalid_argument("sample_noise: pyramid_levels must be >= 1");
            if (!(spec.pyramid_decay > 0.0 && spec.pyramid_decay < 1.0)) {
                throw std::invalid_argument("sample_noise: pyramid_decay must be in (0,1)");
            }
            // Deeper levels than the coarsest 1x1 grid would just repeat it.
            int feasible = 1;
            while ((std::max(h, w) >> feasible) >= 1) ++feasible;
            int levels = std::min(spec.pyramid_levels, feasible);

            Field acc(h, w, c, 0.0);
            double weight = 1.0;
            for (int l = 0; l < levels; ++l) {
                int lh = (h + (1 << l) - 1) >> l;
                int lw = (w + (1 << l) - 1) >> l;
                Field level = detail::gaussian_field(lh, lw, c, spec.seed ^ static_cast<uint64_t>(l));
                Field up = (lh == h && lw == w) ? std::move(level) : detail::upsample_bilinear(level, h, w);
                for (size_t i = 0; i < acc.size(); ++i) acc.v[i] += weight * up.v[i];
                weight *= spec.pyramid_decay;
            }
            double sd = detail::sample_std(acc);
            if (sd > 0.0) {
                for (auto& x : acc.v) x /= sd;
            }
            return acc;
        }
    }
    throw std::logic_error("sample_noise: unknown noise kind");
}

}  // namespace gdk
