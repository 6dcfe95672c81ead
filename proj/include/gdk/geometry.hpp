#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gdk/field.hpp"

namespace gdk {

struct EmptyMask : std::runtime_error {
    EmptyMask() : std::runtime_error("no valid pixels under the mask") {}
};

struct DegenerateAlignment : std::runtime_error {
    DegenerateAlignment() : std::runtime_error("prediction is constant over the mask; affine fit is underdetermined") {}
};

struct DepthMap {
    int h = 0;
    int w = 0;
    std::vector<double> values;   // h*w
    std::vector<uint8_t> mask;    // h*w, nonzero = valid

    DepthMap() = default;
    DepthMap(int h_, int w_, double fill = 0.0, bool valid = true)
        : h(h_), w(w_), values(static_cast<size_t>(h_) * w_, fill),
          mask(static_cast<size_t>(h_) * w_, valid ? 1 : 0) {}

    size_t pixels() const { return values.size(); }
    double& at(int y, int x) { return values[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return values[static_cast<size_t>(y) * w + x]; }
    bool valid(int y, int x) const { return mask[static_cast<size_t>(y) * w + x] != 0; }
};

struct NormalMap {
    int h = 0;
    int w = 0;
    std::vector<double> vectors;  // h*w*3, interleaved (nx, ny, nz)
    std::vector<uint8_t> mask;    // h*w

    NormalMap() = default;
    NormalMap(int h_, int w_)
        : h(h_), w(w_), vectors(static_cast<size_t>(h_) * w_ * 3, 0.0),
          mask(static_cast<size_t>(h_) * w_, 1) {}

    size_t pixels() const { return mask.size(); }
    double* vec(int y, int x) { return &vectors[(static_cast<size_t>(y) * w + x) * 3]; }
    const double* vec(int y, int x) const { return &vectors[(static_cast<size_t>(y) * w + x) * 3]; }
    bool valid(int y, int x) const { return mask[static_cast<size_t>(y) * w + x] != 0; }
};

struct AlignmentParams {
    double scale = 1.0;
    double shift = 0.0;  // named t in the affine fit; "shift" avoids colliding with timesteps
};

namespace detail {

inline void require_congruent(const DepthMap& a, const DepthMap& b, const char* what) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline std::vector<size_t> shared_mask_indices(const DepthMap& a, const DepthMap& b) {
    std::vector<size_t> idx;
    idx.reserve(a.pixels());
    for (size_t i = 0; i < a.pixels(); ++i) {
        if (a.mask[i] && b.mask[i]) idx.push_back(i);
    }
    return idx;
}

}  // namespace detail

// Least-squares fit of (scale, shift) minimizing sum over the shared mask of
// (scale * pred + shift - gt)^2, via the closed-form 2x2 normal equations.
inline AlignmentParams align_affine(const DepthMap& pred, const DepthMap& gt) {
    detail::require_congruent(pred, gt, "align_affine");
    auto idx = detail::shared_mask_indices(pred, gt);
    if (idx.empty()) throw EmptyMask();

    const double n = static_cast<double>(idx.size());
    double sd = 0.0, sg = 0.0;
    for (size_t i : idx) {
        sd += pred.values[i];
        sg += gt.values[i];
    }
    const double mean_d = sd / n;
    const double mean_g = sg / n;

    double sxx = 0.0, sxy = 0.0;
    for (size_t i : idx) {
        double dd = pred.values[i] - mean_d;
        sxx += dd * dd;
        sxy += dd * (gt.values[i] - mean_g);
    }
    // A constant prediction gives sxx = 0 up to rounding of the mean;
    // the threshold sits far above that rounding floor and far below any
    // genuine variation.
    if (!(sxx > 1e-20 * n * (1.0 + mean_d * mean_d))) throw DegenerateAlignment();

    AlignmentParams p;
    p.scale = sxy / sxx;
    p.shift = mean_g - p.scale * mean_d;
    return p;
}

inline DepthMap apply_alignment(const DepthMap& pred, const AlignmentParams& a) {
    DepthMap out = pred;
    for (auto& v : out.values) v = a.scale * v + a.shift;
    return out;
}

// Mean absolute error over the shared mask given a fixed alignment.
inline double depth_l1_aligned(const DepthMap& pred, const DepthMap& gt, const AlignmentParams& a) {
    detail::require_congruent(pred, gt, "depth_l1_aligned");
    auto idx = detail::shared_mask_indices(pred, gt);
    if (idx.empty()) throw EmptyMask();
    double acc = 0.0;
    for (size_t i : idx) acc += std::abs(a.scale * pred.values[i] + a.shift - gt.values[i]);
    return acc / static_cast<double>(idx.size());
}

// Affine-invariant depth loss: least-squares alignment, then mean absolute
// residual over valid pixels.
inline double loss_depth_affine_invariant(const DepthMap& pred, const DepthMap& gt) {
    return depth_l1_aligned(pred, gt, align_affine(pred, gt));
}

// d(loss)/d(pred) with the alignment coefficients held fixed; the per-step fit
// is treated as a constant of the loss.
inline std::vector<double> depth_l1_aligned_grad(const DepthMap& pred, const DepthMap& gt,
                                                 const AlignmentParams& a) {
    detail::require_congruent(pred, gt, "depth_l1_aligned_grad");
    auto idx = detail::shared_mask_indices(pred, gt);
    if (idx.empty()) throw EmptyMask();
    std::vector<double> grad(pred.pixels(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(idx.size());
    for (size_t i : idx) {
        double r = a.scale * pred.values[i] + a.shift - gt.values[i];
        double s = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        grad[i] = inv_n * s * a.scale;
    }
    return grad;
}

namespace detail {

// Angle between a (possibly unnormalized) prediction and a ground-truth
// vector. Zero-length predictions count as the maximal error pi.
inline double angle_between(const double* gt_v, const double* pred_v, int* zero_len_count = nullptr) {
    double ng = std::sqrt(gt_v[0] * gt_v[0] + gt_v[1] * gt_v[1] + gt_v[2] * gt_v[2]);
    double np = std::sqrt(pred_v[0] * pred_v[0] + pred_v[1] * pred_v[1] + pred_v[2] * pred_v[2]);
    if (np < 1e-300 || ng < 1e-300) {
        if (zero_len_count) ++(*zero_len_count);
        return std::numbers::pi;
    }
    double dot = (gt_v[0] * pred_v[0] + gt_v[1] * pred_v[1] + gt_v[2] * pred_v[2]) / (ng * np);
    dot = std::clamp(dot, -1.0, 1.0);
    return std::acos(dot);
}

inline void require_congruent(const NormalMap& a, const NormalMap& b, const char* what) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace detail

// Mean angle (radians) between predicted and ground-truth normals over the
// shared mask. Predictions are normalized inside the arccos.
inline double loss_normals_angular(const NormalMap& pred, const NormalMap& gt, int* zero_len_count = nullptr) {
    detail::require_congruent(pred, gt, "loss_normals_angular");
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < gt.pixels(); ++i) {
        if (!gt.mask[i] || !pred.mask[i]) continue;
        acc += detail::angle_between(&gt.vectors[i * 3], &pred.vectors[i * 3], zero_len_count);
        ++n;
    }
    if (n == 0) throw EmptyMask();
    return acc / static_cast<double>(n);
}

// Angular loss plus d(loss)/d(raw prediction vectors), for training. The
// gradient is zero at clamped dot products and at zero-length predictions,
// where the clamped loss is locally flat.
inline double loss_normals_angular_with_grad(const Field& pred_vectors, const NormalMap& gt,
                                             const std::vector<uint8_t>& mask, std::vector<double>& grad) {
    if (pred_vectors.h != gt.h || pred_vectors.w != gt.w || pred_vectors.c != 3) {
        throw std::invalid_argument("loss_normals_angular_with_grad: shape mismatch");
    }
    grad.assign(pred_vectors.size(), 0.0);
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < gt.pixels(); ++i) {
        if (!gt.mask[i] || !mask[i]) continue;
        ++n;
    }
    if (n == 0) throw EmptyMask();
    const double inv_n = 1.0 / static_cast<double>(n);

    for (size_t i = 0; i < gt.pixels(); ++i) {
        if (!gt.mask[i] || !mask[i]) continue;
        const double* g = &gt.vectors[i * 3];
        const double* u = &pred_vectors.v[i * 3];
        double ng = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        if (nu < 1e-12 || ng < 1e-300) {
            acc += std::numbers::pi * inv_n;
            continue;
        }
        double dot = (g[0] * u[0] + g[1] * u[1] + g[2] * u[2]) / (ng * nu);
        double c = std::clamp(dot, -1.0, 1.0);
        acc += std::acos(c) * inv_n;
        double one_minus_c2 = 1.0 - c * c;
        if (one_minus_c2 < 1e-12) continue;
        // d acos(c)/du = -(g_unit - c * u_unit) / (|u| * sqrt(1 - c^2))
        double coef = -inv_n / (nu * std::sqrt(one_minus_c2));
        for (int k = 0; k < 3; ++k) {
            double gu = g[k] / ng;
            double uu = u[k] / nu;
            grad[i * 3 + k] += coef * (gu - c * uu);
        }
    }
    return acc;
}

// AbsRel with the aligned prediction supplied by the caller.
inline double absrel_aligned(const DepthMap& aligned_pred, const DepthMap& gt) {
    detail::require_congruent(aligned_pred, gt, "absrel_aligned");
    auto idx = detail::shared_mask_indices(aligned_pred, gt);
    if (idx.empty()) throw EmptyMask();
    double acc = 0.0;
    for (size_t i : idx) {
        if (!(gt.values[i] > 0.0)) {
            throw std::invalid_argument("absrel_aligned: nonpositive ground-truth depth inside mask");
        }
        acc += std::abs(gt.values[i] - aligned_pred.values[i]) / gt.values[i];
    }
    return acc / static_cast<double>(idx.size());
}

// delta1 (%): pixels whose aligned-prediction/ground-truth ratio (either way)
// is strictly below 1.25. Nonpositive aligned predictions count as failures
// rather than shrinking the denominator.
inline double delta1_aligned(const DepthMap& aligned_pred, const DepthMap& gt) {
    detail::require_congruent(aligned_pred, gt, "delta1_aligned");
    auto idx = detail::shared_mask_indices(aligned_pred, gt);
    if (idx.empty()) throw EmptyMask();
    size_t hits = 0;
    for (size_t i : idx) {
        if (!(gt.values[i] > 0.0)) {
            throw std::invalid_argument("delta1_aligned: nonpositive ground-truth depth inside mask");
        }
        double p = aligned_pred.values[i];
        if (p <= 0.0) continue;
        double ratio = std::max(p / gt.values[i], gt.values[i] / p);
        if (ratio < 1.25) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(idx.size());
}

inline double metric_absrel(const DepthMap& pred, const DepthMap& gt) {
    return absrel_aligned(apply_alignment(pred, align_affine(pred, gt)), gt);
}

inline double metric_delta1(const DepthMap& pred, const DepthMap& gt) {
    return delta1_aligned(apply_alignment(pred, align_affine(pred, gt)), gt);
}

// (mean angular error in degrees, % of pixels strictly below 11.25 degrees)
inline std::pair<double, double> metric_normals(const NormalMap& pred, const NormalMap& gt) {
    detail::require_congruent(pred, gt, "metric_normals");
    double acc = 0.0;
    size_t n = 0, below = 0;
    constexpr double rad_to_deg = 180.0 / std::numbers::pi;
    for (size_t i = 0; i < gt.pixels(); ++i) {
        if (!gt.mask[i] || !pred.mask[i]) continue;
        double deg = detail::angle_between(&gt.vectors[i * 3], &pred.vectors[i * 3]) * rad_to_deg;
        acc += deg;
        if (deg < 11.25) ++below;
        ++n;
    }
    if (n == 0) throw EmptyMask();
    return {acc / static_cast<double>(n), 100.0 * static_cast<double>(below) / static_cast<double>(n)};
}

// Percentile with linear interpolation between order statistics, p in [0, 1].
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw EmptyMask();
    double q = p * static_cast<double>(sorted.size() - 1);
    size_t i = static_cast<size_t>(q);
    if (i + 1 >= sorted.size()) return sorted.back();
    double f = q - static_cast<double>(i);
    return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

// Mask out nonfinite values and values beyond the far plane, clip to the
// [2nd, 98th] percentile range of what remains, and map linearly to [-1, 1].
// A constant depth map (zero percentile range) maps all valid pixels to 0.
inline DepthMap preprocess_depth(const DepthMap& raw, std::optional<double> far_plane = std::nullopt) {
    DepthMap out = raw;
    std::vector<double> vals;
    vals.reserve(raw.pixels());
    for (size_t i = 0; i < raw.pixels(); ++i) {
        if (!out.mask[i]) continue;
        double v = out.values[i];
        if (!std::isfinite(v) || (far_plane && v > *far_plane)) {
            out.mask[i] = 0;
            continue;
        }
        vals.push_back(v);
    }
    if (vals.empty()) throw EmptyMask();

    std::sort(vals.begin(), vals.end());
    double p2 = percentile_sorted(vals, 0.02);
    double p98 = percentile_sorted(vals, 0.98);
    double range = p98 - p2;

    for (size_t i = 0; i < out.pixels(); ++i) {
        if (!out.mask[i]) {
            out.values[i] = 0.0;
            continue;
        }
        if (range <= 0.0) {
            out.values[i] = 0.0;
        } else {
            double v = std::clamp(out.values[i], p2, p98);
            out.values[i] = 2.0 * (v - p2) / range - 1.0;
        }
    }
    return out;
}

namespace detail {

// Finite-difference candidates along one axis whose stencil stays inside the
// mask; the smallest-magnitude candidate wins (ties prefer central, then
// forward), which keeps one-sided estimates on the smooth side of a depth
// discontinuity.
inline bool min_abs_gradient(const DepthMap& d, int y, int x, int dy, int dx, double* out) {
    auto in = [&](int yy, int xx) {
        return yy >= 0 && yy < d.h && xx >= 0 && xx < d.w && d.valid(yy, xx);
    };
    bool have = false;
    double best = 0.0;
    auto consider = [&](double g) {
        if (!have || std::abs(g) < std::abs(best)) {
            best = g;
            have = true;
        }
    };
    if (in(y + dy, x + dx) && in(y - dy, x - dx)) {
        consider(0.5 * (d.at(y + dy, x + dx) - d.at(y - dy, x - dx)));  // central
    }
    if (in(y + dy, x + dx)) consider(d.at(y + dy, x + dx) - d.at(y, x));  // forward
    if (in(y - dy, x - dx)) consider(d.at(y, x) - d.at(y - dy, x - dx));  // backward
    if (have) *out = best;
    return have;
}

}  // namespace detail

// Normals from a depth map via discontinuity-aware gradient selection.
// Convention: image x right, y down, +z toward the camera, so a surface
// with depth gradient (gx, gy) has normal ~ (-gx*fx, -gy*fy, 1) normalized.
// Pixels with no usable stencil on either axis are masked out.
inline NormalMap normals_from_depth(const DepthMap& depth, double fx = 1.0, double fy = 1.0) {
    if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("normals_from_depth: fx, fy must be > 0");
    NormalMap out(depth.h, depth.w);
    for (int y = 0; y < depth.h; ++y) {
        for (int x = 0; x < depth.w; ++x) {
            size_t i = static_cast<size_t>(y) * depth.w + x;
            if (!depth.mask[i]) {
                out.mask[i] = 0;
                continue;
            }
            double gx = 0.0, gy = 0.0;
            if (!detail::min_abs_gradient(depth, y, x, 0, 1, &gx) ||
                !detail::min_abs_gradient(depth, y, x, 1, 0, &gy)) {
                out.mask[i] = 0;
                continue;
            }
            double nx = -gx * fx;
            double ny = -gy * fy;
            double nz = 1.0;
            double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
            out.vectors[i * 3 + 0] = nx / norm;
            out.vectors[i * 3 + 1] = ny / norm;
            out.vectors[i * 3 + 2] = nz / norm;
        }
    }
    return out;
}

namespace detail {

inline double median_of(std::vector<double>& scratch) {
    size_t n = scratch.size();
    std::sort(scratch.begin(), scratch.end());
    if (n % 2 == 1) return scratch[n / 2];
    return 0.5 * (scratch[n / 2 - 1] + scratch[n / 2]);
}

inline DepthMap pixelwise_median(const std::vector<DepthMap>& maps) {
    DepthMap out = maps.front();
    std::vector<double> scratch;
    for (size_t i = 0; i < out.pixels(); ++i) {
        scratch.clear();
        for (const auto& m : maps) scratch.push_back(m.values[i]);
        out.values[i] = median_of(scratch);
    }
    return out;
}

}  // namespace detail

// Aggregate several affine-invariant predictions: three rounds of
// (pixelwise median, re-align every member to the median), then a final
// median. Members whose fit degenerates are dropped; at least one must
// survive. A single prediction is returned unchanged.
inline DepthMap ensemble(const std::vector<DepthMap>& predictions) {
    if (predictions.empty()) throw std::invalid_argument("ensemble: need at least one prediction");
    if (predictions.size() == 1) return predictions.front();
    for (size_t m = 1; m < predictions.size(); ++m) {
        detail::require_congruent(predictions[0], predictions[m], "ensemble");
        if (predictions[0].mask != predictions[m].mask) {
            throw std::invalid_argument("ensemble: member masks must be congruent");
        }
    }

    std::vector<DepthMap> members = predictions;
    for (int round = 0; round < 3; ++round) {
        DepthMap median = detail::pixelwise_median(members);
        std::vector<DepthMap> realigned;
        realigned.reserve(members.size());
        for (const auto& m : members) {
            try {
                realigned.push_back(apply_alignment(m, align_affine(m, median)));
            } catch (const DegenerateAlignment&) {
                // drop the constant member
            }
        }
        if (realigned.empty()) throw DegenerateAlignment();
        members = std::move(realigned);
    }
    return detail::pixelwise_median(members);
}

}  // namespace gdk
