#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gdk/field.hpp"
#include "gdk/rng.hpp"

namespace gdk {

// Fully connected v-prediction network over flattened fields:
//   input  = [flatten(z_t), flatten(condition), timestep_embedding(t)]
//   hidden = two tanh layers of equal width
//   output = flatten(v_hat), same shape as the target field
struct DenoiserDims {
    int h = 16;
    int w = 16;
    int channels = 1;   // 1 for depth targets, 3 for normals
    int width = 256;
    int embed_dim = 32;

    int input_dim() const { return h * w * channels + h * w + embed_dim; }
    int output_dim() const { return h * w * channels; }

    bool operator==(const DenoiserDims&) const = default;
};

namespace detail {

struct DenoiserLayout {
    size_t w1, b1, w2, b2, w3, b3, total;
};

inline DenoiserLayout layout_of(const DenoiserDims& d) {
    DenoiserLayout l{};
    size_t in = static_cast<size_t>(d.input_dim());
    size_t wd = static_cast<size_t>(d.width);
    size_t out = static_cast<size_t>(d.output_dim());
    l.w1 = 0;
    l.b1 = l.w1 + wd * in;
    l.w2 = l.b1 + wd;
    l.b2 = l.w2 + wd * wd;
    l.w3 = l.b2 + wd;
    l.b3 = l.w3 + out * wd;
    l.total = l.b3 + out;
    return l;
}

}  // namespace detail

inline std::vector<double> timestep_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even and >= 2");
    std::vector<double> emb(dim);
    int half = dim / 2;
    for (int j = 0; j < half; ++j) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(j) / half);
        emb[2 * j] = std::sin(t * freq);
        emb[2 * j + 1] = std::cos(t * freq);
    }
    return emb;
}

struct DenoiserParams {
    DenoiserDims dims;
    std::vector<double> theta;  // w1, b1, w2, b2, w3, b3 in declaration order

    static DenoiserParams zeros(const DenoiserDims& d) {
        DenoiserParams p;
        p.dims = d;
        p.theta.assign(detail::layout_of(d).total, 0.0);
        return p;
    }

    // Xavier-uniform weights, zero biases.
    static DenoiserParams random_init(const DenoiserDims& d, uint64_t seed) {
        DenoiserParams p = zeros(d);
        auto l = detail::layout_of(d);
        Rng rng(seed);
        auto fill = [&](size_t off, size_t rows, size_t cols) {
            double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (size_t i = 0; i < rows * cols; ++i) {
                p.theta[off + i] = limit * (2.0 * rng.uniform() - 1.0);
            }
        };
        size_t in = static_cast<size_t>(d.input_dim());
        size_t wd = static_cast<size_t>(d.width);
        size_t out = static_cast<size_t>(d.output_dim());
        fill(l.w1, wd, in);
        fill(l.w2, wd, wd);
        fill(l.w3, out, wd);
        return p;
    }

    size_t size() const { return theta.size(); }

    std::span<const double> w1() const { auto l = detail::layout_of(dims); return {theta.data() + l.w1, l.b1 - l.w1}; }
    std::span<const double> b1() const { auto l = detail::layout_of(dims); return {theta.data() + l.b1, l.w2 - l.b1}; }
    std::span<const double> w2() const { auto l = detail::layout_of(dims); return {theta.data() + l.w2, l.b2 - l.w2}; }
    std::span<const double> b2() const { auto l = detail::layout_of(dims); return {theta.data() + l.b2, l.w3 - l.b2}; }
    std::span<const double> w3() const { auto l = detail::layout_of(dims); return {theta.data() + l.w3, l.b3 - l.w3}; }
    std::span<const double> b3() const { auto l = detail::layout_of(dims); return {theta.data() + l.b3, theta.size() - l.b3}; }
};

// Activations kept for the backward pass.
struct ForwardCache {
    std::vector<double> input;  // concatenated input
    std::vector<double> a1;     // tanh outputs, layer 1
    std::vector<double> a2;     // tanh outputs, layer 2
};

namespace detail {

inline void affine_forward(const double* w, const double* b, const std::vector<double>& in,
                           size_t rows, size_t cols, std::vector<double>& out) {
    out.assign(rows, 0.0);
    for (size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = b[r];
        for (size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
        out[r] = acc;
    }
}

}  // namespace detail

inline Field denoiser_forward_cached(const DenoiserParams& p, const Field& z, const Field& x, int t,
                                     ForwardCache& cache) {
    const auto& d = p.dims;
    if (z.h != d.h || z.w != d.w || z.c != d.channels) {
        throw std::invalid_argument("denoiser_forward: latent shape does not match the network");
    }
    if (x.h != d.h || x.w != d.w || x.c != 1) {
        throw std::invalid_argument("denoiser_forward: condition shape does not match the network");
    }
    auto l = detail::layout_of(d);
    size_t in = static_cast<size_t>(d.input_dim());
    size_t wd = static_cast<size_t>(d.width);
    size_t out = static_cast<size_t>(d.output_dim());

    cache.input.clear();
    cache.input.reserve(in);
    cache.input.insert(cache.input.end(), z.v.begin(), z.v.end());
    cache.input.insert(cache.input.end(), x.v.begin(), x.v.end());
    auto emb = timestep_embedding(t, d.embed_dim);
    cache.input.insert(cache.input.end(), emb.begin(), emb.end());

    detail::affine_forward(p.theta.data() + l.w1, p.theta.data() + l.b1, cache.input, wd, in, cache.a1);
    for (auto& v : cache.a1) v = std::tanh(v);
    detail::affine_forward(p.theta.data() + l.w2, p.theta.data() + l.b2, cache.a1, wd, wd, cache.a2);
    for (auto& v : cache.a2) v = std::tanh(v);

    std::vector<double> y;
    detail::affine_forward(p.theta.data() + l.w3, p.theta.data() + l.b3, cache.a2, out, wd, y);

    Field result(d.h, d.w, d.channels);
    result.v = std::move(y);
    return result;
}

inline Field denoiser_forward(const DenoiserParams& p, const Field& z, const Field& x, int t) {
    ForwardCache cache;
    return denoiser_forward_cached(p, z, x, t, cache);
}

// Accumulates dL/dtheta into grad given dL/d(output); grad must have the
// parameter layout and is not cleared here.
inline void denoiser_backward(const DenoiserParams& p, const ForwardCache& cache,
                              const std::vector<double>& d_out, std::vector<double>& grad) {
    const auto& d = p.dims;
    auto l = detail::layout_of(d);
    size_t in = static_cast<size_t>(d.input_dim());
    size_t wd = static_cast<size_t>(d.width);
    size_t out = static_cast<size_t>(d.output_dim());
    if (d_out.size() != out) throw std::invalid_argument("denoiser_backward: output gradient size mismatch");
    if (grad.size() != p.theta.size()) throw std::invalid_argument("denoiser_backward: gradient layout mismatch");

    // output layer
    std::vector<double> da2(wd, 0.0);
    for (size_t r = 0; r < out; ++r) {
        double g = d_out[r];
        if (g == 0.0) continue;
        double* gw = grad.data() + l.w3 + r * wd;
        const double* w = p.theta.data() + l.w3 + r * wd;
        for (size_t c = 0; c < wd; ++c) {
            gw[c] += g * cache.a2[c];
            da2[c] += g * w[c];
        }
        grad[l.b3 + r] += g;
    }

    // hidden layer 2
    std::vector<double> da1(wd, 0.0);
    for (size_t r = 0; r < wd; ++r) {
        double g = da2[r] * (1.0 - cache.a2[r] * cache.a2[r]);
        if (g == 0.0) continue;
        double* gw = grad.data() + l.w2 + r * wd;
        const double* w = p.theta.data() + l.w2 + r * wd;
        for (size_t c = 0; c < wd; ++c) {
            gw[c] += g * cache.a1[c];
            da1[c] += g * w[c];
        }
        grad[l.b2 + r] += g;
    }

    // hidden layer 1
    for (size_t r = 0; r < wd; ++r) {
        double g = da1[r] * (1.0 - cache.a1[r] * cache.a1[r]);
        if (g == 0.0) continue;
        double* gw = grad.data() + l.w1 + r * in;
        for (size_t c = 0; c < in; ++c) gw[c] += g * cache.input[c];
        grad[l.b1 + r] += g;
    }
}

}  // namespace gdk
