#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace gdk {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

struct AdamState {
    std::vector<double> m;  // first moments
    std::vector<double> v;  // second moments
    uint64_t step = 0;

    static AdamState zeros(size_t n) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
};

// Decoupled-weight-decay adaptive-moment update with bias correction.
inline void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                       const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw std::invalid_argument("adamw_step: parameter/gradient/state sizes must match");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * cfg.weight_decay * params[i];
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

}  // namespace gdk
