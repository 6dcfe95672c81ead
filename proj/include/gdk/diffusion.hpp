#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "gdk/field.hpp"
#include "gdk/noise.hpp"
#include "gdk/schedule.hpp"
#include "gdk/timesteps.hpp"

namespace gdk {

// z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps
inline Field forward_diffuse(const Field& z0, const Field& eps, int t, const NoiseSchedule& sched) {
    require_same_shape(z0, eps, "forward_diffuse");
    if (t < 1) throw std::invalid_argument("forward_diffuse: t must be >= 1");
    double ab = sched.alpha_bar(t);
    return lincomb(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps);
}

// v*_t = sqrt(abar_t) * eps - sqrt(1 - abar_t) * z0
inline Field v_target(const Field& z0, const Field& eps, int t, const NoiseSchedule& sched) {
    require_same_shape(z0, eps, "v_target");
    double ab = sched.alpha_bar(t);
    return lincomb(std::sqrt(ab), eps, -std::sqrt(1.0 - ab), z0);
}

// z0_hat = sqrt(abar_t) * z_t - sqrt(1 - abar_t) * v
inline Field reconstruct_z0(const Field& z_t, const Field& v, int t, const NoiseSchedule& sched) {
    require_same_shape(z_t, v, "reconstruct_z0");
    double ab = sched.alpha_bar(t);
    return lincomb(std::sqrt(ab), z_t, -std::sqrt(1.0 - ab), v);
}

// eps_hat = sqrt(abar_t) * v + sqrt(1 - abar_t) * z_t
inline Field eps_from_v(const Field& z_t, const Field& v, int t, const NoiseSchedule& sched) {
    require_same_shape(z_t, v, "eps_from_v");
    double ab = sched.alpha_bar(t);
    return lincomb(std::sqrt(ab), v, std::sqrt(1.0 - ab), z_t);
}

// Deterministic DDIM update (eta = 0). With t_prev = 0 the result is exactly
// the clean reconstruction, since alpha_bar(0) = 1.
inline Field ddim_step(const Field& z_t, const Field& v_hat, int t, int t_prev, const NoiseSchedule& sched) {
    if (t_prev < 0 || t_prev >= t) {
        throw std::invalid_argument("ddim_step: need t > t_prev >= 0");
    }
    Field z0_hat = reconstruct_z0(z_t, v_hat, t, sched);
    Field eps_hat = eps_from_v(z_t, v_hat, t, sched);
    double ab_prev = sched.alpha_bar(t_prev);
    return lincomb(std::sqrt(ab_prev), z0_hat, std::sqrt(1.0 - ab_prev), eps_hat);
}

// Any v-prediction denoiser: maps (z_t, condition, t) to v_hat.
using DenoiserFn = std::function<Field(const Field&, const Field&, int)>;

inline void validate_plan(const TimestepPlan& plan, const NoiseSchedule& sched) {
    if (plan.steps.empty()) throw std::invalid_argument("run_inference: empty timestep plan");
    int prev = sched.T + 1;
    for (int t : plan.steps) {
        if (t < 1 || t > sched.T) throw std::invalid_argument("run_inference: plan step outside schedule");
        if (t >= prev) throw std::invalid_argument("run_inference: plan steps must be strictly descending");
        prev = t;
    }
}

// DDIM chain from a caller-supplied initial latent.
inline Field run_inference_from(const DenoiserFn& model, const Field& condition, Field z,
                                const TimestepPlan& plan, const NoiseSchedule& sched) {
    validate_plan(plan, sched);
    const int k = plan.k();
    for (int i = 0; i < k; ++i) {
        int t = plan.steps[i];
        int t_prev = (i + 1 < k) ? plan.steps[i + 1] : 0;
        Field v_hat = model(z, condition, t);
        z = ddim_step(z, v_hat, t, t_prev, sched);
    }
    return z;
}

// Full inference pipeline: sample the initial latent per the noise spec, then
// run the DDIM chain. With (k=1, Trailing, Zeros) this is the deterministic
// single-step pipeline used after end-to-end fine-tuning.
inline Field run_inference(const DenoiserFn& model, const Field& condition, int target_channels,
                           const TimestepPlan& plan, const NoiseSpec& spec, const NoiseSchedule& sched) {
    Field z = sample_noise(spec, condition.h, condition.w, target_channels);
    return run_inference_from(model, condition, std::move(z), plan, sched);
}

}  // namespace gdk
