#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdk/denoiser.hpp"
#include "gdk/diffusion.hpp"
#include "gdk/geometry.hpp"
#include "gdk/noise.hpp"
#include "gdk/optimizer.hpp"
#include "gdk/schedule.hpp"

namespace gdk {

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LossKind { VMatching, AffineInvariantDepth, AngularNormals };
enum class TimestepPolicy { UniformRandom, FixedT };
enum class TargetKind { Depth, Normals };

inline TargetKind target_of(LossKind kind, TargetKind vmatching_target = TargetKind::Depth) {
    switch (kind) {
        case LossKind::VMatching: return vmatching_target;
        case LossKind::AffineInvariantDepth: return TargetKind::Depth;
        case LossKind::AngularNormals: return TargetKind::Normals;
    }
    throw std::logic_error("target_of: unknown loss kind");
}

// One scene prepared for training: the condition field, the latent-space
// target z* (preprocessed depth in [-1,1] or raw unit normals, with invalid
// pixels filled with 0), the supervision mask, and the raw ground truth the
// task losses compare against.
struct TrainSample {
    Field condition;            // h x w x 1
    Field target;               // h x w x c, c = 1 (depth) or 3 (normals)
    std::vector<uint8_t> mask;  // h * w
    DepthMap gt_depth;          // raw depth, positive where valid
    NormalMap gt_normals;
};

struct TrainConfig {
    int iterations = 1000;
    int batch_size = 8;
    double learning_rate = 1e-3;
    int warmup_steps = 100;
    double lr_decay = 0.9995;  // per-step exponential factor after warm-up
    double weight_decay = 0.0;
    NoiseSpec noise;
    TimestepPolicy policy = TimestepPolicy::UniformRandom;
    LossKind loss = LossKind::VMatching;
    uint64_t seed = 7;
};

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.iterations < 0) throw std::invalid_argument("train config: iterations must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be > 0");
    bool e2e = cfg.loss != LossKind::VMatching;
    if (e2e != (cfg.policy == TimestepPolicy::FixedT)) {
        throw std::invalid_argument("train config: FixedT pairs with task losses, UniformRandom with v-matching");
    }
}

// Fixed randomness for one sample evaluation: the timestep and the noise
// field (eps for v-matching; the initial latent z_T for the task losses).
struct StepContext {
    int t = 0;
    Field noise;
};

struct SampleEval {
    double loss = 0.0;
    bool skipped = false;
};

// Loss for one sample, optionally accumulating dL/dtheta. For the depth loss
// the alignment is fit per call and treated as a constant of the gradient;
// passing frozen_align pins it explicitly (used by the finite-difference
// probes, which must differentiate the same function).
inline SampleEval eval_sample(const DenoiserParams& params, const TrainSample& sample, LossKind kind,
                              const NoiseSchedule& sched, const StepContext& ctx,
                              std::vector<double>* grad = nullptr,
                              const AlignmentParams* frozen_align = nullptr) {
    ForwardCache cache;
    SampleEval result;

    if (kind == LossKind::VMatching) {
        Field z_t = forward_diffuse(sample.target, ctx.noise, ctx.t, sched);
        Field v_star = v_target(sample.target, ctx.noise, ctx.t, sched);
        Field v_hat = denoiser_forward_cached(params, z_t, sample.condition, ctx.t, cache);

        size_t n_valid = 0;
        for (uint8_t m : sample.mask) n_valid += (m != 0);
        if (n_valid == 0) throw EmptyMask();
        const double inv_n = 1.0 / (static_cast<double>(n_valid) * sample.target.c);

        double loss = 0.0;
        std::vector<double> d_out(v_hat.size(), 0.0);
        for (size_t px = 0; px < sample.mask.size(); ++px) {
            if (!sample.mask[px]) continue;
            for (int ch = 0; ch < sample.target.c; ++ch) {
                size_t i = px * sample.target.c + ch;
                double r = v_hat.v[i] - v_star.v[i];
                loss += r * r * inv_n;
                d_out[i] = 2.0 * r * inv_n;
            }
        }
        result.loss = loss;
        if (grad) denoiser_backward(params, cache, d_out, *grad);
        return result;
    }

    // Task losses: single deterministic reconstruction at ctx.t.
    Field v_hat = denoiser_forward_cached(params, ctx.noise, sample.condition, ctx.t, cache);
    Field z0_hat = reconstruct_z0(ctx.noise, v_hat, ctx.t, sched);
    const double dz0_dv = -std::sqrt(1.0 - sched.alpha_bar(ctx.t));

    std::vector<double> d_z0;
    if (kind == LossKind::AffineInvariantDepth) {
        DepthMap pred;
        pred.h = z0_hat.h;
        pred.w = z0_hat.w;
        pred.values = z0_hat.v;
        pred.mask = sample.mask;

        AlignmentParams align;
        if (frozen_align) {
            align = *frozen_align;
        } else {
            try {
                align = align_affine(pred, sample.gt_depth);
            } catch (const DegenerateAlignment&) {
                result.skipped = true;
                return result;
            }
        }
        result.loss = depth_l1_aligned(pred, sample.gt_depth, align);
        if (grad) d_z0 = depth_l1_aligned_grad(pred, sample.gt_depth, align);
    } else {  // AngularNormals
        result.loss = loss_normals_angular_with_grad(z0_hat, sample.gt_normals, sample.mask, d_z0);
    }

    if (grad) {
        for (auto& g : d_z0) g *= dz0_dv;
        denoiser_backward(params, cache, d_z0, *grad);
    }
    return result;
}

struct TrainLogEntry {
    int iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    DenoiserParams params;
    AdamState opt;
    std::vector<TrainLogEntry> log;
    long skipped_samples = 0;
};

inline double lr_at(const TrainConfig& cfg, int step) {
    double base = cfg.learning_rate;
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
        return base * static_cast<double>(step + 1) / cfg.warmup_steps;
    }
    int decayed = cfg.warmup_steps > 0 ? step - cfg.warmup_steps : step;
    return base * std::pow(cfg.lr_decay, static_cast<double>(decayed));
}

namespace detail {

inline TrainResult run_training(DenoiserParams params, const std::vector<TrainSample>& data,
                                const TrainConfig& cfg, const NoiseSchedule& sched) {
    validate_train_config(cfg);
    if (data.empty()) throw std::invalid_argument("training: dataset is empty");

    TrainResult out;
    out.opt = AdamState::zeros(params.size());
    out.log.reserve(cfg.iterations);

    Rng master(cfg.seed);
    std::vector<double> grad(params.size(), 0.0);
    const int n = static_cast<int>(data.size());

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        int contributing = 0;

        for (int j = 0; j < cfg.batch_size; ++j) {
            int idx = (iter * cfg.batch_size + j) % n;
            const TrainSample& s = data[idx];

            StepContext ctx;
            ctx.t = (cfg.policy == TimestepPolicy::FixedT) ? sched.T : master.uniform_int(1, sched.T);
            NoiseSpec spec = cfg.noise;
            spec.seed = derive_seed(cfg.seed, master.next_u64());
            ctx.noise = sample_noise(spec, s.condition.h, s.condition.w, s.target.c);

            SampleEval ev = eval_sample(params, s, cfg.loss, sched, ctx, &grad);
            if (ev.skipped) {
                ++out.skipped_samples;
                continue;
            }
            if (!std::isfinite(ev.loss)) {
                throw NumericError("training diverged: non-finite loss at iteration " +
                                   std::to_string(iter) + ", sample " + std::to_string(idx));
            }
            batch_loss += ev.loss;
            ++contributing;
        }

        double lr = lr_at(cfg, iter);
        if (contributing > 0) {
            double inv = 1.0 / contributing;
            for (auto& g : grad) g *= inv;
            AdamConfig acfg;
            acfg.learning_rate = lr;
            acfg.weight_decay = cfg.weight_decay;
            adamw_step(params.theta, grad, out.opt, acfg);
            batch_loss *= inv;
        }
        out.log.push_back({iter, batch_loss, lr});
    }

    out.params = std::move(params);
    return out;
}

}  // namespace detail

// Denoising objective: per sample draw t uniform on [1, T] and a noise field,
// diffuse the target, and regress the v-target with squared error.
inline TrainResult train_diffusion(DenoiserParams init, const std::vector<TrainSample>& data,
                                   TrainConfig cfg, const NoiseSchedule& sched) {
    cfg.policy = TimestepPolicy::UniformRandom;
    if (cfg.loss != LossKind::VMatching) throw std::invalid_argument("train_diffusion: loss must be v-matching");
    return detail::run_training(std::move(init), data, cfg, sched);
}

// End-to-end objective: fix t = T, use the configured initial latent (zeros
// by default), reconstruct z0 in one step and optimize the task loss.
inline TrainResult finetune_e2e(DenoiserParams init, const std::vector<TrainSample>& data,
                                TrainConfig cfg, const NoiseSchedule& sched) {
    cfg.policy = TimestepPolicy::FixedT;
    if (cfg.loss == LossKind::VMatching) throw std::invalid_argument("finetune_e2e: needs a task loss");
    return detail::run_training(std::move(init), data, cfg, sched);
}

// Single-sample prediction with the deterministic single-step pipeline.
inline Field predict_single_step(const DenoiserParams& params, const Field& condition,
                                 const NoiseSchedule& sched) {
    Field z(condition.h, condition.w, params.dims.channels, 0.0);
    Field v_hat = denoiser_forward(params, z, condition, sched.T);
    return reconstruct_z0(z, v_hat, sched.T, sched);
}

}  // namespace gdk
